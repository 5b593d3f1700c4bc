#pragma once

#include <string>
#include <vector>

#include "polgs/dataset.hpp"
#include "polgs/renderer.hpp"
#include "polgs/scene.hpp"

namespace polgs {

struct ViewEval {
    std::string name;
    double mae_degrees = 0.0;
    long foreground_pixels = 0;
};

struct EvalReport {
    double mae_degrees = 0.0; // pooled over all foreground pixels
    double chamfer = 0.0;     // scene units; valid only when has_chamfer
    bool has_chamfer = false;
    std::vector<ViewEval> per_view;

    std::string to_json_text() const;
};

// Mean angular error in degrees between two normal maps where mask >= 0.5:
// mean of acos(clamp(pred . gt, -1, 1)). Inputs should be unit vectors;
// zero vectors (holes) count as 90 degrees. Throws DataError on shape
// mismatch or an empty foreground.
double mae_normals(const Image& pred, const Image& gt, const Image& mask);

// Symmetric mean nearest-neighbor distance between two point sets,
// 0.5 * (mean_a min_b |a-b| + mean_b min_a |b-a|). KD-tree backed and exact.
// Throws DataError when either set is empty.
double chamfer_distance(const std::vector<Vec3>& a,
                        const std::vector<Vec3>& b);

// Writes every surfel as a PLY vertex: position, normal (third rotation
// column, oriented outward by voting across the camera positions), color
// and opacity. With no cameras the raw normal sign is kept.
void export_pointcloud(const Scene& scene,
                       const std::vector<Camera>& cameras,
                       const std::string& path);

// Renders one view and writes the shading decomposition under `dir` with
// file names `<stem>_*.{exr,png}`: Stokes planes s0/s1/s2, the diffuse and
// specular parts of s0, angle and degree of linear polarization, normal and
// depth maps. EXR is linear data; PNG previews use a gamma 1/2.2 tone curve.
void export_decomposition(const Scene& scene, const Camera& camera,
                          double eta, const std::string& dir,
                          const std::string& stem);

// Renders every view that carries ground-truth normals and pools the MAE
// over their masks; adds the chamfer distance between surfel centers and
// gt_points when the latter is non-empty. Throws DataError when no view has
// ground truth.
EvalReport evaluate(const Scene& scene,
                    const std::vector<PolarizedView>& views, double eta,
                    const std::vector<Vec3>& gt_points);

} // namespace polgs
