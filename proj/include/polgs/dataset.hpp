#pragma once

#include <string>
#include <vector>

#include "polgs/camera.hpp"
#include "polgs/image.hpp"

namespace polgs {

// One captured (or synthesized) view: the four polarizer-angle images, the
// Stokes planes derived from them, a foreground mask and the camera. Ground
// truth normal/depth are present for synthetic data only (empty otherwise);
// normals are stored in camera space, oriented toward the camera.
struct PolarizedView {
    std::string name;
    Camera camera;
    Image i0, i45, i90, i135; // 3-channel linear radiance
    StokesImage stokes;
    Image mask;               // 1-channel in [0,1]
    Image gt_normal;          // optional, 3-channel
    Image gt_depth;           // optional, 1-channel
};

// Reads the documented directory layout: views.json plus per-view
// I000/I045/I090/I135.exr, mask.png and optional gt_normal/gt_depth.exr.
// Validates image sizes against the camera, rejects poses whose rotation is
// non-orthonormal beyond 1e-4 and errors on any missing polarizer angle.
std::vector<PolarizedView> load_dataset(const std::string& root);

// Inverse of load_dataset; rewrites the same layout.
void save_dataset(const std::string& root,
                  const std::vector<PolarizedView>& views);

} // namespace polgs
