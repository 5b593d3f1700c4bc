#pragma once

#include <optional>
#include <vector>

#include "polgs/camera.hpp"
#include "polgs/image.hpp"
#include "polgs/surfel.hpp"

namespace polgs {

// A surfel after projection into one camera, ready for compositing.
struct ProjectedSurfel {
    int index = 0;          // position in the source cloud
    Vec2 mean = Vec2::Zero();       // screen center, pixel units
    Mat2 cov = Mat2::Zero();        // screen covariance after low-pass floor
    Mat2 conic = Mat2::Zero();      // inverse screen covariance
    double depth = 0.0;             // camera-space center depth
    double radius = 0.0;            // conservative pixel footprint half-width
    Vec3 normal = Vec3::Zero();     // camera space, oriented toward camera
    double orient_sign = 1.0;       // flip applied to the raw third axis
    double opacity = 0.0;           // sigmoid of the stored logit
    Rgb color = Rgb::Zero();
    Mat3 cam_rot = Mat3::Identity();    // camera rotation times surfel rotation
    Mat2 tangent_to_pixel = Mat2::Zero(); // maps tangent-plane offsets to pixel offsets
    Vec2 depth_slope = Vec2::Zero();    // d(u) = depth + slope . (u - mean)
    bool slope_valid = false;           // tangent map was invertible
    Vec3 p_cam = Vec3::Zero();          // camera-space center
};

// Per-pixel outputs of one compositing pass. color/depth_accum/normal_accum
// and alpha are the raw front-to-back sums; depth and normal are the
// alpha-normalized maps (zero where nothing accumulated). Contributor lists
// are CSR over pixels, recorded only when the pass is asked to.
struct RenderBuffers {
    Image color;          // 3ch, premultiplied sum of weights times colors
    Image depth;          // 1ch, depth_accum / alpha on covered pixels
    Image normal;         // 3ch, unit length on covered pixels
    Image alpha;          // 1ch, accumulated opacity in [0,1]
    Image depth_accum;    // 1ch raw sum
    Image normal_accum;   // 3ch raw sum
    std::vector<int> contrib_offsets; // size W*H+1
    std::vector<int> contrib_items;   // indices into the projected list

    RenderBuffers() = default;
    RenderBuffers(int w, int h);
};

// Contributions fainter than this are skipped entirely.
inline constexpr double kMinAlpha = 1.0 / 255.0;
// Blending stops once remaining transmittance drops below this.
inline constexpr double kMinTransmittance = 1e-4;
// Accumulated alpha at or above this marks a rendered foreground pixel.
inline constexpr double kForegroundAlpha = 0.5;

// Projects one surfel; returns nothing when culled (behind the near plane,
// degenerate screen covariance, or footprint outside the image).
std::optional<ProjectedSurfel> project(const GaussianSurfel& surfel, int index,
                                       const Camera& camera);

// Projects a whole cloud and returns survivors sorted front-to-back by
// (center depth, cloud index); the index tiebreak makes the order total.
std::vector<ProjectedSurfel> project_all(const SurfelCloud& cloud,
                                         const Camera& camera);

// First-order depth of the surfel's tangent plane under pixel u, clamped to
// half the center depth so grazing surfels cannot explode.
double per_pixel_depth(const ProjectedSurfel& p, const Vec2& u);

// Front-to-back compositing over 16x16 tiles, parallel over tiles. Each tile
// owns its pixels; results are independent of thread count and bit-identical
// to composite_serial.
RenderBuffers composite_tiled(const std::vector<ProjectedSurfel>& projected,
                              int width, int height, bool record_contributors);

// Same per-pixel arithmetic without the tile structure; every pixel walks the
// full sorted list. Kept as the plain reference implementation.
RenderBuffers composite_serial(const std::vector<ProjectedSurfel>& projected,
                               int width, int height, bool record_contributors);

// Brute-force testing reference: each pixel sorts its own contributors by
// per-pixel depth before blending. Quadratic and exact; only for tests.
RenderBuffers composite_full_sort_reference(
    const std::vector<ProjectedSurfel>& projected, int width, int height);

// Gradients of a compositing pass w.r.t. per-projected-surfel quantities.
struct CompositeGrads {
    std::vector<Rgb> color;
    std::vector<Vec2> mean;
    std::vector<Mat2> conic;      // symmetric
    std::vector<double> opacity;  // w.r.t. the sigmoid output
    std::vector<double> depth;    // w.r.t. center depth
    std::vector<Vec2> depth_slope;
    std::vector<Vec3> normal;     // w.r.t. the oriented camera-space normal

    explicit CompositeGrads(size_t n)
        : color(n, Rgb::Zero()), mean(n, Vec2::Zero()), conic(n, Mat2::Zero()),
          opacity(n, 0.0), depth(n, 0.0), depth_slope(n, Vec2::Zero()),
          normal(n, Vec3::Zero()) {}
};

// Backward pass over recorded contributor lists. Upstream gradients are
// w.r.t. the raw accumulated buffers (color, depth_accum, normal_accum,
// alpha). Parallel over tiles with per-tile partial sums merged in tile
// order, so results do not depend on thread count. Throws on shape mismatch.
CompositeGrads composite_backward(const std::vector<ProjectedSurfel>& projected,
                                  const RenderBuffers& buffers,
                                  const Image& g_color, const Image& g_depth_accum,
                                  const Image& g_normal_accum, const Image& g_alpha);

// Maps compositing gradients back to surfel parameters, adding into grads.
// Also reports each projected surfel's screen-space positional gradient in
// normalized device units, the statistic the densifier thresholds.
void project_backward(const std::vector<ProjectedSurfel>& projected,
                      const SurfelCloud& cloud, const Camera& camera,
                      const CompositeGrads& cg, SurfelGrads& grads,
                      std::vector<double>* ndc_grad_norm = nullptr);

} // namespace polgs
