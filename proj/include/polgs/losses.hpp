#pragma once

#include <vector>

#include "polgs/camera.hpp"
#include "polgs/image.hpp"

namespace polgs {

// Loss weights; lambda4 ramps linearly with the iteration count.
struct LossWeights {
    double lambda1 = 1.0;   // polarization
    double lambda2 = 0.1;   // mask
    double lambda3 = 0.01;  // opacity binarization
    double lambda4_base = 0.01;
    double lambda4_gain = 0.1;
    int lambda4_horizon = 15000;

    double lambda4(long iter) const {
        return lambda4_base + lambda4_gain * (double(iter) / lambda4_horizon);
    }
};

struct LossReport {
    double total = 0.0;
    double rgb = 0.0;
    double pol = 0.0;
    double mask = 0.0;
    double opacity = 0.0;
    double depth_normal = 0.0;
    double lambda4 = 0.0;
};

LossReport make_report(double rgb, double pol, double mask, double opacity,
                       double dn, const LossWeights& w, long iter);

// 0.8 L1 + 0.2 DSSIM on the rendered s0; optional gradient w.r.t. pred.
double loss_rgb(const Image& gt, const Image& pred, Image* g_pred = nullptr);

// Mean-absolute error summed over the two linear-polarization planes.
double loss_pol(const Image& gt_s1, const Image& pred_s1, const Image& gt_s2,
                const Image& pred_s2, Image* g_s1 = nullptr,
                Image* g_s2 = nullptr);

// Mean binary cross-entropy between the ground-truth mask and accumulated
// alpha (clamped to [1e-6, 1-1e-6]). Throws if either input leaves [0,1].
double loss_mask(const Image& gt_mask, const Image& alpha,
                 Image* g_alpha = nullptr);

// Mean of exp(-(20(o-0.5))^2) over all surfel opacities, pushing them away
// from the undecided middle.
double loss_opacity(const std::vector<double>& opacity,
                    std::vector<double>* g_opacity = nullptr);

// Consistency between the rendered normal map and normals recomputed from
// the rendered depth by central differences of unprojected neighbors. Only
// pixels whose 3x3 cross-neighborhood is fully foreground (alpha >= 0.5)
// participate; returns 0 with a warning when no pixel qualifies.
double loss_depth_normal(const Image& depth_map, const Image& normal_map,
                         const Image& alpha, const Camera& cam,
                         Image* g_depth = nullptr, Image* g_normal = nullptr);

} // namespace polgs
