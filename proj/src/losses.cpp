#include "polgs/losses.hpp"

#include "polgs/ssim.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace polgs {
namespace {

void require_same(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

// Mean absolute difference plus its gradient w.r.t. pred (sign/N).
double l1_mean(const Image& gt, const Image& pred, Image* g, double g_scale) {
    double acc = 0.0;
    const double n = double(gt.size());
    for (size_t i = 0; i < gt.size(); ++i) {
        const double d = pred.data()[i] - gt.data()[i];
        acc += std::abs(d);
        if (g)
            g->data()[i] += g_scale * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    return acc / n;
}

} // namespace

LossReport make_report(double rgb, double pol, double mask, double opacity,
                       double dn, const LossWeights& w, long iter) {
    LossReport r;
    r.rgb = rgb;
    r.pol = pol;
    r.mask = mask;
    r.opacity = opacity;
    r.depth_normal = dn;
    r.lambda4 = w.lambda4(iter);
    r.total = rgb + w.lambda1 * pol + w.lambda2 * mask + w.lambda3 * opacity +
              r.lambda4 * dn;
    return r;
}

double loss_rgb(const Image& gt, const Image& pred, Image* g_pred) {
    require_same(gt, pred, "rgb loss");
    if (g_pred && !g_pred->same_shape(pred))
        *g_pred = Image(pred.width(), pred.height(), pred.channels());

    const double l1 = l1_mean(gt, pred, g_pred, 0.8);
    const SsimData ssim = ssim_compute(pred, gt);
    const double dssim = 0.5 * (1.0 - ssim.mean);
    if (g_pred) {
        // d(0.2 * dssim)/d pred = -0.1 * d ssim_mean / d pred
        const Image gs = ssim_backward(ssim, pred, gt, -0.1);
        for (size_t i = 0; i < gs.size(); ++i)
            g_pred->data()[i] += gs.data()[i];
    }
    return 0.8 * l1 + 0.2 * dssim;
}

double loss_pol(const Image& gt_s1, const Image& pred_s1, const Image& gt_s2,
                const Image& pred_s2, Image* g_s1, Image* g_s2) {
    require_same(gt_s1, pred_s1, "polarization loss s1");
    require_same(gt_s2, pred_s2, "polarization loss s2");
    if (g_s1 && !g_s1->same_shape(pred_s1))
        *g_s1 = Image(pred_s1.width(), pred_s1.height(), pred_s1.channels());
    if (g_s2 && !g_s2->same_shape(pred_s2))
        *g_s2 = Image(pred_s2.width(), pred_s2.height(), pred_s2.channels());
    return l1_mean(gt_s1, pred_s1, g_s1, 1.0) +
           l1_mean(gt_s2, pred_s2, g_s2, 1.0);
}

double loss_mask(const Image& gt_mask, const Image& alpha, Image* g_alpha) {
    require_same(gt_mask, alpha, "mask loss");
    constexpr double kEps = 1e-6;
    constexpr double kSlack = 1e-9; // tolerate float round-off at the ends
    if (g_alpha && !g_alpha->same_shape(alpha))
        *g_alpha = Image(alpha.width(), alpha.height(), 1);

    double acc = 0.0;
    const double n = double(alpha.size());
    for (size_t i = 0; i < alpha.size(); ++i) {
        const double m = gt_mask.data()[i];
        const double a = alpha.data()[i];
        if (m < -kSlack || m > 1.0 + kSlack || a < -kSlack || a > 1.0 + kSlack)
            throw std::invalid_argument("mask loss inputs must lie in [0,1]");
        const double mh = std::clamp(a, kEps, 1.0 - kEps);
        acc += -(m * std::log(mh) + (1.0 - m) * std::log(1.0 - mh));
        if (g_alpha && a > kEps && a < 1.0 - kEps)
            g_alpha->data()[i] += (-m / mh + (1.0 - m) / (1.0 - mh)) / n;
    }
    return acc / n;
}

double loss_opacity(const std::vector<double>& opacity,
                    std::vector<double>* g_opacity) {
    if (opacity.empty())
        return 0.0;
    if (g_opacity)
        g_opacity->assign(opacity.size(), 0.0);
    double acc = 0.0;
    const double n = double(opacity.size());
    for (size_t i = 0; i < opacity.size(); ++i) {
        const double d = opacity[i] - 0.5;
        const double e = std::exp(-400.0 * d * d);
        acc += e;
        if (g_opacity)
            (*g_opacity)[i] = -800.0 * d * e / n;
    }
    return acc / n;
}

double loss_depth_normal(const Image& depth_map, const Image& normal_map,
                         const Image& alpha, const Camera& cam,
                         Image* g_depth, Image* g_normal) {
    require_same(depth_map, alpha, "depth-normal loss");
    if (normal_map.width() != depth_map.width() ||
        normal_map.height() != depth_map.height() ||
        normal_map.channels() != 3)
        throw std::invalid_argument("shape mismatch in depth-normal loss");
    const int w = depth_map.width(), h = depth_map.height();
    if (g_depth && !g_depth->same_shape(depth_map))
        *g_depth = Image(w, h, 1);
    if (g_normal && !g_normal->same_shape(normal_map))
        *g_normal = Image(w, h, 3);

    auto fg = [&](int x, int y) { return alpha.at(x, y) >= 0.5; };
    auto usable = [&](int x, int y) {
        return fg(x, y) && fg(x - 1, y) && fg(x + 1, y) && fg(x, y - 1) &&
               fg(x, y + 1);
    };
    auto point = [&](int x, int y) {
        return Vec3(cam.unproject(x, y, depth_map.at(x, y)));
    };

    int count = 0;
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x)
            if (usable(x, y)) {
                const Vec3 tu = point(x + 1, y) - point(x - 1, y);
                const Vec3 tv = point(x, y + 1) - point(x, y - 1);
                if (tv.cross(tu).norm() > 1e-300)
                    ++count;
            }
    if (count == 0) {
        std::cerr << "warning: depth-normal loss has no usable foreground "
                     "pixels; returning 0\n";
        return 0.0;
    }

    double acc = 0.0;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            if (!usable(x, y))
                continue;
            const Vec3 tu = point(x + 1, y) - point(x - 1, y);
            const Vec3 tv = point(x, y + 1) - point(x, y - 1);
            // tv x tu points toward the camera for a front-facing surface.
            const Vec3 c = tv.cross(tu);
            const double len = c.norm();
            if (len <= 1e-300)
                continue;
            const Vec3 ncd = c / len;
            const Vec3 nhat(normal_map.at(x, y, 0), normal_map.at(x, y, 1),
                            normal_map.at(x, y, 2));
            acc += 1.0 - nhat.dot(ncd);

            if (g_normal) {
                g_normal->at(x, y, 0) -= ncd.x() / count;
                g_normal->at(x, y, 1) -= ncd.y() / count;
                g_normal->at(x, y, 2) -= ncd.z() / count;
            }
            if (g_depth) {
                const Vec3 gncd = -nhat / double(count);
                const Vec3 gc = (gncd - ncd * ncd.dot(gncd)) / len;
                const Vec3 gtv = tu.cross(gc);
                const Vec3 gtu = gc.cross(tv);
                g_depth->at(x + 1, y) += cam.ray(x + 1, y).dot(gtu);
                g_depth->at(x - 1, y) -= cam.ray(x - 1, y).dot(gtu);
                g_depth->at(x, y + 1) += cam.ray(x, y + 1).dot(gtv);
                g_depth->at(x, y - 1) -= cam.ray(x, y - 1).dot(gtv);
            }
        }
    }
    return acc / count;
}

} // namespace polgs
