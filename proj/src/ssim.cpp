#include "polgs/ssim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace polgs {
namespace {

constexpr int kWin = 11;
constexpr int kHalf = kWin / 2;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWin>& window() {
    static const std::array<double, kWin> w = [] {
        std::array<double, kWin> k{};
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            const double d = i - kHalf;
            k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            sum += k[i];
        }
        for (double& v : k)
            v /= sum;
        return k;
    }();
    return w;
}

Image horizontal_pass(const Image& src) {
    const auto& w = window();
    Image out(src.width(), src.height(), src.channels());
    const int nc = src.channels();
#pragma omp parallel for schedule(static)
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            for (int c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (int k = -kHalf; k <= kHalf; ++k) {
                    const int xx = x + k;
                    if (xx < 0 || xx >= src.width())
                        continue;
                    acc += w[k + kHalf] * src.at(xx, y, c);
                }
                out.at(x, y, c) = acc;
            }
        }
    }
    return out;
}

Image vertical_pass(const Image& src) {
    const auto& w = window();
    Image out(src.width(), src.height(), src.channels());
    const int nc = src.channels();
#pragma omp parallel for schedule(static)
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            for (int c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (int k = -kHalf; k <= kHalf; ++k) {
                    const int yy = y + k;
                    if (yy < 0 || yy >= src.height())
                        continue;
                    acc += w[k + kHalf] * src.at(x, yy, c);
                }
                out.at(x, y, c) = acc;
            }
        }
    }
    return out;
}

Image product(const Image& a, const Image& b) {
    Image out(a.width(), a.height(), a.channels());
    for (size_t i = 0; i < a.size(); ++i)
        out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

} // namespace

Image gaussian_window_filter(const Image& src) {
    return vertical_pass(horizontal_pass(src));
}

SsimData ssim_compute(const Image& x, const Image& y) {
    if (!x.same_shape(y))
        throw std::invalid_argument("ssim inputs must share a shape");

    SsimData d;
    d.mx = gaussian_window_filter(x);
    d.my = gaussian_window_filter(y);
    d.xx = gaussian_window_filter(product(x, x));
    d.yy = gaussian_window_filter(product(y, y));
    d.xy = gaussian_window_filter(product(x, y));
    d.map = Image(x.width(), x.height(), x.channels());

    double total = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double mx = d.mx.data()[i], my = d.my.data()[i];
        const double sx = d.xx.data()[i] - mx * mx;
        const double sy = d.yy.data()[i] - my * my;
        const double sxy = d.xy.data()[i] - mx * my;
        const double n1 = 2.0 * mx * my + kC1;
        const double d1 = mx * mx + my * my + kC1;
        const double n2 = 2.0 * sxy + kC2;
        const double d2 = sx + sy + kC2;
        const double s = (n1 * n2) / (d1 * d2);
        d.map.data()[i] = s;
        total += s;
    }
    d.mean = total / double(x.size());
    return d;
}

Image ssim_backward(const SsimData& d, const Image& x, const Image& y,
                    double g_mean) {
    const double g = g_mean / double(x.size());

    // Per-pixel partials of the SSIM map w.r.t. the three window sums that
    // depend on x: mx, w*(x^2), w*(x*y).
    Image f_mx(x.width(), x.height(), x.channels());
    Image f_xx = f_mx, f_xy = f_mx;
    for (size_t i = 0; i < x.size(); ++i) {
        const double mx = d.mx.data()[i], my = d.my.data()[i];
        const double sx = d.xx.data()[i] - mx * mx;
        const double sy = d.yy.data()[i] - my * my;
        const double sxy = d.xy.data()[i] - mx * my;
        const double n1 = 2.0 * mx * my + kC1;
        const double d1 = mx * mx + my * my + kC1;
        const double n2 = 2.0 * sxy + kC2;
        const double d2 = sx + sy + kC2;
        const double s1 = n1 / d1, s2 = n2 / d2;

        // The groupings below are chosen so that when x and y are bitwise
        // identical every partial cancels exactly (s1 == s2 == 1 and the
        // paired products round the same way), leaving a true zero gradient
        // at a perfect match instead of rounding residue.
        const double inv = 1.0 / d2;
        const double dS_dsxy = (2.0 * s1) * inv;
        const double dS_dsx = -(s1 * s2) * inv;
        const double dS1_dmx = (2.0 * my * d1 - 2.0 * mx * n1) / (d1 * d1);
        // sx and sxy both shift with mx: d sx/d mx = -2 mx, d sxy/d mx = -my.
        const double dS_dmx =
            s2 * dS1_dmx + dS_dsxy * (-my) + dS_dsx * (-2.0 * mx);

        f_mx.data()[i] = g * dS_dmx;
        f_xx.data()[i] = g * dS_dsx;
        f_xy.data()[i] = g * dS_dsxy;
    }

    // Adjoint of the symmetric zero-padded window filter is the filter
    // itself, so three more passes complete the chain.
    const Image c_mx = gaussian_window_filter(f_mx);
    const Image c_xx = gaussian_window_filter(f_xx);
    const Image c_xy = gaussian_window_filter(f_xy);

    Image gx(x.width(), x.height(), x.channels());
    for (size_t i = 0; i < x.size(); ++i)
        gx.data()[i] = c_mx.data()[i] +
                       x.data()[i] * (2.0 * c_xx.data()[i] + c_xy.data()[i]) +
                       (y.data()[i] - x.data()[i]) * c_xy.data()[i];
    return gx;
}

} // namespace polgs
