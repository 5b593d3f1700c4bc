#pragma once

#include "polgs/image.hpp"

namespace polgs {

// SSIM with the standard 11x11 sigma=1.5 Gaussian window, K1=0.01, K2=0.03,
// unit dynamic range. Windows are zero-padded at the borders and the score
// is the plain mean of the per-pixel map over all pixels and channels.
struct SsimData {
    double mean = 0.0;
    Image map;              // per-pixel, per-channel SSIM
    Image mx, my, xx, yy, xy; // cached window sums for the backward pass
};

SsimData ssim_compute(const Image& x, const Image& y);

// dL/dx for L = g_mean * mean(map); y is treated as constant.
Image ssim_backward(const SsimData& d, const Image& x, const Image& y,
                    double g_mean);

// The window convolution itself (each channel independently, zero padding);
// exposed so tests can check it against a direct implementation.
Image gaussian_window_filter(const Image& src);

} // namespace polgs
