#pragma once

#include <algorithm>
#include <vector>
#include <cstddef>

#include "polgs/types.hpp"

namespace polgs {

// Dense interleaved image buffer, double per sample. Channel count is
// runtime (1 for masks/depth, 3 for color/normal/Stokes channels).
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* row(int y) { return data_.data() + static_cast<size_t>(y) * width_ * channels_; }
    const double* row(int y) const { return data_.data() + static_cast<size_t>(y) * width_ * channels_; }

    double& at(int x, int y, int c = 0) {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int x, int y, int c = 0) const {
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    Rgb rgb(int x, int y) const {
        const double* p = &data_[(static_cast<size_t>(y) * width_ + x) * channels_];
        return Rgb(p[0], p[1], p[2]);
    }
    void set_rgb(int x, int y, const Rgb& v) {
        double* p = &data_[(static_cast<size_t>(y) * width_ + x) * channels_];
        p[0] = v[0]; p[1] = v[1]; p[2] = v[2];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Image& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

// Per-pixel linear Stokes components for one view; each plane has one value
// per color channel. s3 is identically zero and not stored.
struct StokesImage {
    Image s0, s1, s2;

    StokesImage() = default;
    StokesImage(int w, int h, int channels)
        : s0(w, h, channels), s1(w, h, channels), s2(w, h, channels) {}
};

double max_abs_diff(const Image& a, const Image& b);

} // namespace polgs
