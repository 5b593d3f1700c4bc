#pragma once

#include <vector>

#include "polgs/types.hpp"

namespace polgs {

// Learnable six-face environment texture. Texels are stored unconstrained
// and mapped through softplus, so sampled radiance is non-negative for any
// parameter values. Face layout follows the OpenGL cube map convention
// (+X, -X, +Y, -Y, +Z, -Z), bilinear filtering with edge clamping.
class Cubemap {
public:
    Cubemap() = default;
    explicit Cubemap(int resolution, double init_radiance = 0.5);

    int resolution() const { return res_; }
    size_t texel_count() const { return raw_.size(); }

    std::vector<double>& raw() { return raw_; }
    const std::vector<double>& raw() const { return raw_; }

    size_t index(int face, int x, int y, int c) const {
        return ((static_cast<size_t>(face) * res_ + y) * res_ + x) * 3 + c;
    }

    // Radiance of one texel (softplus of the stored value).
    Rgb texel(int face, int x, int y) const;
    void set_texel_radiance(int face, int x, int y, const Rgb& radiance);

    // Bilinear sample of the face selected by the dominant axis.
    // Throws std::invalid_argument("degenerate direction") on a zero vector.
    Rgb sample(const Vec3& dir) const;

    struct Sample {
        Rgb value = Rgb::Zero();
        Mat3 dval_ddir = Mat3::Zero();  // row c = d value[c] / d dir
        int face = 0;
        int ix[2] = {0, 0};
        int iy[2] = {0, 0};
        double weight[4] = {0, 0, 0, 0};  // (x0,y0),(x1,y0),(x0,y1),(x1,y1)
    };
    Sample sample_grad(const Vec3& dir) const;

    // Chain rule from a sampled-value gradient onto the raw texel storage.
    void accumulate_raw_grad(const Sample& s, const Rgb& gvalue,
                             std::vector<double>& raw_grad) const;

private:
    int res_ = 0;
    std::vector<double> raw_;
};

} // namespace polgs
