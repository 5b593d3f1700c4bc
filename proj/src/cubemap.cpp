#include "polgs/cubemap.hpp"

#include <cmath>
#include <stdexcept>
#include <algorithm>

namespace polgs {

static double inverse_softplus(double v) {
    if (v > 30.0) return v;
    return std::log(std::expm1(std::max(v, 1e-12)));
}

Cubemap::Cubemap(int resolution, double init_radiance)
    : res_(resolution),
      raw_(static_cast<size_t>(6) * resolution * resolution * 3,
           inverse_softplus(init_radiance)) {}

Rgb Cubemap::texel(int face, int x, int y) const {
    return Rgb(softplus(raw_[index(face, x, y, 0)]),
               softplus(raw_[index(face, x, y, 1)]),
               softplus(raw_[index(face, x, y, 2)]));
}

void Cubemap::set_texel_radiance(int face, int x, int y, const Rgb& radiance) {
    for (int c = 0; c < 3; ++c)
        raw_[index(face, x, y, c)] = inverse_softplus(radiance[c]);
}

namespace {

// Per-face axis table: (major axis, sign, u axis, u sign, v axis, v sign).
struct FaceAxes {
    int ax; double sa;
    int bu; double su;
    int bv; double sv;
};
constexpr FaceAxes kFaces[6] = {
    {0, +1.0, 2, -1.0, 1, -1.0},  // +X
    {0, -1.0, 2, +1.0, 1, -1.0},  // -X
    {1, +1.0, 0, +1.0, 2, +1.0},  // +Y
    {1, -1.0, 0, +1.0, 2, -1.0},  // -Y
    {2, +1.0, 0, +1.0, 1, -1.0},  // +Z
    {2, -1.0, 0, -1.0, 1, -1.0},  // -Z
};

int select_face(const Vec3& d) {
    double ax = std::abs(d.x()), ay = std::abs(d.y()), az = std::abs(d.z());
    if (ax >= ay && ax >= az) return d.x() >= 0 ? 0 : 1;
    if (ay >= az) return d.y() >= 0 ? 2 : 3;
    return d.z() >= 0 ? 4 : 5;
}

} // namespace

Cubemap::Sample Cubemap::sample_grad(const Vec3& dir) const {
    if (dir.squaredNorm() == 0.0)
        throw std::invalid_argument("degenerate direction");

    Sample out;
    out.face = select_face(dir);
    const FaceAxes& f = kFaces[out.face];
    const double ma = f.sa * dir[f.ax];  // > 0 on this face
    const double u = f.su * dir[f.bu] / ma;
    const double v = f.sv * dir[f.bv] / ma;

    const double x = (0.5 * u + 0.5) * res_ - 0.5;
    const double y = (0.5 * v + 0.5) * res_ - 0.5;
    const double x0 = std::floor(x), y0 = std::floor(y);
    const double fx = x - x0, fy = y - y0;
    out.ix[0] = std::clamp(static_cast<int>(x0), 0, res_ - 1);
    out.ix[1] = std::clamp(static_cast<int>(x0) + 1, 0, res_ - 1);
    out.iy[0] = std::clamp(static_cast<int>(y0), 0, res_ - 1);
    out.iy[1] = std::clamp(static_cast<int>(y0) + 1, 0, res_ - 1);
    out.weight[0] = (1 - fx) * (1 - fy);
    out.weight[1] = fx * (1 - fy);
    out.weight[2] = (1 - fx) * fy;
    out.weight[3] = fx * fy;

    const Rgb t00 = texel(out.face, out.ix[0], out.iy[0]);
    const Rgb t10 = texel(out.face, out.ix[1], out.iy[0]);
    const Rgb t01 = texel(out.face, out.ix[0], out.iy[1]);
    const Rgb t11 = texel(out.face, out.ix[1], out.iy[1]);
    out.value = out.weight[0] * t00 + out.weight[1] * t10 +
                out.weight[2] * t01 + out.weight[3] * t11;

    // d value / d (fx, fy), then back through the face mapping.
    const Rgb dfx = (1 - fy) * (t10 - t00) + fy * (t11 - t01);
    const Rgb dfy = (1 - fx) * (t01 - t00) + fx * (t11 - t10);
    const double half_res = 0.5 * res_;

    Vec3 du_ddir = Vec3::Zero();
    du_ddir[f.bu] = f.su / ma;
    du_ddir[f.ax] = -f.su * dir[f.bu] * f.sa / (ma * ma);
    Vec3 dv_ddir = Vec3::Zero();
    dv_ddir[f.bv] = f.sv / ma;
    dv_ddir[f.ax] = -f.sv * dir[f.bv] * f.sa / (ma * ma);

    for (int c = 0; c < 3; ++c)
        out.dval_ddir.row(c) =
            (dfx[c] * half_res * du_ddir + dfy[c] * half_res * dv_ddir).transpose();
    return out;
}

Rgb Cubemap::sample(const Vec3& dir) const {
    return sample_grad(dir).value;
}

void Cubemap::accumulate_raw_grad(const Sample& s, const Rgb& gvalue,
                                  std::vector<double>& raw_grad) const {
    const int xs[4] = {s.ix[0], s.ix[1], s.ix[0], s.ix[1]};
    const int ys[4] = {s.iy[0], s.iy[0], s.iy[1], s.iy[1]};
    for (int k = 0; k < 4; ++k) {
        for (int c = 0; c < 3; ++c) {
            size_t id = index(s.face, xs[k], ys[k], c);
            raw_grad[id] += s.weight[k] * sigmoid(raw_[id]) * gvalue[c];
        }
    }
}

} // namespace polgs
