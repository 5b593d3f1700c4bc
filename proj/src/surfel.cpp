#include "polgs/surfel.hpp"

#include <cmath>

namespace polgs {

static Mat3 rot_from_unit_quat(double w, double x, double y, double z) {
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Mat3 quat_to_rot(const Vec4& q) {
    Vec4 u = q / q.norm();
    return rot_from_unit_quat(u[0], u[1], u[2], u[3]);
}

std::array<Mat3, 4> quat_to_rot_jacobian(const Vec4& q) {
    const double n = q.norm();
    Vec4 u = q / n;
    const double w = u[0], x = u[1], y = u[2], z = u[3];

    // dR/du for a unit quaternion u.
    std::array<Mat3, 4> dR_du;
    dR_du[0] << 0, -z, y,
                z, 0, -x,
                -y, x, 0;
    dR_du[1] << 0, y, z,
                y, -2 * x, -w,
                z, w, -2 * x;
    dR_du[2] << -2 * y, x, w,
                x, 0, z,
                -w, z, -2 * y;
    dR_du[3] << -2 * z, -w, x,
                w, -2 * z, y,
                x, y, 0;
    for (auto& m : dR_du) m *= 2.0;

    // du/dq = (I - u u^T) / |q|
    std::array<Mat3, 4> dR_dq;
    for (int k = 0; k < 4; ++k) {
        Mat3 acc = Mat3::Zero();
        for (int j = 0; j < 4; ++j) {
            double du_dq = ((j == k) ? 1.0 : 0.0) - u[j] * u[k];
            acc += dR_du[j] * (du_dq / n);
        }
        dR_dq[k] = acc;
    }
    return dR_dq;
}

Vec4 rot_grad_to_quat(const Vec4& q, const Mat3& grad_rot) {
    auto jac = quat_to_rot_jacobian(q);
    Vec4 g;
    for (int k = 0; k < 4; ++k)
        g[k] = (jac[k].array() * grad_rot.array()).sum();
    return g;
}

Mat3 covariance_3d(const GaussianSurfel& s) {
    Mat3 r = quat_to_rot(s.rotation);
    Vec2 sc = s.scale();
    Vec3 d(sc[0] * sc[0], sc[1] * sc[1], 0.0);
    return r * d.asDiagonal() * r.transpose();
}

Vec3 surfel_normal(const GaussianSurfel& s, const Vec3& view_dir_toward_camera) {
    Vec3 n = quat_to_rot(s.rotation).col(2);
    if (n.dot(view_dir_toward_camera) < 0) n = -n;
    return n;
}

bool SurfelCloud::finite() const {
    for (size_t i = 0; i < size(); ++i) {
        if (!position[i].allFinite() || !log_scale[i].allFinite() ||
            !rotation[i].allFinite() || !std::isfinite(opacity_logit[i]) ||
            !color[i].allFinite())
            return false;
    }
    return true;
}

void SurfelCloud::project_invariants() {
    for (size_t i = 0; i < size(); ++i) {
        rotation[i] /= rotation[i].norm();
        color[i] = color[i].cwiseMax(0.0);
        log_scale[i] = log_scale[i].cwiseMax(-15.0).cwiseMin(15.0);
    }
}

} // namespace polgs
