#pragma once

#include <vector>
#include <array>

#include "polgs/types.hpp"

namespace polgs {

// One flattened Gaussian kernel. Scale has two free axes; the third is fixed
// at zero, so the kernel is an oriented surface element whose normal is the
// third rotation column.
struct GaussianSurfel {
    Vec3 position = Vec3::Zero();
    Vec2 log_scale = Vec2::Zero();      // s = exp(log_scale), always positive
    Vec4 rotation = Vec4(1, 0, 0, 0);   // quaternion (w, x, y, z)
    double opacity_logit = 0.0;         // opacity = sigmoid(logit)
    Rgb color = Rgb::Zero();            // zero-order SH: one view-independent RGB

    Vec2 scale() const { return log_scale.array().exp(); }
    double opacity() const { return sigmoid(opacity_logit); }
};

// Rotation matrix of a (not necessarily normalized) quaternion; the
// quaternion is normalized internally.
Mat3 quat_to_rot(const Vec4& q);

// Partial derivatives of quat_to_rot w.r.t. the four *raw* quaternion
// components, including the normalization term.
std::array<Mat3, 4> quat_to_rot_jacobian(const Vec4& q);

// Pulls a gradient w.r.t. the rotation matrix back to the raw quaternion.
Vec4 rot_grad_to_quat(const Vec4& q, const Mat3& grad_rot);

// R * Diag[sx^2, sy^2, 0] * R^T: symmetric PSD with rank <= 2.
Mat3 covariance_3d(const GaussianSurfel& s);

// Third rotation column, sign-flipped so it faces the camera
// (dot(normal, view_dir_toward_camera) >= 0).
Vec3 surfel_normal(const GaussianSurfel& s, const Vec3& view_dir_toward_camera);

// Accumulated screen-space gradient statistics used by densification.
struct DensifyStats {
    std::vector<double> grad_norm_sum;  // sum of NDC position-gradient norms
    std::vector<int> visible_count;

    void resize(size_t n) {
        grad_norm_sum.assign(n, 0.0);
        visible_count.assign(n, 0);
    }
};

// Structure-of-arrays surfel cloud. Read-only during a render pass; mutated
// only between iterations by a single writer.
struct SurfelCloud {
    std::vector<Vec3> position;
    std::vector<Vec2> log_scale;
    std::vector<Vec4> rotation;
    std::vector<double> opacity_logit;
    std::vector<Rgb> color;
    DensifyStats stats;

    size_t size() const { return position.size(); }
    bool empty() const { return position.empty(); }

    GaussianSurfel get(size_t i) const {
        return GaussianSurfel{position[i], log_scale[i], rotation[i],
                              opacity_logit[i], color[i]};
    }
    void push_back(const GaussianSurfel& s) {
        position.push_back(s.position);
        log_scale.push_back(s.log_scale);
        rotation.push_back(s.rotation);
        opacity_logit.push_back(s.opacity_logit);
        color.push_back(s.color);
    }
    void reserve(size_t n) {
        position.reserve(n);
        log_scale.reserve(n);
        rotation.reserve(n);
        opacity_logit.reserve(n);
        color.reserve(n);
    }
    void resize(size_t n) {
        position.resize(n, Vec3::Zero());
        log_scale.resize(n, Vec2::Zero());
        rotation.resize(n, Vec4(1, 0, 0, 0));
        opacity_logit.resize(n, 0.0);
        color.resize(n, Rgb::Zero());
    }

    // True if every parameter is finite.
    bool finite() const;
    // Renormalizes quaternions and clamps colors to be non-negative; called
    // after every optimizer step.
    void project_invariants();
};

// Per-surfel parameter gradients, mirroring the SurfelCloud layout.
struct SurfelGrads {
    std::vector<Vec3> position;
    std::vector<Vec2> log_scale;
    std::vector<Vec4> rotation;
    std::vector<double> opacity_logit;
    std::vector<Rgb> color;

    void resize(size_t n) {
        position.assign(n, Vec3::Zero());
        log_scale.assign(n, Vec2::Zero());
        rotation.assign(n, Vec4::Zero());
        opacity_logit.assign(n, 0.0);
        color.assign(n, Rgb::Zero());
    }
};

} // namespace polgs
