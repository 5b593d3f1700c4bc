#pragma once

#include <string>

#include "polgs/types.hpp"

namespace polgs {

// Pinhole camera with a rigid world-to-camera pose. Camera space is x right,
// y down, z forward; depth is the camera-space z coordinate.
struct Camera {
    std::string name;
    int width = 0;
    int height = 0;
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    Mat3 rotation = Mat3::Identity();   // world -> camera
    Vec3 translation = Vec3::Zero();

    Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
    Vec3 to_world(const Vec3& cam) const { return rotation.transpose() * (cam - translation); }
    Vec3 position() const { return -rotation.transpose() * translation; }

    Vec2 project(const Vec3& cam) const {
        return Vec2(fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy);
    }

    // Unnormalized camera-space ray through a pixel center; z component is 1,
    // so depth d maps the pixel to the camera-space point d * ray.
    Vec3 ray(double px, double py) const {
        return Vec3((px - cx) / fx, (py - cy) / fy, 1.0);
    }

    Vec3 unproject(double px, double py, double depth) const {
        return depth * ray(px, py);
    }

    // Frobenius residual of R^T R - I; loaders reject poses above tolerance.
    double orthonormal_residual() const;
    // Projects rotation onto SO(3) (closest orthonormal matrix, det +1).
    void orthonormalize();
};

// Cameras on a ring around `center` looking inward, used by the synthetic
// dataset generator.
Camera look_at_camera(const Vec3& eye, const Vec3& center, const Vec3& up,
                      int width, int height, double focal);

} // namespace polgs
