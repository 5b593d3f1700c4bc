#include "polgs/camera.hpp"

#include <Eigen/SVD>

namespace polgs {

double Camera::orthonormal_residual() const {
    Mat3 e = rotation.transpose() * rotation - Mat3::Identity();
    return e.norm();
}

void Camera::orthonormalize() {
    Eigen::JacobiSVD<Mat3> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    rotation = r;
}

Camera look_at_camera(const Vec3& eye, const Vec3& center, const Vec3& up,
                      int width, int height, double focal) {
    Vec3 fwd = (center - eye).normalized();          // camera z
    Vec3 right = fwd.cross(up).normalized();         // camera x
    Vec3 down = fwd.cross(right).normalized();       // camera y (y points down)

    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = fwd.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

} // namespace polgs
