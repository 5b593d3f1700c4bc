#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cstdio>
#include <filesystem>

#include "polgs/camera.hpp"
#include "polgs/cubemap.hpp"
#include "polgs/errors.hpp"
#include "polgs/rng.hpp"
#include "polgs/scene.hpp"
#include "polgs/surfel.hpp"

using namespace polgs;

namespace {

Vec4 random_unit_quat(Rand64& rng) {
    Vec4 q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
    return q / q.norm();
}

} // namespace

TEST_CASE("covariance of an axis-aligned surfel is diagonal") {
    GaussianSurfel s;
    s.log_scale = Vec2(0.0, 0.0); // scales (1,1)
    Mat3 cov = covariance_3d(s);
    CHECK((cov - Eigen::DiagonalMatrix<double, 3>(1, 1, 0).toDenseMatrix())
              .norm() == doctest::Approx(0.0).epsilon(1e-15));

    s.log_scale = Vec2(std::log(2.0), std::log(3.0));
    cov = covariance_3d(s);
    CHECK(cov(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(cov(1, 1) == doctest::Approx(9.0).epsilon(1e-14));
    CHECK(cov(2, 2) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(cov(0, 1) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("rotated covariance keeps eigenvalues and drops rank") {
    Rand64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        GaussianSurfel s;
        s.rotation = random_unit_quat(rng);
        s.log_scale = Vec2(0.0, std::log(2.0)); // scales (1,2)
        const Mat3 cov = covariance_3d(s);
        CHECK((cov - cov.transpose()).norm() < 1e-12);

        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        const Vec3 ev = es.eigenvalues();
        CHECK(std::abs(ev[0]) < 1e-12);
        CHECK(ev[1] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(ev[2] == doctest::Approx(4.0).epsilon(1e-10));

        // The null direction is the rotation's third column.
        const Vec3 n = quat_to_rot(s.rotation).col(2);
        CHECK((cov * n).norm() < 1e-12);
    }
}

TEST_CASE("covariance of random surfels always has a zero eigenvalue") {
    Rand64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        GaussianSurfel s;
        s.rotation = random_unit_quat(rng);
        s.log_scale = Vec2(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        Eigen::SelfAdjointEigenSolver<Mat3> es(covariance_3d(s));
        CHECK(std::abs(es.eigenvalues()[0]) < 1e-10);
    }
}

TEST_CASE("surfel normal is the third rotation column, faced to the camera") {
    GaussianSurfel s; // identity rotation
    CHECK((surfel_normal(s, Vec3(0, 0, 1)) - Vec3(0, 0, 1)).norm() < 1e-15);
    // Opposite viewer flips the sign.
    CHECK((surfel_normal(s, Vec3(0, 0, -1)) - Vec3(0, 0, -1)).norm() < 1e-15);

    // Quarter turn about x maps z to y.
    const double c = std::cos(kPi / 4), d = std::sin(kPi / 4);
    s.rotation = Vec4(c, d, 0, 0);
    const Vec3 n = surfel_normal(s, Vec3(0, 1, 0));
    CHECK((n - Vec3(0, 1, 0)).norm() < 1e-12);

    Rand64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        s.rotation = random_unit_quat(rng);
        const Vec3 view(rng.gaussian(), rng.gaussian(), rng.gaussian());
        const Vec3 got = surfel_normal(s, view.normalized());
        const Vec3 col2 = quat_to_rot(s.rotation).col(2);
        CHECK(std::abs(std::abs(got.dot(col2)) - 1.0) < 1e-12);
        CHECK(got.dot(view.normalized()) >= -1e-12);
        // Normal ignores the scales entirely.
        s.log_scale = Vec2(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        CHECK((surfel_normal(s, view.normalized()) - got).norm() == 0.0);
    }
}

TEST_CASE("quaternion rotation is scale invariant and orthonormal") {
    Rand64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec4 q = random_unit_quat(rng);
        const Mat3 R = quat_to_rot(q);
        CHECK((R * R.transpose() - Mat3::Identity()).norm() < 1e-12);
        CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((quat_to_rot(2.5 * q) - R).norm() < 1e-12);
    }
}

TEST_CASE("quaternion rotation jacobian matches finite differences") {
    Rand64 rng(13);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        Vec4 q = 1.3 * random_unit_quat(rng); // deliberately unnormalized
        const auto jac = quat_to_rot_jacobian(q);
        for (int k = 0; k < 4; ++k) {
            Vec4 qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            const Mat3 fd = (quat_to_rot(qp) - quat_to_rot(qm)) / (2 * h);
            CHECK((jac[k] - fd).norm() < 1e-7);
        }
    }
}

TEST_CASE("rotation gradient pullback to the raw quaternion") {
    Rand64 rng(17);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        const Vec4 q = 0.8 * random_unit_quat(rng);
        Mat3 A;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                A(r, c) = rng.gaussian();
        auto f = [&](const Vec4& qq) {
            return (A.array() * quat_to_rot(qq).array()).sum();
        };
        const Vec4 g = rot_grad_to_quat(q, A);
        for (int k = 0; k < 4; ++k) {
            Vec4 qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            CHECK(g[k] == doctest::Approx((f(qp) - f(qm)) / (2 * h))
                              .epsilon(1e-5));
        }
    }
}

TEST_CASE("constant cubemap samples to its constant") {
    Cubemap cm(8, 0.75);
    Rand64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        Vec3 d(rng.gaussian(), rng.gaussian(), rng.gaussian());
        if (d.squaredNorm() < 1e-9)
            continue;
        const Rgb v = cm.sample(d.normalized());
        for (int c = 0; c < 3; ++c)
            CHECK(v[c] == doctest::Approx(0.75).epsilon(1e-12));
    }
}

TEST_CASE("cubemap bilinear weights sum to one") {
    Cubemap cm(16, 0.5);
    Rand64 rng(9);
    for (int trial = 0; trial < 1000; ++trial) {
        Vec3 d(rng.gaussian(), rng.gaussian(), rng.gaussian());
        if (d.squaredNorm() < 1e-9)
            continue;
        const auto s = cm.sample_grad(d.normalized());
        const double wsum =
            s.weight[0] + s.weight[1] + s.weight[2] + s.weight[3];
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("sampling at a texel center returns that texel") {
    Cubemap cm(4, 0.2);
    cm.set_texel_radiance(4, 1, 2, Rgb(1.5, 0.25, 0.9)); // +Z face
    // Face +Z: u = x/|z|, v = -y/|z|; texel centers at u = (2(i+0.5)/F - 1).
    const int F = 4;
    const double u = 2.0 * (1 + 0.5) / F - 1.0;
    const double v = 2.0 * (2 + 0.5) / F - 1.0;
    const Vec3 dir = Vec3(u, -v, 1.0).normalized();
    const Rgb got = cm.sample(dir);
    CHECK(got[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(got[1] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(got[2] == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("cubemap rejects a zero direction") {
    Cubemap cm(4, 0.5);
    CHECK_THROWS_AS(cm.sample(Vec3::Zero()), std::invalid_argument);
}

TEST_CASE("cubemap texel gradients match finite differences") {
    Cubemap cm(8, 0.5);
    Rand64 rng(21);
    // Roughen the texture so gradients are non-trivial.
    for (int f = 0; f < 6; ++f)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                cm.set_texel_radiance(
                    f, x, y,
                    Rgb(rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0),
                        rng.uniform(0.1, 2.0)));

    const double h = 1e-5;
    for (int trial = 0; trial < 25; ++trial) {
        Vec3 d(rng.gaussian(), rng.gaussian(), rng.gaussian());
        if (d.squaredNorm() < 1e-9)
            continue;
        d.normalize();
        const auto s = cm.sample_grad(d);

        // d(sum of channels)/d(raw texels) against central differences.
        std::vector<double> grad(cm.raw().size(), 0.0);
        cm.accumulate_raw_grad(s, Rgb(1, 1, 1), grad);
        Cubemap probe = cm;
        int checked = 0;
        for (size_t k = 0; k < grad.size() && checked < 12; ++k) {
            if (grad[k] == 0.0)
                continue;
            ++checked;
            const double saved = probe.raw()[k];
            probe.raw()[k] = saved + h;
            const double up = probe.sample(d).sum();
            probe.raw()[k] = saved - h;
            const double dn = probe.sample(d).sum();
            probe.raw()[k] = saved;
            const double fd = (up - dn) / (2 * h);
            CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-5));
        }
        CHECK(checked > 0);
    }
}

TEST_CASE("surfel cloud invariant projection") {
    SurfelCloud c;
    GaussianSurfel s;
    s.rotation = Vec4(2, 0, 0, 0); // unnormalized
    s.color = Rgb(-0.5, 0.2, 1.5);
    c.push_back(s);
    CHECK(c.finite());
    c.project_invariants();
    CHECK(c.rotation[0].norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.color[0][0] >= 0.0);

    c.position[0][1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(c.finite());
}

TEST_CASE("checkpoint round trip is bit exact") {
    Rand64 rng(33);
    Scene scene(4);
    for (int i = 0; i < 17; ++i) {
        GaussianSurfel s;
        s.position = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
        s.log_scale = Vec2(rng.gaussian(), rng.gaussian());
        s.rotation = random_unit_quat(rng);
        s.opacity_logit = rng.gaussian();
        s.color = Rgb(rng.uniform(), rng.uniform(), rng.uniform());
        scene.cloud.push_back(s);
    }
    for (double& r : scene.environment.raw())
        r = rng.gaussian();
    scene.iteration = 4321;

    const std::string path =
        (std::filesystem::temp_directory_path() / "polgs_ckpt_test.bin")
            .string();
    save_checkpoint(scene, path);
    const Scene back = load_checkpoint(path);

    REQUIRE(back.cloud.size() == scene.cloud.size());
    CHECK(back.iteration == scene.iteration);
    for (size_t i = 0; i < scene.cloud.size(); ++i) {
        CHECK(back.cloud.position[i] == scene.cloud.position[i]);
        CHECK(back.cloud.log_scale[i] == scene.cloud.log_scale[i]);
        CHECK(back.cloud.rotation[i] == scene.cloud.rotation[i]);
        CHECK(back.cloud.opacity_logit[i] == scene.cloud.opacity_logit[i]);
        CHECK(back.cloud.color[i] == scene.cloud.color[i]);
    }
    REQUIRE(back.environment.resolution() == 4);
    CHECK(back.environment.raw() == scene.environment.raw());
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects garbage") {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string bad = (dir / "polgs_bad_ckpt.bin").string();
    {
        std::FILE* f = std::fopen(bad.c_str(), "wb");
        REQUIRE(f);
        std::fwrite("NOTACKPT", 1, 8, f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(bad), DataError);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing_ckpt.bin").string()),
                    DataError);
    std::filesystem::remove(bad);
}

TEST_CASE("camera projection and pose sanity") {
    const Camera cam =
        look_at_camera(Vec3(2, -3, 1), Vec3::Zero(), Vec3(0, 0, 1), 64, 48,
                       80.0);
    CHECK(cam.orthonormal_residual() < 1e-12);

    // The target sits on the optical axis, in front of the camera.
    const Vec3 cc = cam.to_camera(Vec3::Zero());
    CHECK(std::abs(cc.x()) < 1e-12);
    CHECK(std::abs(cc.y()) < 1e-12);
    CHECK(cc.z() > 0.0);
    const Vec2 px = cam.project(cc);
    CHECK(px.x() == doctest::Approx(cam.cx).epsilon(1e-12));
    CHECK(px.y() == doctest::Approx(cam.cy).epsilon(1e-12));

    // Unproject inverts project at the recorded depth.
    Rand64 rng(55);
    for (int i = 0; i < 20; ++i) {
        const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1),
                     rng.uniform(2, 5));
        const Vec2 q = cam.project(p);
        CHECK((cam.unproject(q.x(), q.y(), p.z()) - p).norm() < 1e-10);
    }

    Camera noisy = cam;
    noisy.rotation(0, 1) += 1e-3;
    CHECK(noisy.orthonormal_residual() > 1e-4);
    noisy.orthonormalize();
    CHECK(noisy.orthonormal_residual() < 1e-12);
    CHECK(noisy.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}
