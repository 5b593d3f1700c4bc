#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polgs/errors.hpp"
#include "polgs/io/ply.hpp"
#include "polgs/renderer.hpp"
#include "polgs/rng.hpp"
#include "polgs/trainer.hpp"

using namespace polgs;
namespace fs = std::filesystem;

namespace {

Camera axis_camera(int w, int h, double f) {
    Camera cam;
    cam.width = w;
    cam.height = h;
    cam.fx = cam.fy = f;
    cam.cx = 0.5 * (w - 1);
    cam.cy = 0.5 * (h - 1);
    return cam;
}

// Tilted surfels so the full render carries real polarization.
Scene tilted_scene(uint64_t seed) {
    Rand64 rng(seed);
    Scene scene(2);
    for (int i = 0; i < 3; ++i) {
        GaussianSurfel s;
        s.position = Vec3(0.12 * (i - 1), 0.07 * (1 - i), 2.2 + 0.25 * i);
        s.log_scale = Vec2(std::log(0.15), std::log(0.11));
        Vec4 q(1.0, 0.3 * rng.gaussian(), 0.3 * rng.gaussian(),
               0.3 * rng.gaussian());
        s.rotation = q / q.norm();
        s.opacity_logit = 1.0;
        s.color = Rgb(rng.uniform(0.3, 0.8), rng.uniform(0.3, 0.8),
                      rng.uniform(0.3, 0.8));
        scene.cloud.push_back(s);
    }
    return scene;
}

// A view whose targets are all zero polarization over a gray s0.
PolarizedView gray_target(const Camera& cam) {
    PolarizedView v;
    v.name = "target";
    v.camera = cam;
    const int W = cam.width, H = cam.height;
    v.stokes.s0 = Image(W, H, 3);
    v.stokes.s0.fill(0.3);
    v.stokes.s1 = Image(W, H, 3);
    v.stokes.s2 = Image(W, H, 3);
    v.i0 = v.i45 = v.i90 = v.i135 = v.stokes.s0;
    v.mask = Image(W, H, 1);
    v.mask.fill(1.0);
    return v;
}

} // namespace

TEST_CASE("config serialization round trips every field") {
    TrainConfig a;
    a.iterations = 777;
    a.warmup_iterations = 55;
    a.lr_position = 3e-4;
    a.lr_cubemap = 2e-2;
    a.densify_interval = 42;
    a.densify_grad_threshold = 1e-3;
    a.prune_opacity = 0.02;
    a.seed = 987654321;
    a.eta = 1.7;
    a.cubemap_resolution = 8;
    a.enable_polarization = false;
    a.init_points = 123;
    a.init_ply = "/some/points.ply";
    a.checkpoint_interval = 100;
    a.weights.lambda1 = 0.5;
    a.weights.lambda4_horizon = 2000;

    const TrainConfig b = TrainConfig::from_json_text(a.to_json_text());
    CHECK(b.iterations == a.iterations);
    CHECK(b.warmup_iterations == a.warmup_iterations);
    CHECK(b.lr_position == a.lr_position);
    CHECK(b.lr_cubemap == a.lr_cubemap);
    CHECK(b.densify_interval == a.densify_interval);
    CHECK(b.densify_grad_threshold == a.densify_grad_threshold);
    CHECK(b.prune_opacity == a.prune_opacity);
    CHECK(b.seed == a.seed);
    CHECK(b.eta == a.eta);
    CHECK(b.cubemap_resolution == a.cubemap_resolution);
    CHECK(b.enable_polarization == a.enable_polarization);
    CHECK(b.init_points == a.init_points);
    CHECK(b.init_ply == a.init_ply);
    CHECK(b.checkpoint_interval == a.checkpoint_interval);
    CHECK(b.weights.lambda1 == a.weights.lambda1);
    CHECK(b.weights.lambda4_horizon == a.weights.lambda4_horizon);
}

TEST_CASE("config parsing rejects junk") {
    CHECK_THROWS_WITH_AS(TrainConfig::from_json_text("{\"warp_drive\": 1}"),
                         "unknown config key: warp_drive", DataError);
    CHECK_THROWS_AS(TrainConfig::from_json_text("{not json"), DataError);
    CHECK_THROWS_AS(TrainConfig::from_json_text("[1,2,3]"), DataError);
    CHECK_THROWS_AS(
        TrainConfig::from_json_text("{\"iterations\": \"many\"}"), DataError);
    // Partial configs inherit defaults (and must stay consistent with them).
    const TrainConfig c =
        TrainConfig::from_json_text("{\"iterations\": 20000}");
    CHECK(c.iterations == 20000);
    CHECK(c.warmup_iterations == 1000);
    // A fragment that contradicts an inherited default is rejected outright.
    CHECK_THROWS_AS(TrainConfig::from_json_text("{\"iterations\": 50}"),
                    DataError);
}

TEST_CASE("config validation catches inconsistent settings") {
    TrainConfig c;
    c.iterations = 0;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = TrainConfig{};
    c.warmup_iterations = c.iterations;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = TrainConfig{};
    c.eta = 1.0;
    CHECK_THROWS_WITH_AS(c.validate(), "config: eta must exceed 1", DataError);
    c = TrainConfig{};
    c.lr_color = 0.0;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = TrainConfig{};
    c.weights.lambda2 = -0.1;
    CHECK_THROWS_AS(c.validate(), DataError);
    TrainConfig ok;
    ok.iterations = 10;
    ok.warmup_iterations = 0;
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("polarization loss is gated off during warm-up") {
    const Camera cam = axis_camera(16, 16, 20.0);
    TrainConfig cfg;
    cfg.iterations = 6;
    cfg.warmup_iterations = 2;
    cfg.seed = 3;

    Trainer tr(tilted_scene(11), {gray_target(cam)}, cfg);
    for (int it = 0; it < 6; ++it) {
        CHECK(tr.iteration() == it);
        const LossReport r = tr.step();
        if (it < 2) {
            CHECK(r.pol == 0.0);
        } else {
            CHECK(r.pol > 0.0);
        }
        CHECK(std::isfinite(r.total));
    }
    CHECK(tr.iteration() == 6);
}

TEST_CASE("disabling polarization keeps the diffuse path past warm-up") {
    const Camera cam = axis_camera(16, 16, 20.0);
    TrainConfig cfg;
    cfg.iterations = 5;
    cfg.warmup_iterations = 1;
    cfg.enable_polarization = false;

    Trainer tr(tilted_scene(12), {gray_target(cam)}, cfg);
    for (int it = 0; it < 5; ++it) {
        const LossReport r = tr.step();
        CHECK(r.pol == 0.0); // never turns on
    }
}

TEST_CASE("a self-consistent scene is a bit-exact fixed point") {
    // One enormous fully opaque surfel: alpha saturates at every pixel, the
    // target is the scene's own render, and every gradient is exactly zero.
    const Camera cam = axis_camera(16, 16, 20.0);
    Scene scene(2);
    {
        GaussianSurfel s;
        s.position = Vec3(0, 0, 2.0);
        s.log_scale = Vec2::Constant(std::log(2000.0));
        s.opacity_logit = 40.0; // sigmoid(40) == 1 in double precision
        s.color = Rgb(0.4, 0.55, 0.25);
        scene.cloud.push_back(s);
    }
    CHECK(sigmoid(40.0) == 1.0);

    const RenderOutputs gt =
        render_view(scene, cam, RenderMode::Full, 1.5, false);
    CHECK(gt.geo.alpha.at(0, 0) >= 1.0 - 1e-6);
    CHECK(gt.geo.alpha.at(8, 8) >= 1.0 - 1e-6);

    PolarizedView view;
    view.name = "self";
    view.camera = cam;
    view.stokes = gt.stokes;
    view.i0 = view.i45 = view.i90 = view.i135 = gt.stokes.s0;
    view.mask = Image(16, 16, 1);
    view.mask.fill(1.0);

    TrainConfig cfg;
    cfg.iterations = 300;
    cfg.warmup_iterations = 0;

    Trainer tr(scene, {view}, cfg);
    const SurfelCloud before = tr.scene().cloud;
    const std::vector<double> env_before = tr.scene().environment.raw();

    double worst = 0.0;
    for (int it = 0; it < 200; ++it)
        worst = std::max(worst, tr.step_on_view(view).total);
    CHECK(worst <= 1e-6);

    const SurfelCloud& after = tr.scene().cloud;
    REQUIRE(after.size() == before.size());
    CHECK(after.position[0] == before.position[0]);
    CHECK(after.log_scale[0] == before.log_scale[0]);
    CHECK(after.rotation[0] == before.rotation[0]);
    CHECK(after.opacity_logit[0] == before.opacity_logit[0]);
    CHECK(after.color[0] == before.color[0]);
    CHECK(tr.scene().environment.raw() == env_before);
}

TEST_CASE("densification follows the per-surfel rules") {
    TrainConfig cfg;
    Scene scene(2);
    // Spread the cloud so the bounding-box diagonal is about 2.
    const double tiny = std::log(0.001), big = std::log(0.1);
    const double logits[4] = {2.0, 2.0, 2.0, -6.0}; // last one is faint
    const double scales[4] = {tiny, tiny, big, tiny};
    for (int i = 0; i < 4; ++i) {
        GaussianSurfel s;
        s.position = Vec3(0.5 * i, 0.25 * i, 1.0 + 0.3 * i);
        s.log_scale = Vec2(scales[i], scales[i] - 0.1);
        s.opacity_logit = logits[i];
        s.color = Rgb(0.1 * i, 0.2, 0.3);
        scene.cloud.push_back(s);
    }

    DensifyStats stats;
    stats.resize(4);
    // Surfel 0 is calm; 1 and 2 exceed the screen-gradient threshold.
    stats.grad_norm_sum[1] = 10 * cfg.densify_grad_threshold;
    stats.visible_count[1] = 1;
    stats.grad_norm_sum[2] = 10 * cfg.densify_grad_threshold;
    stats.visible_count[2] = 1;

    std::array<OptimizerState, kSurfelGroupCount> opt;
    const int width[kSurfelGroupCount] = {3, 2, 4, 1, 3};
    for (int g = 0; g < kSurfelGroupCount; ++g) {
        opt[g].ensure(4 * size_t(width[g]));
        for (size_t k = 0; k < opt[g].m.size(); ++k) {
            opt[g].m[k] = 1000.0 * g + double(k);
            opt[g].v[k] = 2000.0 * g + double(k);
        }
    }

    const GaussianSurfel parent = scene.cloud.get(2);
    densify_and_prune(scene, stats, cfg, &opt);

    // Keep(0) + Clone-original(1) + clone copy + two split children; the
    // faint surfel 3 is pruned.
    REQUIRE(scene.cloud.size() == 5);
    CHECK(scene.cloud.position[0] == Vec3(0, 0, 1.0));
    CHECK(scene.cloud.position[1] == Vec3(0.5, 0.25, 1.3));
    CHECK(scene.cloud.position[2] == Vec3(0.5, 0.25, 1.3)); // exact clone
    CHECK(scene.cloud.log_scale[2] == scene.cloud.log_scale[1]);

    // Split children sit at +-0.6 sigma along the major axis with shrunk
    // scales.
    const Mat3 R = quat_to_rot(parent.rotation);
    const Vec3 axis = R.col(0); // x is the larger log-scale above
    const double off = 0.6 * std::exp(parent.log_scale.x());
    CHECK((scene.cloud.position[3] - (parent.position + off * axis)).norm() <
          1e-12);
    CHECK((scene.cloud.position[4] - (parent.position - off * axis)).norm() <
          1e-12);
    CHECK(scene.cloud.log_scale[3].x() ==
          doctest::Approx(parent.log_scale.x() - std::log(1.6))
              .epsilon(1e-14));
    CHECK(scene.cloud.color[3] == parent.color);

    // Optimizer moments follow survivors and clear for newcomers.
    for (int g = 0; g < kSurfelGroupCount; ++g) {
        const size_t w = size_t(width[g]);
        REQUIRE(opt[g].m.size() == 5 * w);
        for (size_t k = 0; k < w; ++k) {
            CHECK(opt[g].m[0 * w + k] == 1000.0 * g + double(0 * w + k));
            CHECK(opt[g].m[1 * w + k] == 1000.0 * g + double(1 * w + k));
            CHECK(opt[g].m[2 * w + k] == 0.0);
            CHECK(opt[g].m[3 * w + k] == 0.0);
            CHECK(opt[g].v[4 * w + k] == 0.0);
        }
    }
    // Densify statistics reset to the new size.
    CHECK(stats.grad_norm_sum.size() == 5);
    CHECK(stats.grad_norm_sum[1] == 0.0);
}

TEST_CASE("calm surfels pass densification untouched") {
    TrainConfig cfg;
    Scene scene(2);
    for (int i = 0; i < 3; ++i) {
        GaussianSurfel s;
        s.position = Vec3(i, 0, 2);
        s.log_scale = Vec2(-3, -3);
        s.opacity_logit = 1.0;
        scene.cloud.push_back(s);
    }
    DensifyStats stats;
    stats.resize(3);
    densify_and_prune(scene, stats, cfg, nullptr);
    REQUIRE(scene.cloud.size() == 3);
    for (int i = 0; i < 3; ++i)
        CHECK(scene.cloud.position[i] == Vec3(i, 0, 2));
}

TEST_CASE("pruning never empties the cloud") {
    TrainConfig cfg;
    Scene scene(2);
    for (int i = 0; i < 2; ++i) {
        GaussianSurfel s;
        s.position = Vec3(i, 0, 2);
        s.opacity_logit = -8.0; // all faint
        scene.cloud.push_back(s);
    }
    DensifyStats stats;
    stats.resize(2);
    densify_and_prune(scene, stats, cfg, nullptr);
    CHECK(scene.cloud.size() == 2); // skipped with a warning instead
}

TEST_CASE("splat color is the same from every viewpoint") {
    Scene scene(2);
    GaussianSurfel s;
    s.position = Vec3(0, 0, 2.0);
    s.log_scale = Vec2::Constant(std::log(0.5));
    s.opacity_logit = 40.0;
    s.color = Rgb(0.61, 0.33, 0.17);
    scene.cloud.push_back(s);

    const Camera cam_a = axis_camera(16, 16, 20.0);
    const Camera cam_b = look_at_camera(Vec3(0.9, 0.4, 0.3), s.position,
                                        Vec3(0, 1, 0), 16, 16, 20.0);
    for (const Camera& cam : {cam_a, cam_b}) {
        const RenderOutputs out =
            render_view(scene, cam, RenderMode::Diffuse, 1.5, false);
        const int cx = 8, cy = 8;
        REQUIRE(out.geo.alpha.at(cx, cy) > 0.5);
        for (int c = 0; c < 3; ++c) {
            const double normalized =
                out.geo.color.at(cx, cy, c) / out.geo.alpha.at(cx, cy);
            CHECK(normalized == doctest::Approx(s.color[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("non-finite losses surface as numeric errors") {
    const Camera cam = axis_camera(16, 16, 20.0);
    TrainConfig cfg;
    cfg.iterations = 3;
    cfg.warmup_iterations = 0;
    Trainer tr(tilted_scene(21), {gray_target(cam)}, cfg);
    // Poison a rendered quantity: a NaN color reaches the loss directly.
    tr.scene().cloud.color[0][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(tr.step(), "non-finite total loss at iteration 0",
                         NumericError);
}

TEST_CASE("training twice with one seed is bit identical") {
    const Camera cam_a = axis_camera(16, 16, 20.0);
    const Camera cam_b =
        look_at_camera(Vec3(0.5, -0.4, 0.2), Vec3(0, 0, 2.2), Vec3(0, 1, 0),
                       16, 16, 20.0);
    std::vector<PolarizedView> views = {gray_target(cam_a),
                                        gray_target(cam_b)};
    views[1].name = "side";

    TrainConfig cfg;
    cfg.iterations = 6;
    cfg.warmup_iterations = 2;
    cfg.seed = 17;

    std::ostringstream log_a, log_b;
    Trainer ta(tilted_scene(31), views, cfg);
    ta.run(&log_a, "");
    Trainer tb(tilted_scene(31), views, cfg);
    tb.run(&log_b, "");

    CHECK(log_a.str() == log_b.str());
    CHECK(log_a.str().rfind("iter,total,rgb,pol,mask,opacity,dn,lambda4",
                            0) == 0);
    const SurfelCloud& ca = ta.scene().cloud;
    const SurfelCloud& cb = tb.scene().cloud;
    REQUIRE(ca.size() == cb.size());
    for (size_t i = 0; i < ca.size(); ++i) {
        CHECK(ca.position[i] == cb.position[i]);
        CHECK(ca.rotation[i] == cb.rotation[i]);
        CHECK(ca.log_scale[i] == cb.log_scale[i]);
        CHECK(ca.opacity_logit[i] == cb.opacity_logit[i]);
        CHECK(ca.color[i] == cb.color[i]);
    }
    CHECK(ta.scene().environment.raw() == tb.scene().environment.raw());
    // And training moved the scene somewhere new.
    const Scene fresh = tilted_scene(31);
    CHECK((ca.position[0] - fresh.cloud.position[0]).norm() > 0.0);
}

TEST_CASE("scene initialization from a seed point cloud") {
    const fs::path ply = fs::temp_directory_path() / "polgs_seed_points.ply";
    std::vector<PlyPoint> pts;
    Rand64 rng(41);
    for (int i = 0; i < 40; ++i) {
        PlyPoint p;
        p.position = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1),
                          rng.uniform(-1, 1));
        p.normal = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian())
                       .normalized();
        p.color = Rgb(rng.uniform(), rng.uniform(), rng.uniform());
        p.opacity = 0.37;
        pts.push_back(p);
    }
    write_ply(ply.string(), pts);

    TrainConfig cfg;
    cfg.init_ply = ply.string();
    const Camera cam = axis_camera(16, 16, 20.0);
    const Scene scene = init_scene({gray_target(cam)}, cfg);
    REQUIRE(scene.cloud.size() == 40);
    for (size_t i = 0; i < 40; ++i) {
        CHECK((scene.cloud.position[i] - pts[i].position).norm() < 1e-6);
        CHECK(sigmoid(scene.cloud.opacity_logit[i]) ==
              doctest::Approx(0.37).epsilon(1e-6));
        CHECK(std::isfinite(scene.cloud.log_scale[i].x()));
        // The normal became the surfel's flat axis (up to sign).
        const Vec3 n = quat_to_rot(scene.cloud.rotation[i]).col(2);
        CHECK(std::abs(std::abs(n.dot(pts[i].normal)) - 1.0) < 1e-6);
    }
    CHECK(scene.environment.resolution() == cfg.cubemap_resolution);
    fs::remove(ply);
}

TEST_CASE("scene initialization carves a visual hull from the masks") {
    TrainConfig cfg;
    cfg.init_points = 200;
    cfg.seed = 9;

    std::vector<PolarizedView> views;
    for (int k = 0; k < 3; ++k) {
        const double az = 2.0 * kPi * k / 3.0;
        const Vec3 eye(2.5 * std::cos(az), 2.5 * std::sin(az), 0.4);
        PolarizedView v = gray_target(
            look_at_camera(eye, Vec3::Zero(), Vec3(0, 0, 1), 32, 32, 30.0));
        v.name = "v" + std::to_string(k);
        // Foreground disk in the image center.
        v.mask = Image(32, 32, 1);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                v.mask.at(x, y) =
                    (std::hypot(x - 15.5, y - 15.5) < 12.0) ? 1.0 : 0.0;
        const int W = 32, H = 32;
        v.stokes.s0 = Image(W, H, 3);
        v.stokes.s1 = Image(W, H, 3);
        v.stokes.s2 = Image(W, H, 3);
        views.push_back(std::move(v));
    }

    const Scene scene = init_scene(views, cfg);
    REQUIRE(scene.cloud.size() > 0);
    CHECK(scene.cloud.size() <= 200);
    CHECK(scene.cloud.size() >= 100); // most samples land inside the disks
    for (size_t i = 0; i < scene.cloud.size(); ++i) {
        CHECK(scene.cloud.position[i].norm() < 2.0); // near the hull center
        CHECK(scene.cloud.color[i] == Rgb(0.5, 0.5, 0.5));
        CHECK(sigmoid(scene.cloud.opacity_logit[i]) ==
              doctest::Approx(0.1).epsilon(1e-9));
        // Every seeded point projects inside each view's foreground.
        for (const auto& v : views) {
            const Vec3 pc = v.camera.to_camera(scene.cloud.position[i]);
            CHECK(pc.z() > 0.0);
        }
    }
    CHECK_THROWS_AS(init_scene({}, cfg), DataError);
}

TEST_CASE("csv rows preserve full double precision") {
    LossReport r;
    r.total = 1.0 / 3.0;
    r.rgb = 0.1;
    r.lambda4 = 0.11;
    const std::string row = loss_csv_row(12, r);
    CHECK(row.rfind("12,", 0) == 0);
    CHECK(row.find("0.33333333333333331") != std::string::npos);
    CHECK(row.back() == '\n');

    std::istringstream ss(row);
    std::string head;
    std::getline(ss, head, ',');
    CHECK(head == "12");
    std::string tot;
    std::getline(ss, tot, ',');
    CHECK(std::stod(tot) == r.total);
}
