#include "polgs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "polgs/errors.hpp"
#include "polgs/io/ply.hpp"
#include "polgs/kdtree.hpp"
#include "polgs/rng.hpp"

namespace polgs {
namespace {

using nlohmann::json;

void scale_image(Image& im, double s) {
    double* d = im.data();
    for (size_t i = 0; i < im.size(); ++i)
        d[i] *= s;
}

// Unit quaternion whose rotation maps +z onto n (n unit length).
Vec4 quat_align_z(const Vec3& n) {
    const double w = 1.0 + n.z();
    if (w < 1e-12)
        return Vec4(0, 1, 0, 0); // opposite pole: half-turn about x
    Vec4 q(w, -n.y(), n.x(), 0.0);
    return q / q.norm();
}

Vec4 random_quat(Rand64& rng) {
    Vec4 q(rng.gaussian(), rng.gaussian(), rng.gaussian(), rng.gaussian());
    const double n = q.norm();
    return n > 1e-12 ? Vec4(q / n) : Vec4(1, 0, 0, 0);
}

// Mean spacing to the three closest neighbors, the initial splat size.
void assign_scales_from_spacing(SurfelCloud& c) {
    const size_t n = c.size();
    Vec3 lo = c.position[0], hi = c.position[0];
    for (const Vec3& p : c.position) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double fallback = std::max((hi - lo).norm() * 0.05, 1e-3);
    if (n < 4) {
        for (size_t i = 0; i < n; ++i)
            c.log_scale[i] = Vec2::Constant(std::log(fallback));
        return;
    }
    KdTree tree(c.position);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < long(n); ++i) {
        const auto nb = tree.knn(c.position[i], 4); // [0] is the point itself
        double s = 0.0;
        for (size_t k = 1; k < nb.size(); ++k)
            s += nb[k].second;
        s /= double(nb.size() - 1);
        c.log_scale[i] =
            Vec2::Constant(std::log(std::clamp(s, 1e-4, 1e6)));
    }
}

void get_key(const json& v, const char* key, long& out) { out = v.get<long>(); (void)key; }
void get_key(const json& v, const char* key, double& out) { out = v.get<double>(); (void)key; }
void get_key(const json& v, const char* key, int& out) { out = v.get<int>(); (void)key; }
void get_key(const json& v, const char* key, bool& out) { out = v.get<bool>(); (void)key; }
void get_key(const json& v, const char* key, uint64_t& out) { out = v.get<uint64_t>(); (void)key; }
void get_key(const json& v, const char* key, std::string& out) { out = v.get<std::string>(); (void)key; }

} // namespace

void TrainConfig::validate() const {
    if (iterations <= 0)
        throw DataError("config: iterations must be positive");
    if (warmup_iterations < 0 || warmup_iterations >= iterations)
        throw DataError("config: warmup_iterations must lie in [0, iterations)");
    const double lrs[] = {lr_position, lr_color, lr_opacity,
                          lr_scale,    lr_rotation, lr_cubemap};
    for (double lr : lrs)
        if (!(lr > 0.0))
            throw DataError("config: learning rates must be positive");
    if (densify_interval <= 0)
        throw DataError("config: densify_interval must be positive");
    if (densify_grad_threshold < 0.0 || densify_scale_fraction < 0.0 ||
        prune_opacity < 0.0)
        throw DataError("config: densify/prune thresholds must be non-negative");
    if (!(eta > 1.0))
        throw DataError("config: eta must exceed 1");
    if (cubemap_resolution < 1)
        throw DataError("config: cubemap_resolution must be at least 1");
    if (init_points <= 0)
        throw DataError("config: init_points must be positive");
    if (weights.lambda1 < 0 || weights.lambda2 < 0 || weights.lambda3 < 0 ||
        weights.lambda4_base < 0 || weights.lambda4_gain < 0)
        throw DataError("config: loss weights must be non-negative");
    if (weights.lambda4_horizon <= 0)
        throw DataError("config: lambda4_horizon must be positive");
    if (checkpoint_interval < 0)
        throw DataError("config: checkpoint_interval must be non-negative");
}

TrainConfig TrainConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw DataError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object())
        throw DataError("config root must be a JSON object");

    TrainConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "iterations") get_key(value, key.c_str(), c.iterations);
            else if (key == "warmup_iterations") get_key(value, key.c_str(), c.warmup_iterations);
            else if (key == "lr_position") get_key(value, key.c_str(), c.lr_position);
            else if (key == "lr_color") get_key(value, key.c_str(), c.lr_color);
            else if (key == "lr_opacity") get_key(value, key.c_str(), c.lr_opacity);
            else if (key == "lr_scale") get_key(value, key.c_str(), c.lr_scale);
            else if (key == "lr_rotation") get_key(value, key.c_str(), c.lr_rotation);
            else if (key == "lr_cubemap") get_key(value, key.c_str(), c.lr_cubemap);
            else if (key == "densify_interval") get_key(value, key.c_str(), c.densify_interval);
            else if (key == "densify_start") get_key(value, key.c_str(), c.densify_start);
            else if (key == "densify_end") get_key(value, key.c_str(), c.densify_end);
            else if (key == "densify_grad_threshold") get_key(value, key.c_str(), c.densify_grad_threshold);
            else if (key == "densify_scale_fraction") get_key(value, key.c_str(), c.densify_scale_fraction);
            else if (key == "prune_opacity") get_key(value, key.c_str(), c.prune_opacity);
            else if (key == "seed") get_key(value, key.c_str(), c.seed);
            else if (key == "eta") get_key(value, key.c_str(), c.eta);
            else if (key == "cubemap_resolution") get_key(value, key.c_str(), c.cubemap_resolution);
            else if (key == "enable_polarization") get_key(value, key.c_str(), c.enable_polarization);
            else if (key == "init_points") get_key(value, key.c_str(), c.init_points);
            else if (key == "init_ply") get_key(value, key.c_str(), c.init_ply);
            else if (key == "checkpoint_interval") get_key(value, key.c_str(), c.checkpoint_interval);
            else if (key == "lambda1") get_key(value, key.c_str(), c.weights.lambda1);
            else if (key == "lambda2") get_key(value, key.c_str(), c.weights.lambda2);
            else if (key == "lambda3") get_key(value, key.c_str(), c.weights.lambda3);
            else if (key == "lambda4_base") get_key(value, key.c_str(), c.weights.lambda4_base);
            else if (key == "lambda4_gain") get_key(value, key.c_str(), c.weights.lambda4_gain);
            else if (key == "lambda4_horizon") get_key(value, key.c_str(), c.weights.lambda4_horizon);
            else throw DataError("unknown config key: " + key);
        }
    } catch (const DataError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError(std::string("config value error: ") + e.what());
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string TrainConfig::to_json_text() const {
    json j;
    j["iterations"] = iterations;
    j["warmup_iterations"] = warmup_iterations;
    j["lr_position"] = lr_position;
    j["lr_color"] = lr_color;
    j["lr_opacity"] = lr_opacity;
    j["lr_scale"] = lr_scale;
    j["lr_rotation"] = lr_rotation;
    j["lr_cubemap"] = lr_cubemap;
    j["densify_interval"] = densify_interval;
    j["densify_start"] = densify_start;
    j["densify_end"] = densify_end;
    j["densify_grad_threshold"] = densify_grad_threshold;
    j["densify_scale_fraction"] = densify_scale_fraction;
    j["prune_opacity"] = prune_opacity;
    j["seed"] = seed;
    j["eta"] = eta;
    j["cubemap_resolution"] = cubemap_resolution;
    j["enable_polarization"] = enable_polarization;
    j["init_points"] = init_points;
    j["init_ply"] = init_ply;
    j["checkpoint_interval"] = checkpoint_interval;
    j["lambda1"] = weights.lambda1;
    j["lambda2"] = weights.lambda2;
    j["lambda3"] = weights.lambda3;
    j["lambda4_base"] = weights.lambda4_base;
    j["lambda4_gain"] = weights.lambda4_gain;
    j["lambda4_horizon"] = weights.lambda4_horizon;
    return j.dump(2) + "\n";
}

void densify_and_prune(Scene& scene, DensifyStats& stats,
                       const TrainConfig& config,
                       std::array<OptimizerState, kSurfelGroupCount>* opt) {
    SurfelCloud& c = scene.cloud;
    const size_t n = c.size();
    if (n == 0)
        return;
    if (stats.grad_norm_sum.size() != n)
        stats.resize(n);

    Vec3 lo = c.position[0], hi = c.position[0];
    for (const Vec3& p : c.position) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double split_above = config.densify_scale_fraction * (hi - lo).norm();

    enum class Act : uint8_t { Keep, Clone, Split, Prune };
    std::vector<Act> act(n, Act::Keep);
    size_t survivors = 0;
    for (size_t i = 0; i < n; ++i) {
        if (sigmoid(c.opacity_logit[i]) < config.prune_opacity) {
            act[i] = Act::Prune;
            continue;
        }
        ++survivors;
        if (stats.visible_count[i] > 0 &&
            stats.grad_norm_sum[i] / stats.visible_count[i] >
                config.densify_grad_threshold) {
            const double smax = std::exp(c.log_scale[i].maxCoeff());
            act[i] = smax > split_above ? Act::Split : Act::Clone;
        }
    }
    if (survivors == 0) {
        std::fprintf(stderr,
                     "warning: pruning would empty the cloud; skipped\n");
        for (Act& a : act)
            a = Act::Keep;
    }

    const int width[kSurfelGroupCount] = {3, 2, 4, 1, 3};
    if (opt)
        for (int g = 0; g < kSurfelGroupCount; ++g)
            (*opt)[g].ensure(n * size_t(width[g]));

    SurfelCloud out;
    out.reserve(n + n / 4);
    std::vector<long> src; // old index whose moments follow, -1 for fresh
    src.reserve(n + n / 4);
    auto emit = [&](const GaussianSurfel& s, long from) {
        out.push_back(s);
        src.push_back(from);
    };

    for (size_t i = 0; i < n; ++i)
        if (act[i] == Act::Keep || act[i] == Act::Clone)
            emit(c.get(i), long(i));
    for (size_t i = 0; i < n; ++i) {
        if (act[i] == Act::Clone) {
            emit(c.get(i), -1);
        } else if (act[i] == Act::Split) {
            GaussianSurfel s = c.get(i);
            const Mat3 R = quat_to_rot(s.rotation);
            const int major = s.log_scale.x() >= s.log_scale.y() ? 0 : 1;
            const Vec3 axis = R.col(major);
            const double off = 0.6 * std::exp(s.log_scale[major]);
            GaussianSurfel child = s;
            child.log_scale = s.log_scale.array() - std::log(1.6);
            child.position = s.position + off * axis;
            emit(child, -1);
            child.position = s.position - off * axis;
            emit(child, -1);
        }
    }

    if (opt) {
        for (int g = 0; g < kSurfelGroupCount; ++g) {
            OptimizerState& st = (*opt)[g];
            const size_t w = size_t(width[g]);
            std::vector<double> m(src.size() * w, 0.0), v(src.size() * w, 0.0);
            for (size_t j = 0; j < src.size(); ++j) {
                if (src[j] < 0)
                    continue;
                for (size_t k = 0; k < w; ++k) {
                    m[j * w + k] = st.m[size_t(src[j]) * w + k];
                    v[j * w + k] = st.v[size_t(src[j]) * w + k];
                }
            }
            st.m = std::move(m);
            st.v = std::move(v);
        }
    }
    c = std::move(out);
    stats.resize(c.size());
}

Scene init_scene(const std::vector<PolarizedView>& views,
                 const TrainConfig& config) {
    config.validate();
    if (views.empty())
        throw DataError("scene initialization needs at least one view");

    Scene scene(config.cubemap_resolution);
    SurfelCloud& c = scene.cloud;

    if (!config.init_ply.empty()) {
        const std::vector<PlyPoint> pts = read_ply(config.init_ply);
        if (pts.empty())
            throw DataError("seed point cloud is empty: " + config.init_ply);
        uint64_t s = config.seed ^ 0x8f1bbcdcbfa53e0bULL;
        Rand64 rng(splitmix64(s));
        c.reserve(pts.size());
        for (const PlyPoint& p : pts) {
            GaussianSurfel g;
            g.position = p.position;
            g.color = p.color.cwiseMax(0.0);
            g.opacity_logit = logit(std::clamp(p.opacity, 0.01, 0.99));
            g.rotation = p.normal.squaredNorm() > 1e-12
                             ? quat_align_z(p.normal.normalized())
                             : random_quat(rng);
            c.push_back(g);
        }
    } else {
        // Least-squares intersection of the optical axes gives the target
        // center; samples survive only if every view's mask covers them.
        Mat3 A = Mat3::Zero();
        Vec3 b = Vec3::Zero();
        Vec3 centroid = Vec3::Zero();
        for (const PolarizedView& v : views) {
            const Vec3 o = v.camera.position();
            const Vec3 d = v.camera.rotation.row(2).transpose();
            const Mat3 P = Mat3::Identity() - d * d.transpose();
            A += P;
            b += P * o;
            centroid += o;
        }
        centroid /= double(views.size());
        Vec3 center = A.ldlt().solve(b);
        if (!center.allFinite() || (A * center - b).norm() > 1e-6 * (1.0 + b.norm())) {
            Vec3 d_avg = Vec3::Zero();
            for (const PolarizedView& v : views)
                d_avg += v.camera.rotation.row(2).transpose();
            if (d_avg.squaredNorm() < 1e-12)
                d_avg = Vec3::UnitZ();
            center = centroid + d_avg.normalized();
        }
        double mean_dist = 0.0;
        for (const PolarizedView& v : views)
            mean_dist += (v.camera.position() - center).norm();
        mean_dist /= double(views.size());
        const double half = 0.45 * std::max(mean_dist, 1e-6);

        uint64_t s = config.seed ^ 0x51b5c19ca6ef32cdULL;
        Rand64 rng(splitmix64(s));
        const long cap = 512L * config.init_points;
        for (long a = 0; a < cap && long(c.size()) < config.init_points; ++a) {
            const Vec3 p = center + Vec3(rng.uniform(-half, half),
                                         rng.uniform(-half, half),
                                         rng.uniform(-half, half));
            bool inside = true;
            for (const PolarizedView& v : views) {
                const Vec3 pc = v.camera.to_camera(p);
                if (pc.z() < 0.01) {
                    inside = false;
                    break;
                }
                const Vec2 px = v.camera.project(pc);
                const int ix = int(std::lround(px.x()));
                const int iy = int(std::lround(px.y()));
                if (ix < 0 || iy < 0 || ix >= v.camera.width ||
                    iy >= v.camera.height || v.mask.at(ix, iy) < 0.5) {
                    inside = false;
                    break;
                }
            }
            if (!inside)
                continue;
            GaussianSurfel g;
            g.position = p;
            g.color = Rgb(0.5, 0.5, 0.5);
            g.opacity_logit = logit(0.1);
            g.rotation = random_quat(rng);
            c.push_back(g);
        }
        if (c.empty()) {
            std::fprintf(stderr, "warning: visual hull carving kept no "
                                 "samples; seeding a central ball instead\n");
            for (int i = 0; i < config.init_points; ++i) {
                Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
                if (dir.squaredNorm() < 1e-12)
                    dir = Vec3::UnitZ();
                GaussianSurfel g;
                g.position = center + 0.25 * half *
                                          std::cbrt(rng.uniform()) *
                                          dir.normalized();
                g.color = Rgb(0.5, 0.5, 0.5);
                g.opacity_logit = logit(0.1);
                g.rotation = random_quat(rng);
                c.push_back(g);
            }
        } else if (long(c.size()) < config.init_points) {
            std::fprintf(stderr,
                         "warning: visual hull kept %zu of %d requested "
                         "samples\n",
                         c.size(), config.init_points);
        }
    }

    assign_scales_from_spacing(c);
    return scene;
}

Trainer::Trainer(Scene scene, std::vector<PolarizedView> views,
                 TrainConfig config)
    : scene_(std::move(scene)), views_(std::move(views)),
      config_(std::move(config)) {
    config_.validate();
    if (views_.empty())
        throw DataError("trainer needs at least one view");
    if (scene_.cloud.empty())
        throw DataError("trainer needs a non-empty surfel cloud");
    if (scene_.environment.resolution() <= 0)
        scene_.environment = Cubemap(config_.cubemap_resolution);
    scene_.cloud.stats.resize(scene_.cloud.size());
}

const PolarizedView& Trainer::scheduled_view() {
    const long count = long(views_.size());
    const long epoch = scene_.iteration / count;
    if (epoch != schedule_epoch_) {
        view_order_.resize(count);
        for (long i = 0; i < count; ++i)
            view_order_[i] = int(i);
        uint64_t s =
            config_.seed + 0x517cc1b727220a95ULL * uint64_t(epoch + 1);
        Rand64 rng(splitmix64(s));
        for (long i = count - 1; i > 0; --i)
            std::swap(view_order_[i], view_order_[rng.below(uint64_t(i) + 1)]);
        schedule_epoch_ = epoch;
    }
    return views_[view_order_[scene_.iteration % count]];
}

LossReport Trainer::step_on_view(const PolarizedView& view) {
    const long iter = scene_.iteration;
    const bool full = config_.enable_polarization &&
                      iter >= config_.warmup_iterations;
    const RenderMode mode = full ? RenderMode::Full : RenderMode::Diffuse;

    const RenderOutputs out =
        render_view(scene_, view.camera, mode, config_.eta, true);

    const int w = view.camera.width, h = view.camera.height;
    RenderGrads up;
    up.g_s0 = Image(w, h, 3);
    up.g_alpha = Image(w, h, 1);
    up.g_depth_map = Image(w, h, 1);
    up.g_normal_map = Image(w, h, 3);

    const double l_rgb = loss_rgb(view.stokes.s0, out.stokes.s0, &up.g_s0);
    double l_pol = 0.0;
    if (full) {
        up.g_s1 = Image(w, h, 3);
        up.g_s2 = Image(w, h, 3);
        l_pol = loss_pol(view.stokes.s1, out.stokes.s1, view.stokes.s2,
                         out.stokes.s2, &up.g_s1, &up.g_s2);
        scale_image(up.g_s1, config_.weights.lambda1);
        scale_image(up.g_s2, config_.weights.lambda1);
    }
    const double l_mask = loss_mask(view.mask, out.geo.alpha, &up.g_alpha);
    scale_image(up.g_alpha, config_.weights.lambda2);

    std::vector<double> opacity(scene_.cloud.size());
    for (size_t i = 0; i < opacity.size(); ++i)
        opacity[i] = sigmoid(scene_.cloud.opacity_logit[i]);
    std::vector<double> g_opacity;
    const double l_op = loss_opacity(opacity, &g_opacity);

    const double l_dn =
        loss_depth_normal(out.geo.depth, out.geo.normal, out.geo.alpha,
                          view.camera, &up.g_depth_map, &up.g_normal_map);
    const double l4 = config_.weights.lambda4(iter);
    scale_image(up.g_depth_map, l4);
    scale_image(up.g_normal_map, l4);

    const LossReport report =
        make_report(l_rgb, l_pol, l_mask, l_op, l_dn, config_.weights, iter);
    if (!std::isfinite(report.total))
        throw NumericError("non-finite total loss at iteration " +
                           std::to_string(iter));

    SceneGrads grads =
        render_backward(scene_, view.camera, out, up, config_.eta);
    for (size_t i = 0; i < opacity.size(); ++i)
        grads.surfels.opacity_logit[i] += config_.weights.lambda3 *
                                          g_opacity[i] * opacity[i] *
                                          (1.0 - opacity[i]);
    check_finite(grads);

    DensifyStats& stats = scene_.cloud.stats;
    if (stats.grad_norm_sum.size() != scene_.cloud.size())
        stats.resize(scene_.cloud.size());
    for (size_t i = 0; i < scene_.cloud.size(); ++i) {
        if (grads.visible[i]) {
            stats.grad_norm_sum[i] += grads.ndc_grad[i];
            stats.visible_count[i] += 1;
        }
    }

    adam_step(grads);
    scene_.cloud.project_invariants();
    return report;
}

LossReport Trainer::step() {
    const LossReport report = step_on_view(scheduled_view());
    scene_.iteration += 1;
    const long now = scene_.iteration;
    if (now >= config_.densify_start && now < config_.densify_end &&
        now % config_.densify_interval == 0)
        densify_and_prune(scene_, scene_.cloud.stats, config_, &opt_);
    return report;
}

void Trainer::run(std::ostream* csv_log, const std::string& out_dir) {
    if (!out_dir.empty())
        std::filesystem::create_directories(out_dir);
    if (csv_log && scene_.iteration == 0)
        *csv_log << loss_csv_header();
    while (scene_.iteration < config_.iterations) {
        const long iter = scene_.iteration;
        const LossReport report = step();
        if (csv_log)
            *csv_log << loss_csv_row(iter, report);
        if (!out_dir.empty() && config_.checkpoint_interval > 0 &&
            scene_.iteration % config_.checkpoint_interval == 0 &&
            scene_.iteration < config_.iterations) {
            char name[64];
            std::snprintf(name, sizeof name, "/checkpoint_%06ld.bin",
                          scene_.iteration);
            save_checkpoint(scene_, out_dir + name);
        }
    }
    if (!out_dir.empty())
        save_checkpoint(scene_, out_dir + "/checkpoint.bin");
}

void Trainer::adam_step(const SceneGrads& g) {
    SurfelCloud& c = scene_.cloud;
    const size_t n = c.size();
    const long iter = scene_.iteration;
    const double lr_pos =
        config_.lr_position *
        std::pow(0.01, double(iter) / double(config_.iterations));

    auto begin = [](OptimizerState& st, size_t len) {
        st.ensure(len);
        st.step += 1;
        return std::pair<double, double>(1.0 - std::pow(0.9, double(st.step)),
                                         1.0 - std::pow(0.999, double(st.step)));
    };
    auto upd = [](OptimizerState& st, size_t k, double c1, double c2,
                  double lr, double grad, double& p) {
        st.m[k] = 0.9 * st.m[k] + 0.1 * grad;
        st.v[k] = 0.999 * st.v[k] + 0.001 * grad * grad;
        p -= lr * (st.m[k] / c1) / (std::sqrt(st.v[k] / c2) + 1e-8);
    };

    {
        OptimizerState& st = opt_[kGroupPosition];
        const auto [c1, c2] = begin(st, n * 3);
        for (size_t i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k)
                upd(st, i * 3 + k, c1, c2, lr_pos, g.surfels.position[i][k],
                    c.position[i][k]);
    }
    {
        OptimizerState& st = opt_[kGroupScale];
        const auto [c1, c2] = begin(st, n * 2);
        for (size_t i = 0; i < n; ++i)
            for (int k = 0; k < 2; ++k)
                upd(st, i * 2 + k, c1, c2, config_.lr_scale,
                    g.surfels.log_scale[i][k], c.log_scale[i][k]);
    }
    {
        OptimizerState& st = opt_[kGroupRotation];
        const auto [c1, c2] = begin(st, n * 4);
        for (size_t i = 0; i < n; ++i)
            for (int k = 0; k < 4; ++k)
                upd(st, i * 4 + k, c1, c2, config_.lr_rotation,
                    g.surfels.rotation[i][k], c.rotation[i][k]);
    }
    {
        OptimizerState& st = opt_[kGroupOpacity];
        const auto [c1, c2] = begin(st, n);
        for (size_t i = 0; i < n; ++i)
            upd(st, i, c1, c2, config_.lr_opacity,
                g.surfels.opacity_logit[i], c.opacity_logit[i]);
    }
    {
        OptimizerState& st = opt_[kGroupColor];
        const auto [c1, c2] = begin(st, n * 3);
        for (size_t i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k)
                upd(st, i * 3 + k, c1, c2, config_.lr_color,
                    g.surfels.color[i][k], c.color[i][k]);
    }
    {
        std::vector<double>& raw = scene_.environment.raw();
        const auto [c1, c2] = begin(opt_env_, raw.size());
        for (size_t k = 0; k < raw.size(); ++k)
            upd(opt_env_, k, c1, c2, config_.lr_cubemap, g.env_raw[k],
                raw[k]);
    }
}

void Trainer::check_finite(const SceneGrads& g) const {
    auto all_finite = [](const double* p, size_t n) {
        for (size_t i = 0; i < n; ++i)
            if (!std::isfinite(p[i]))
                return false;
        return true;
    };
    const char* bad = nullptr;
    for (const Vec3& v : g.surfels.position)
        if (!all_finite(v.data(), 3)) { bad = "position"; break; }
    if (!bad)
        for (const Vec2& v : g.surfels.log_scale)
            if (!all_finite(v.data(), 2)) { bad = "scale"; break; }
    if (!bad)
        for (const Vec4& v : g.surfels.rotation)
            if (!all_finite(v.data(), 4)) { bad = "rotation"; break; }
    if (!bad && !all_finite(g.surfels.opacity_logit.data(),
                            g.surfels.opacity_logit.size()))
        bad = "opacity";
    if (!bad)
        for (const Rgb& v : g.surfels.color)
            if (!all_finite(v.data(), 3)) { bad = "color"; break; }
    if (!bad && !all_finite(g.env_raw.data(), g.env_raw.size()))
        bad = "cubemap";
    if (bad)
        throw NumericError(
            std::string("non-finite gradient in parameter group '") + bad +
            "' at iteration " + std::to_string(scene_.iteration));
}

std::string loss_csv_header() {
    return "iter,total,rgb,pol,mask,opacity,dn,lambda4\n";
}

std::string loss_csv_row(long iter, const LossReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", iter,
                  r.total, r.rgb, r.pol, r.mask, r.opacity, r.depth_normal,
                  r.lambda4);
    return buf;
}

} // namespace polgs
