#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polgs/dataset.hpp"
#include "polgs/errors.hpp"
#include "polgs/io/exr.hpp"
#include "polgs/io/png.hpp"
#include "polgs/io/ply.hpp"
#include "polgs/metrics.hpp"
#include "polgs/oracle.hpp"
#include "polgs/parallel.hpp"
#include "polgs/trainer.hpp"

namespace {

using namespace polgs;

struct CommonFlags {
    int threads = 0;
};

void add_threads_flag(CLI::App* cmd, CommonFlags& common) {
    cmd->add_option("--threads", common.threads,
                    "Worker thread cap (default: all cores)");
}

Scene load_scene_arg(const std::string& checkpoint) {
    if (!std::filesystem::exists(checkpoint))
        throw DataError("checkpoint not found: " + checkpoint);
    return load_checkpoint(checkpoint);
}

std::vector<Vec3> load_gt_points(const std::string& dataset_dir) {
    const std::string path = dataset_dir + "/gt_points.ply";
    if (!std::filesystem::exists(path))
        return {};
    std::vector<Vec3> pts;
    for (const PlyPoint& p : read_ply(path))
        pts.push_back(p.position);
    return pts;
}

int run_synth(const std::string& shape, int views, int res,
              const std::string& out, uint64_t seed, int samples,
              double roughness, double eta, bool checker) {
    SyntheticScene scene;
    if (shape == "sphere")
        scene.kind = SurfaceKind::Sphere;
    else if (shape == "plane")
        scene.kind = SurfaceKind::Plane;
    else if (shape == "superellipsoid")
        scene.kind = SurfaceKind::Superellipsoid;
    else
        throw DataError("unknown shape: " + shape +
                        " (expected sphere|plane|superellipsoid)");
    scene.samples = samples;
    scene.roughness = roughness;
    scene.eta = eta;
    scene.checker = checker;
    make_synthetic_dataset(scene, views, res, seed, out);
    std::fprintf(stderr, "wrote %d views at %dx%d to %s\n", views, res, res,
                 out.c_str());
    return 0;
}

int run_train(const std::string& data, const std::string& out,
              const std::string& config_file, long iters, uint64_t seed,
              bool seed_set, bool no_pol, double eta, bool eta_set,
              int cubemap_res, bool cubemap_set, const std::string& init_ply,
              int init_points, long warmup) {
    TrainConfig cfg;
    if (!config_file.empty())
        cfg = TrainConfig::from_json_file(config_file);
    if (iters > 0)
        cfg.iterations = iters;
    if (warmup >= 0)
        cfg.warmup_iterations = warmup;
    if (seed_set)
        cfg.seed = seed;
    if (no_pol)
        cfg.enable_polarization = false;
    if (eta_set)
        cfg.eta = eta;
    if (cubemap_set)
        cfg.cubemap_resolution = cubemap_res;
    if (!init_ply.empty())
        cfg.init_ply = init_ply;
    if (init_points > 0)
        cfg.init_points = init_points;
    if (cfg.warmup_iterations >= cfg.iterations) {
        cfg.warmup_iterations = cfg.iterations / 2;
        std::fprintf(stderr, "warning: warm-up clipped to %ld iterations\n",
                     cfg.warmup_iterations);
    }
    cfg.validate();

    const std::vector<PolarizedView> views = load_dataset(data);
    Scene scene = init_scene(views, cfg);
    std::fprintf(stderr, "initialized %zu surfels from %zu views\n",
                 scene.cloud.size(), views.size());

    std::filesystem::create_directories(out);
    {
        std::ofstream cfg_out(out + "/config.json", std::ios::binary);
        cfg_out << cfg.to_json_text();
    }
    std::ofstream log(out + "/log.csv", std::ios::binary);
    if (!log)
        throw DataError("cannot write training log under " + out);

    Trainer trainer(std::move(scene), views, cfg);
    const long report_every = std::max(1L, cfg.iterations / 20);
    log << loss_csv_header();
    while (trainer.iteration() < cfg.iterations) {
        const long iter = trainer.iteration();
        const LossReport r = trainer.step();
        log << loss_csv_row(iter, r);
        if (iter % report_every == 0 || iter + 1 == cfg.iterations)
            std::fprintf(stderr,
                         "iter %6ld  total %.5f  rgb %.5f  pol %.5f  "
                         "surfels %zu\n",
                         iter, r.total, r.rgb, r.pol,
                         trainer.scene().cloud.size());
    }
    save_checkpoint(trainer.scene(), out + "/checkpoint.bin");
    std::fprintf(stderr, "checkpoint written to %s/checkpoint.bin\n",
                 out.c_str());
    return 0;
}

int run_render(const std::string& checkpoint, const std::string& data,
               const std::string& out, const std::string& only_view,
               double eta) {
    const Scene scene = load_scene_arg(checkpoint);
    const std::vector<PolarizedView> views = load_dataset(data);
    std::filesystem::create_directories(out);
    bool matched = false;
    for (const PolarizedView& v : views) {
        if (!only_view.empty() && v.name != only_view)
            continue;
        matched = true;
        const RenderOutputs r =
            render_view(scene, v.camera, RenderMode::Full, eta, false);
        write_exr(out + "/" + v.name + "_s0.exr", r.stokes.s0);
        Image prev(v.camera.width, v.camera.height, 3);
        for (int y = 0; y < v.camera.height; ++y)
            for (int x = 0; x < v.camera.width; ++x) {
                const Rgb c = r.stokes.s0.rgb(x, y);
                prev.set_rgb(x, y, Rgb(std::pow(std::clamp(c[0], 0.0, 1.0), 1 / 2.2),
                                       std::pow(std::clamp(c[1], 0.0, 1.0), 1 / 2.2),
                                       std::pow(std::clamp(c[2], 0.0, 1.0), 1 / 2.2)));
            }
        write_png_rgb(out + "/" + v.name + "_s0.png", prev);
    }
    if (!matched)
        throw DataError(only_view.empty() ? "dataset has no views"
                                          : "no view named " + only_view);
    return 0;
}

int run_decompose(const std::string& checkpoint, const std::string& data,
                  const std::string& out, const std::string& only_view,
                  double eta) {
    const Scene scene = load_scene_arg(checkpoint);
    const std::vector<PolarizedView> views = load_dataset(data);
    bool matched = false;
    for (const PolarizedView& v : views) {
        if (!only_view.empty() && v.name != only_view)
            continue;
        matched = true;
        export_decomposition(scene, v.camera, eta, out, v.name);
        if (!only_view.empty())
            break;
    }
    if (!matched)
        throw DataError(only_view.empty() ? "dataset has no views"
                                          : "no view named " + only_view);
    return 0;
}

int run_export(const std::string& checkpoint, const std::string& data,
               const std::string& out) {
    const Scene scene = load_scene_arg(checkpoint);
    std::vector<Camera> cams;
    if (!data.empty())
        for (const PolarizedView& v : load_dataset(data))
            cams.push_back(v.camera);
    if (const auto dir = std::filesystem::path(out).parent_path();
        !dir.empty())
        std::filesystem::create_directories(dir);
    export_pointcloud(scene, cams, out);
    std::fprintf(stderr, "exported %zu surfels to %s\n", scene.cloud.size(),
                 out.c_str());
    return 0;
}

int run_eval(const std::string& pred, const std::string& gt,
             const std::string& out, double eta) {
    std::string checkpoint = pred;
    if (std::filesystem::is_directory(pred))
        checkpoint = pred + "/checkpoint.bin";
    const Scene scene = load_scene_arg(checkpoint);
    if (!std::filesystem::exists(gt))
        throw DataError("dataset not found: " + gt);
    const std::vector<PolarizedView> views = load_dataset(gt);
    const EvalReport report = evaluate(scene, views, eta, load_gt_points(gt));

    std::string out_path = out;
    if (out_path.empty())
        out_path = (std::filesystem::is_directory(pred) ? pred : ".") +
                   std::string("/eval.json");
    std::ofstream f(out_path, std::ios::binary);
    if (!f)
        throw DataError("cannot write report to " + out_path);
    f << report.to_json_text();
    std::fprintf(stderr, "MAE %.3f deg%s -> %s\n", report.mae_degrees,
                 report.has_chamfer
                     ? (" CD " + std::to_string(report.chamfer)).c_str()
                     : "",
                 out_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Polarimetric Gaussian-surfel reconstruction engine"};
    app.require_subcommand(1);
    CommonFlags common;

    // synth
    auto* synth = app.add_subcommand(
        "synth", "Generate a synthetic polarized dataset with the reference "
                 "path tracer");
    std::string sy_shape = "sphere", sy_out;
    int sy_views = 8, sy_res = 128, sy_samples = 1024;
    uint64_t sy_seed = 1234;
    double sy_rough = 0.25, sy_eta = 1.5;
    bool sy_checker = false;
    synth->add_option("--shape", sy_shape,
                      "sphere|plane|superellipsoid (default sphere)");
    synth->add_option("--views", sy_views, "Camera count (default 8)");
    synth->add_option("--res", sy_res, "Image resolution (default 128)");
    synth->add_option("--out", sy_out, "Output dataset directory")->required();
    synth->add_option("--seed", sy_seed, "Random seed");
    synth->add_option("--samples", sy_samples,
                      "Monte Carlo samples per pixel (default 1024)");
    synth->add_option("--roughness", sy_rough, "GGX roughness (default 0.25)");
    synth->add_option("--eta", sy_eta, "Refractive index (default 1.5)");
    synth->add_flag("--checker", sy_checker, "Checkered albedo");
    add_threads_flag(synth, common);

    // train
    auto* train = app.add_subcommand("train", "Optimize a scene on a dataset");
    std::string tr_data, tr_out, tr_config, tr_init_ply;
    long tr_iters = 0, tr_warmup = -1;
    uint64_t tr_seed = 0;
    bool tr_no_pol = false;
    double tr_eta = 1.5;
    int tr_cubemap = 32, tr_init_points = 0;
    train->add_option("--data", tr_data, "Dataset directory")->required();
    train->add_option("--out", tr_out, "Run output directory")->required();
    train->add_option("--config", tr_config, "JSON config file");
    train->add_option("--iters", tr_iters, "Override total iterations");
    train->add_option("--warmup", tr_warmup, "Override warm-up iterations");
    auto* tr_seed_opt = train->add_option("--seed", tr_seed, "Random seed");
    train->add_flag("--no-pol", tr_no_pol,
                    "Disable the polarimetric loss and specular path");
    auto* tr_eta_opt =
        train->add_option("--eta", tr_eta, "Refractive index");
    auto* tr_cm_opt = train->add_option("--cubemap-res", tr_cubemap,
                                        "Environment cubemap resolution");
    train->add_option("--init-ply", tr_init_ply, "Seed point cloud (PLY)");
    train->add_option("--init-points", tr_init_points,
                      "Visual-hull sample count");
    add_threads_flag(train, common);

    // render
    auto* render = app.add_subcommand(
        "render", "Render dataset views from a trained checkpoint");
    std::string re_ckpt, re_data, re_out, re_view;
    double re_eta = 1.5;
    render->add_option("--checkpoint", re_ckpt, "Checkpoint file")->required();
    render->add_option("--data", re_data, "Dataset directory (cameras)")
        ->required();
    render->add_option("--out", re_out, "Output directory")->required();
    render->add_option("--view", re_view, "Render only this view");
    render->add_option("--eta", re_eta, "Refractive index");
    add_threads_flag(render, common);

    // decompose
    auto* deco = app.add_subcommand(
        "decompose", "Write the diffuse/specular/polarization decomposition");
    std::string de_ckpt, de_data, de_out, de_view;
    double de_eta = 1.5;
    deco->add_option("--checkpoint", de_ckpt, "Checkpoint file")->required();
    deco->add_option("--data", de_data, "Dataset directory (cameras)")
        ->required();
    deco->add_option("--out", de_out, "Output directory")->required();
    deco->add_option("--view", de_view, "Only this view (default: all)");
    deco->add_option("--eta", de_eta, "Refractive index");
    add_threads_flag(deco, common);

    // export
    auto* exp = app.add_subcommand(
        "export", "Export the surfel cloud as an oriented point cloud (PLY)");
    std::string ex_ckpt, ex_data, ex_out;
    exp->add_option("--checkpoint", ex_ckpt, "Checkpoint file")->required();
    exp->add_option("--data", ex_data,
                    "Dataset directory (cameras orient the normals)");
    exp->add_option("--out", ex_out, "Output PLY path")->required();
    add_threads_flag(exp, common);

    // eval
    auto* eval = app.add_subcommand(
        "eval", "Evaluate a run against ground truth (MAE, chamfer)");
    std::string ev_pred, ev_gt, ev_out;
    double ev_eta = 1.5;
    eval->add_option("--pred", ev_pred, "Run directory or checkpoint file")
        ->required();
    eval->add_option("--gt", ev_gt, "Ground-truth dataset directory")
        ->required();
    eval->add_option("--out", ev_out, "Report path (default: pred/eval.json)");
    eval->add_option("--eta", ev_eta, "Refractive index");
    add_threads_flag(eval, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        set_thread_count(common.threads);
        if (synth->parsed())
            return run_synth(sy_shape, sy_views, sy_res, sy_out, sy_seed,
                             sy_samples, sy_rough, sy_eta, sy_checker);
        if (train->parsed())
            return run_train(tr_data, tr_out, tr_config, tr_iters, tr_seed,
                             tr_seed_opt->count() > 0, tr_no_pol, tr_eta,
                             tr_eta_opt->count() > 0, tr_cubemap,
                             tr_cm_opt->count() > 0, tr_init_ply,
                             tr_init_points, tr_warmup);
        if (render->parsed())
            return run_render(re_ckpt, re_data, re_out, re_view, re_eta);
        if (deco->parsed())
            return run_decompose(de_ckpt, de_data, de_out, de_view, de_eta);
        if (exp->parsed())
            return run_export(ex_ckpt, ex_data, ex_out);
        if (eval->parsed())
            return run_eval(ev_pred, ev_gt, ev_out, ev_eta);
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
