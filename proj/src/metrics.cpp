#include "polgs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "polgs/errors.hpp"
#include "polgs/io/exr.hpp"
#include "polgs/io/png.hpp"
#include "polgs/io/ply.hpp"
#include "polgs/kdtree.hpp"

namespace polgs {
namespace {

Image tonemap_preview(const Image& linear) {
    Image out(linear.width(), linear.height(), linear.channels());
    const double* in = linear.data();
    double* d = out.data();
    for (size_t i = 0; i < out.size(); ++i)
        d[i] = std::pow(std::clamp(in[i], 0.0, 1.0), 1.0 / 2.2);
    return out;
}

void write_pair(const std::string& base, const Image& img) {
    write_exr(base + ".exr", img);
    const Image prev = tonemap_preview(img);
    if (img.channels() == 3)
        write_png_rgb(base + ".png", prev);
    else
        write_png_gray(base + ".png", prev);
}

} // namespace

std::string EvalReport::to_json_text() const {
    nlohmann::json j;
    j["mae_degrees"] = mae_degrees;
    if (has_chamfer)
        j["chamfer"] = chamfer;
    else
        j["chamfer"] = nullptr;
    j["per_view"] = nlohmann::json::array();
    for (const ViewEval& v : per_view)
        j["per_view"].push_back({{"name", v.name},
                                 {"mae_degrees", v.mae_degrees},
                                 {"foreground_pixels", v.foreground_pixels}});
    return j.dump(2) + "\n";
}

double mae_normals(const Image& pred, const Image& gt, const Image& mask) {
    if (!pred.same_shape(gt) || pred.channels() != 3)
        throw DataError("mae_normals: normal maps must share a 3-channel shape");
    if (mask.width() != pred.width() || mask.height() != pred.height() ||
        mask.channels() != 1)
        throw DataError("mae_normals: mask shape mismatch");

    double sum = 0.0;
    long count = 0;
    for (int y = 0; y < pred.height(); ++y) {
        for (int x = 0; x < pred.width(); ++x) {
            if (mask.at(x, y) < 0.5)
                continue;
            const Vec3 p = pred.rgb(x, y);
            const Vec3 g = gt.rgb(x, y);
            const double dot = std::clamp(p.dot(g), -1.0, 1.0);
            sum += std::acos(dot);
            ++count;
        }
    }
    if (count == 0)
        throw DataError("mae_normals: empty foreground mask");
    return degrees(sum / double(count));
}

double chamfer_distance(const std::vector<Vec3>& a,
                        const std::vector<Vec3>& b) {
    if (a.empty() || b.empty())
        throw DataError("chamfer_distance: point sets must be non-empty");
    const KdTree ta(a), tb(b);

    auto one_way = [](const std::vector<Vec3>& from, const KdTree& to) {
        std::vector<double> partial(from.size());
#pragma omp parallel for schedule(static)
        for (long i = 0; i < long(from.size()); ++i)
            partial[i] = to.nearest(from[i]).second;
        double s = 0.0;
        for (double d : partial)
            s += d;
        return s / double(from.size());
    };
    return 0.5 * (one_way(a, tb) + one_way(b, ta));
}

void export_pointcloud(const Scene& scene,
                       const std::vector<Camera>& cameras,
                       const std::string& path) {
    const SurfelCloud& c = scene.cloud;
    std::vector<PlyPoint> pts(c.size());
    for (size_t i = 0; i < c.size(); ++i) {
        PlyPoint& p = pts[i];
        p.position = c.position[i];
        Vec3 n = quat_to_rot(c.rotation[i]).col(2);
        const double opacity = sigmoid(c.opacity_logit[i]);
        double vote = 0.0;
        for (const Camera& cam : cameras) {
            const Vec3 to_cam = cam.position() - p.position;
            const double len = to_cam.norm();
            if (len > 1e-12)
                vote += opacity * n.dot(to_cam / len);
        }
        if (vote < 0.0)
            n = -n;
        p.normal = n;
        p.color = c.color[i].cwiseMax(0.0).cwiseMin(1.0);
        p.opacity = opacity;
    }
    write_ply(path, pts);
}

void export_decomposition(const Scene& scene, const Camera& camera,
                          double eta, const std::string& dir,
                          const std::string& stem) {
    std::filesystem::create_directories(dir);
    const RenderOutputs out =
        render_view(scene, camera, RenderMode::Full, eta, false);
    const int w = camera.width, h = camera.height;

    Image aop(w, h, 1), dop(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Polarization angles from channel-averaged Stokes components.
            const Rgb s0 = out.stokes.s0.rgb(x, y);
            const Rgb s1 = out.stokes.s1.rgb(x, y);
            const Rgb s2 = out.stokes.s2.rgb(x, y);
            const double m0 = s0.mean(), m1 = s1.mean(), m2 = s2.mean();
            aop.at(x, y) = 0.5 * std::atan2(-m2, m1);
            dop.at(x, y) =
                m0 > 1e-9 ? std::sqrt(m1 * m1 + m2 * m2) / m0 : 0.0;
        }
    }

    const std::string base = dir + "/" + stem;
    write_pair(base + "_s0", out.stokes.s0);
    write_exr(base + "_s1.exr", out.stokes.s1);
    write_exr(base + "_s2.exr", out.stokes.s2);
    write_pair(base + "_diffuse", out.diffuse_s0);
    write_pair(base + "_specular", out.specular_s0);
    write_exr(base + "_aop.exr", aop);
    {
        // Preview maps [-pi/2, pi/2] onto [0, 1].
        Image prev(w, h, 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                prev.at(x, y) = (aop.at(x, y) + kPi / 2) / kPi;
        write_png_gray(base + "_aop.png", prev);
    }
    write_exr(base + "_dop.exr", dop);
    write_png_gray(base + "_dop.png", dop);
    write_exr(base + "_normal.exr", out.geo.normal);
    {
        // Preview maps each component from [-1, 1] onto [0, 1].
        Image prev(w, h, 3);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                prev.set_rgb(x, y,
                             (out.geo.normal.rgb(x, y).array() * 0.5 + 0.5)
                                 .matrix());
        write_png_rgb(base + "_normal.png", prev);
    }
    write_exr(base + "_depth.exr", out.geo.depth);
    write_exr(base + "_alpha.exr", out.geo.alpha);
}

EvalReport evaluate(const Scene& scene,
                    const std::vector<PolarizedView>& views, double eta,
                    const std::vector<Vec3>& gt_points) {
    EvalReport report;
    double pooled = 0.0;
    long pooled_count = 0;
    for (const PolarizedView& v : views) {
        if (v.gt_normal.empty())
            continue;
        const RenderOutputs out =
            render_view(scene, v.camera, RenderMode::Full, eta, false);
        double sum = 0.0;
        long count = 0;
        for (int y = 0; y < v.camera.height; ++y) {
            for (int x = 0; x < v.camera.width; ++x) {
                if (v.mask.at(x, y) < 0.5)
                    continue;
                const double dot = std::clamp(
                    out.geo.normal.rgb(x, y).dot(v.gt_normal.rgb(x, y)),
                    -1.0, 1.0);
                sum += std::acos(dot);
                ++count;
            }
        }
        if (count == 0)
            continue;
        report.per_view.push_back(
            {v.name, degrees(sum / double(count)), count});
        pooled += sum;
        pooled_count += count;
    }
    if (pooled_count == 0)
        throw DataError("evaluate: no view carries ground-truth normals "
                        "with a non-empty mask");
    report.mae_degrees = degrees(pooled / double(pooled_count));

    if (!gt_points.empty() && !scene.cloud.empty()) {
        report.chamfer = chamfer_distance(scene.cloud.position, gt_points);
        report.has_chamfer = true;
    }
    return report;
}

} // namespace polgs
