#include "polgs/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace polgs {
namespace {

constexpr double kNearPlane = 0.01;
constexpr int kTile = 16;
// Low-pass floor added to the screen covariance diagonal (pixels^2).
constexpr double kCovFloor = 0.3;

Mat23 projection_jacobian(const Camera& cam, const Vec3& p) {
    const double iz = 1.0 / p.z();
    Mat23 J;
    J << cam.fx * iz, 0.0, -cam.fx * p.x() * iz * iz,
         0.0, cam.fy * iz, -cam.fy * p.y() * iz * iz;
    return J;
}

// One pixel's front-to-back walk. `cand` lists positions into `ps` already in
// global depth order; null means the identity list of length n. The exact
// same instruction sequence runs for tiled and serial passes, which is what
// makes them bit-identical.
inline void composite_pixel(const std::vector<ProjectedSurfel>& ps,
                            const int* cand, int n, double px, double py,
                            Rgb& out_color, double& out_depth, Vec3& out_normal,
                            double& out_alpha, std::vector<int>* record) {
    const Vec2 u(px, py);
    double T = 1.0;
    Rgb C = Rgb::Zero();
    Vec3 N = Vec3::Zero();
    double D = 0.0, A = 0.0;
    for (int k = 0; k < n; ++k) {
        const int idx = cand ? cand[k] : k;
        const ProjectedSurfel& p = ps[idx];
        const Vec2 d = u - p.mean;
        const double md = 0.5 * d.dot(p.conic * d);
        const double G = std::exp(-md);
        const double alpha = p.opacity * G;
        if (alpha < kMinAlpha)
            continue;
        const double w = alpha * T;
        C += w * p.color;
        D += w * per_pixel_depth(p, u);
        N += w * p.normal;
        A += w;
        if (record)
            record->push_back(idx);
        T *= 1.0 - alpha;
        if (T < kMinTransmittance)
            break;
    }
    out_color = C;
    out_depth = D;
    out_normal = N;
    out_alpha = A;
}

void finalize(RenderBuffers& rb) {
    const int w = rb.alpha.width(), h = rb.alpha.height();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double a = rb.alpha.at(x, y);
            if (a > 0.0) {
                rb.depth.at(x, y) = rb.depth_accum.at(x, y) / a;
                const Vec3 n(rb.normal_accum.at(x, y, 0),
                             rb.normal_accum.at(x, y, 1),
                             rb.normal_accum.at(x, y, 2));
                const double len = n.norm();
                if (len > 1e-300) {
                    const Vec3 nn = n / len;
                    rb.normal.at(x, y, 0) = nn.x();
                    rb.normal.at(x, y, 1) = nn.y();
                    rb.normal.at(x, y, 2) = nn.z();
                }
            }
        }
    }
}

struct TileGrid {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> lists;
};

// Bins projected surfels into 16x16 tiles. Iterating the depth-sorted input
// keeps every tile list depth-sorted as well. The footprint radius is wide
// enough that any contribution above the alpha cutoff lands inside it.
TileGrid build_tiles(const std::vector<ProjectedSurfel>& ps, int w, int h) {
    TileGrid g;
    g.tiles_x = (w + kTile - 1) / kTile;
    g.tiles_y = (h + kTile - 1) / kTile;
    g.lists.resize(size_t(g.tiles_x) * g.tiles_y);
    for (int i = 0; i < int(ps.size()); ++i) {
        const ProjectedSurfel& p = ps[i];
        const int x0 = std::max(0, int(std::floor(p.mean.x() - p.radius)));
        const int x1 = std::min(w - 1, int(std::ceil(p.mean.x() + p.radius)));
        const int y0 = std::max(0, int(std::floor(p.mean.y() - p.radius)));
        const int y1 = std::min(h - 1, int(std::ceil(p.mean.y() + p.radius)));
        if (x0 > x1 || y0 > y1)
            continue;
        for (int ty = y0 / kTile; ty <= y1 / kTile; ++ty)
            for (int tx = x0 / kTile; tx <= x1 / kTile; ++tx)
                g.lists[size_t(ty) * g.tiles_x + tx].push_back(i);
    }
    return g;
}

} // namespace

RenderBuffers::RenderBuffers(int w, int h)
    : color(w, h, 3), depth(w, h, 1), normal(w, h, 3), alpha(w, h, 1),
      depth_accum(w, h, 1), normal_accum(w, h, 3) {}

std::optional<ProjectedSurfel> project(const GaussianSurfel& s, int index,
                                       const Camera& cam) {
    ProjectedSurfel p;
    p.index = index;
    p.p_cam = cam.to_camera(s.position);
    const double z = p.p_cam.z();
    if (z <= kNearPlane)
        return std::nullopt;
    p.depth = z;

    const Mat3 M = cam.rotation * quat_to_rot(s.rotation);
    p.cam_rot = M;
    p.orient_sign = M.col(2).dot(p.p_cam) > 0.0 ? -1.0 : 1.0;
    p.normal = p.orient_sign * M.col(2);

    const Mat23 J = projection_jacobian(cam, p.p_cam);
    const Mat32 M2 = M.leftCols<2>();
    const Mat2 A = J * M2;
    p.tangent_to_pixel = A;

    const Vec2 sc = s.scale();
    const Vec2 s2(sc.x() * sc.x(), sc.y() * sc.y());
    p.cov = A * s2.asDiagonal() * A.transpose() + kCovFloor * Mat2::Identity();
    const double det = p.cov.determinant();
    if (!(det > 0.0) || !std::isfinite(det))
        return std::nullopt;
    p.conic << p.cov(1, 1), -p.cov(0, 1), -p.cov(1, 0), p.cov(0, 0);
    p.conic /= det;

    const double tr = p.cov.trace();
    const double lam_max = 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    // At 3.5 standard deviations the kernel is already below the 1/255 alpha
    // cutoff, so the square footprint loses nothing the blender would keep.
    p.radius = 3.5 * std::sqrt(lam_max) + 1.0;

    p.mean = cam.project(p.p_cam);
    if (p.mean.x() + p.radius < 0.0 || p.mean.x() - p.radius > cam.width - 1 ||
        p.mean.y() + p.radius < 0.0 || p.mean.y() - p.radius > cam.height - 1)
        return std::nullopt;

    p.opacity = s.opacity();
    p.color = s.color;

    const double detA = A.determinant();
    if (std::abs(detA) > 1e-12) {
        Mat2 Ainv;
        Ainv << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
        Ainv /= detA;
        const Vec2 m(M(2, 0), M(2, 1));
        p.depth_slope = Ainv.transpose() * m;
        p.slope_valid = true;
    }
    return p;
}

std::vector<ProjectedSurfel> project_all(const SurfelCloud& cloud,
                                         const Camera& cam) {
    std::vector<ProjectedSurfel> out;
    out.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        if (auto p = project(cloud.get(i), int(i), cam))
            out.push_back(*p);
    }
    std::sort(out.begin(), out.end(),
              [](const ProjectedSurfel& a, const ProjectedSurfel& b) {
                  if (a.depth != b.depth)
                      return a.depth < b.depth;
                  return a.index < b.index;
              });
    return out;
}

double per_pixel_depth(const ProjectedSurfel& p, const Vec2& u) {
    double corr = p.slope_valid ? p.depth_slope.dot(u - p.mean) : 0.0;
    corr = std::clamp(corr, -0.5 * p.depth, 0.5 * p.depth);
    return p.depth + corr;
}

RenderBuffers composite_serial(const std::vector<ProjectedSurfel>& ps, int w,
                               int h, bool record) {
    RenderBuffers rb(w, h);
    if (record) {
        rb.contrib_offsets.reserve(size_t(w) * h + 1);
        rb.contrib_offsets.push_back(0);
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Rgb c;
            Vec3 n;
            double d, a;
            composite_pixel(ps, nullptr, int(ps.size()), x, y, c, d, n, a,
                            record ? &rb.contrib_items : nullptr);
            rb.color.set_rgb(x, y, c);
            rb.depth_accum.at(x, y) = d;
            rb.normal_accum.at(x, y, 0) = n.x();
            rb.normal_accum.at(x, y, 1) = n.y();
            rb.normal_accum.at(x, y, 2) = n.z();
            rb.alpha.at(x, y) = a;
            if (record)
                rb.contrib_offsets.push_back(int(rb.contrib_items.size()));
        }
    }
    finalize(rb);
    return rb;
}

RenderBuffers composite_tiled(const std::vector<ProjectedSurfel>& ps, int w,
                              int h, bool record) {
    RenderBuffers rb(w, h);
    const TileGrid grid = build_tiles(ps, w, h);
    const int n_tiles = grid.tiles_x * grid.tiles_y;

    std::vector<std::vector<int>> tile_items;
    std::vector<int> counts;
    if (record) {
        tile_items.resize(n_tiles);
        counts.assign(size_t(w) * h, 0);
    }

#pragma omp parallel for schedule(static)
    for (int t = 0; t < n_tiles; ++t) {
        const int tx = t % grid.tiles_x, ty = t / grid.tiles_x;
        const int x0 = tx * kTile, x1 = std::min(w, x0 + kTile);
        const int y0 = ty * kTile, y1 = std::min(h, y0 + kTile);
        const std::vector<int>& lst = grid.lists[t];
        std::vector<int>* rec = record ? &tile_items[t] : nullptr;
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const size_t before = rec ? rec->size() : 0;
                Rgb c;
                Vec3 n;
                double d, a;
                composite_pixel(ps, lst.data(), int(lst.size()), x, y, c, d, n,
                                a, rec);
                rb.color.set_rgb(x, y, c);
                rb.depth_accum.at(x, y) = d;
                rb.normal_accum.at(x, y, 0) = n.x();
                rb.normal_accum.at(x, y, 1) = n.y();
                rb.normal_accum.at(x, y, 2) = n.z();
                rb.alpha.at(x, y) = a;
                if (rec)
                    counts[size_t(y) * w + x] = int(rec->size() - before);
            }
        }
    }

    if (record) {
        rb.contrib_offsets.resize(size_t(w) * h + 1);
        rb.contrib_offsets[0] = 0;
        for (size_t i = 0; i < size_t(w) * h; ++i)
            rb.contrib_offsets[i + 1] = rb.contrib_offsets[i] + counts[i];
        rb.contrib_items.resize(rb.contrib_offsets.back());
#pragma omp parallel for schedule(static)
        for (int t = 0; t < n_tiles; ++t) {
            const int tx = t % grid.tiles_x, ty = t / grid.tiles_x;
            const int x0 = tx * kTile, x1 = std::min(w, x0 + kTile);
            const int y0 = ty * kTile, y1 = std::min(h, y0 + kTile);
            size_t rp = 0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const size_t pix = size_t(y) * w + x;
                    const int c = counts[pix];
                    std::copy_n(tile_items[t].begin() + rp, c,
                                rb.contrib_items.begin() + rb.contrib_offsets[pix]);
                    rp += c;
                }
            }
        }
    }
    finalize(rb);
    return rb;
}

RenderBuffers composite_full_sort_reference(
    const std::vector<ProjectedSurfel>& ps, int w, int h) {
    RenderBuffers rb(w, h);
    std::vector<int> order(ps.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec2 u(x, y);
            for (int i = 0; i < int(ps.size()); ++i)
                order[i] = i;
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                const double da = per_pixel_depth(ps[a], u);
                const double db = per_pixel_depth(ps[b], u);
                if (da != db)
                    return da < db;
                return a < b;
            });
            Rgb c;
            Vec3 n;
            double d, a;
            composite_pixel(ps, order.data(), int(order.size()), x, y, c, d, n,
                            a, nullptr);
            rb.color.set_rgb(x, y, c);
            rb.depth_accum.at(x, y) = d;
            rb.normal_accum.at(x, y, 0) = n.x();
            rb.normal_accum.at(x, y, 1) = n.y();
            rb.normal_accum.at(x, y, 2) = n.z();
            rb.alpha.at(x, y) = a;
        }
    }
    finalize(rb);
    return rb;
}

CompositeGrads composite_backward(const std::vector<ProjectedSurfel>& ps,
                                  const RenderBuffers& rb, const Image& g_color,
                                  const Image& g_depth_accum,
                                  const Image& g_normal_accum,
                                  const Image& g_alpha) {
    const int w = rb.alpha.width(), h = rb.alpha.height();
    if (rb.contrib_offsets.size() != size_t(w) * h + 1)
        throw std::invalid_argument("composite buffers lack contributor lists");
    if (g_color.width() != w || g_color.height() != h ||
        g_color.channels() != 3 || !g_depth_accum.same_shape(rb.depth_accum) ||
        !g_normal_accum.same_shape(rb.normal_accum) ||
        !g_alpha.same_shape(rb.alpha))
        throw std::invalid_argument("upstream gradient shapes do not match buffers");

    CompositeGrads out(ps.size());
    const int tiles_x = (w + kTile - 1) / kTile;
    const int tiles_y = (h + kTile - 1) / kTile;
    const int n_tiles = tiles_x * tiles_y;

    struct Partial {
        Rgb color = Rgb::Zero();
        Vec2 mean = Vec2::Zero();
        Mat2 conic = Mat2::Zero();
        double opacity = 0.0, depth = 0.0;
        Vec2 slope = Vec2::Zero();
        Vec3 normal = Vec3::Zero();
    };
    // Per-tile partial sums in first-touch order; the serial merge below
    // walks tiles in index order, so totals are independent of thread count.
    std::vector<std::vector<std::pair<int, Partial>>> tile_parts(n_tiles);

#pragma omp parallel for schedule(static)
    for (int t = 0; t < n_tiles; ++t) {
        const int tx = t % tiles_x, ty = t / tiles_x;
        const int x0 = tx * kTile, x1 = std::min(w, x0 + kTile);
        const int y0 = ty * kTile, y1 = std::min(h, y0 + kTile);
        auto& entries = tile_parts[t];
        std::unordered_map<int, int> slot;
        auto acc = [&](int idx) -> Partial& {
            auto [it, inserted] = slot.try_emplace(idx, int(entries.size()));
            if (inserted)
                entries.emplace_back(idx, Partial{});
            return entries[it->second].second;
        };

        std::vector<double> alpha_v, tbefore_v, weight_v, depth_v, gval_v;
        std::vector<Vec2> delta_v;
        std::vector<int> clamp_v; // -1 low, 0 free, +1 high

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const size_t pix = size_t(y) * w + x;
                const int k0 = rb.contrib_offsets[pix];
                const int k1 = rb.contrib_offsets[pix + 1];
                const int n = k1 - k0;
                if (n == 0)
                    continue;
                alpha_v.resize(n);
                tbefore_v.resize(n);
                weight_v.resize(n);
                depth_v.resize(n);
                gval_v.resize(n);
                delta_v.resize(n);
                clamp_v.resize(n);

                const Vec2 u(x, y);
                double T = 1.0;
                for (int i = 0; i < n; ++i) {
                    const ProjectedSurfel& p = ps[rb.contrib_items[k0 + i]];
                    const Vec2 d = u - p.mean;
                    const double md = 0.5 * d.dot(p.conic * d);
                    const double G = std::exp(-md);
                    const double a = p.opacity * G;
                    double corr = p.slope_valid ? p.depth_slope.dot(d) : 0.0;
                    int cl = 0;
                    if (corr > 0.5 * p.depth) {
                        corr = 0.5 * p.depth;
                        cl = 1;
                    } else if (corr < -0.5 * p.depth) {
                        corr = -0.5 * p.depth;
                        cl = -1;
                    }
                    delta_v[i] = d;
                    gval_v[i] = G;
                    alpha_v[i] = a;
                    tbefore_v[i] = T;
                    weight_v[i] = a * T;
                    depth_v[i] = p.depth + corr;
                    clamp_v[i] = cl;
                    T *= 1.0 - a;
                }

                const Rgb gC = g_color.rgb(x, y);
                const double gD = g_depth_accum.at(x, y);
                const Vec3 gN(g_normal_accum.at(x, y, 0),
                              g_normal_accum.at(x, y, 1),
                              g_normal_accum.at(x, y, 2));
                const double gA = g_alpha.at(x, y);

                Rgb Sc = Rgb::Zero();
                Vec3 Sn = Vec3::Zero();
                double Sd = 0.0, Sa = 0.0;
                for (int i = n - 1; i >= 0; --i) {
                    const int idx = rb.contrib_items[k0 + i];
                    const ProjectedSurfel& p = ps[idx];
                    const double a = alpha_v[i];
                    const double wgt = weight_v[i];
                    const double direct = gC.dot(p.color) + gD * depth_v[i] +
                                          gN.dot(p.normal) + gA;
                    const double one_m = 1.0 - a;
                    const double suffix =
                        gC.dot(Sc) + gD * Sd + gN.dot(Sn) + gA * Sa;
                    const double g_a =
                        tbefore_v[i] * direct -
                        (one_m > 0.0 ? suffix / one_m : 0.0);

                    Partial& P = acc(idx);
                    P.color += wgt * gC;
                    P.normal += wgt * gN;
                    const double gd = wgt * gD;
                    if (clamp_v[i] == 0) {
                        P.depth += gd;
                        if (p.slope_valid) {
                            P.slope += gd * delta_v[i];
                            P.mean -= gd * p.depth_slope;
                        }
                    } else {
                        P.depth += (clamp_v[i] > 0 ? 1.5 : 0.5) * gd;
                    }
                    const double gG = p.opacity * g_a;
                    P.opacity += gval_v[i] * g_a;
                    const Vec2 cd = p.conic * delta_v[i];
                    P.mean += gG * gval_v[i] * cd;
                    P.conic += (-0.5 * gval_v[i] * gG) *
                               (delta_v[i] * delta_v[i].transpose());

                    Sc += wgt * p.color;
                    Sd += wgt * depth_v[i];
                    Sn += wgt * p.normal;
                    Sa += wgt;
                }
            }
        }
    }

    for (int t = 0; t < n_tiles; ++t) {
        for (const auto& [idx, P] : tile_parts[t]) {
            out.color[idx] += P.color;
            out.mean[idx] += P.mean;
            out.conic[idx] += P.conic;
            out.opacity[idx] += P.opacity;
            out.depth[idx] += P.depth;
            out.depth_slope[idx] += P.slope;
            out.normal[idx] += P.normal;
        }
    }
    return out;
}

void project_backward(const std::vector<ProjectedSurfel>& ps,
                      const SurfelCloud& cloud, const Camera& cam,
                      const CompositeGrads& cg, SurfelGrads& grads,
                      std::vector<double>* ndc_grad_norm) {
    if (ndc_grad_norm)
        ndc_grad_norm->assign(ps.size(), 0.0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < int(ps.size()); ++i) {
        const ProjectedSurfel& p = ps[i];
        const int ci = p.index;

        grads.color[ci] += cg.color[i];
        const double o = p.opacity;
        grads.opacity_logit[ci] += o * (1.0 - o) * cg.opacity[i];

        // conic -> screen covariance
        const Mat2 gCov = -(p.conic * cg.conic[i] * p.conic);
        const Mat2& A = p.tangent_to_pixel;
        const Vec2 sc = Vec2(cloud.log_scale[ci]).array().exp();
        const Vec2 s2(sc.x() * sc.x(), sc.y() * sc.y());
        Mat2 gA = 2.0 * gCov * A * s2.asDiagonal();

        // scale gradients (log parameterization): d s^2 / d log s = 2 s^2
        const Mat2 gD2 = A.transpose() * gCov * A;
        grads.log_scale[ci].x() += 2.0 * s2.x() * gD2(0, 0);
        grads.log_scale[ci].y() += 2.0 * s2.y() * gD2(1, 1);

        // depth-slope chain t = A^{-T} m
        Vec2 gm = Vec2::Zero();
        if (p.slope_valid && cg.depth_slope[i].squaredNorm() > 0.0) {
            const double detA = A.determinant();
            Mat2 Ainv;
            Ainv << A(1, 1), -A(0, 1), -A(1, 0), A(0, 0);
            Ainv /= detA;
            const Vec2 u2 = Ainv * cg.depth_slope[i];
            gm = u2;
            gA -= p.depth_slope * u2.transpose();
        }

        const Mat23 J = projection_jacobian(cam, p.p_cam);
        const Mat32 M2 = p.cam_rot.leftCols<2>();
        const Mat23 gJ = gA * M2.transpose();

        Mat3 gM = Mat3::Zero();
        gM.leftCols<2>() = J.transpose() * gA;
        gM(2, 0) += gm(0);
        gM(2, 1) += gm(1);
        gM.col(2) += p.orient_sign * cg.normal[i];

        const Mat3 gR = cam.rotation.transpose() * gM;
        grads.rotation[ci] += rot_grad_to_quat(cloud.rotation[ci], gR);

        // position chain: screen mean, projection Jacobian entries, depth
        const double x = p.p_cam.x(), y = p.p_cam.y(), z = p.p_cam.z();
        const double iz = 1.0 / z, iz2 = iz * iz;
        Vec3 gp = Vec3::Zero();
        gp.x() += cg.mean[i].x() * cam.fx * iz;
        gp.y() += cg.mean[i].y() * cam.fy * iz;
        gp.z() -= cg.mean[i].x() * cam.fx * x * iz2 +
                  cg.mean[i].y() * cam.fy * y * iz2;
        gp.x() += gJ(0, 2) * (-cam.fx * iz2);
        gp.y() += gJ(1, 2) * (-cam.fy * iz2);
        gp.z() += gJ(0, 0) * (-cam.fx * iz2) + gJ(1, 1) * (-cam.fy * iz2) +
                  gJ(0, 2) * (2.0 * cam.fx * x * iz2 * iz) +
                  gJ(1, 2) * (2.0 * cam.fy * y * iz2 * iz);
        gp.z() += cg.depth[i];
        grads.position[ci] += cam.rotation.transpose() * gp;

        if (ndc_grad_norm) {
            const double gx = cg.mean[i].x() * 0.5 * cam.width;
            const double gy = cg.mean[i].y() * 0.5 * cam.height;
            (*ndc_grad_norm)[i] = std::hypot(gx, gy);
        }
    }
}

} // namespace polgs
