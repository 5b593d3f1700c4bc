#include "polgs/oracle.hpp"

#include "polgs/errors.hpp"
#include "polgs/io/ply.hpp"
#include "polgs/rng.hpp"

#include <algorithm>
#include <cmath>

namespace polgs {
namespace {

// Orthonormal basis with n as the third column (branchless pixar-style).
Mat3 basis_from_normal(const Vec3& n) {
    const double sign = std::copysign(1.0, n.z());
    const double a = -1.0 / (sign + n.z());
    const double b = n.x() * n.y() * a;
    Mat3 m;
    m.col(0) = Vec3(1.0 + sign * n.x() * n.x() * a, sign * b, -sign * n.x());
    m.col(1) = Vec3(b, sign + n.y() * n.y() * a, -n.y());
    m.col(2) = n;
    return m;
}

double smith_g1(double nox, double a) {
    const double a2 = a * a;
    return 2.0 * nox / (nox + std::sqrt(a2 + (1.0 - a2) * nox * nox));
}

Rgb albedo_at(const SyntheticScene& s, const Vec3& p) {
    if (!s.checker)
        return s.albedo;
    const Vec3 local = p - s.center;
    const int par = (int(std::floor(local.x() * 3.0)) +
                     int(std::floor(local.y() * 3.0)) +
                     int(std::floor(local.z() * 3.0))) & 1;
    return par ? s.albedo2 : s.albedo;
}

double se_implicit(const SyntheticScene& s, const Vec3& p) {
    const Vec3 l = p - s.center;
    const double r = s.se_exponent;
    return std::pow(std::abs(l.x() / s.half_axes.x()), r) +
           std::pow(std::abs(l.y() / s.half_axes.y()), r) +
           std::pow(std::abs(l.z() / s.half_axes.z()), r) - 1.0;
}

Vec3 se_gradient(const SyntheticScene& s, const Vec3& p) {
    const Vec3 l = p - s.center;
    const double r = s.se_exponent;
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        const double a = s.half_axes[i];
        const double u = std::abs(l[i] / a);
        g[i] = u > 0.0 ? r * std::pow(u, r - 1.0) * std::copysign(1.0, l[i]) / a
                       : 0.0;
    }
    return g;
}

bool sphere_interval(const Vec3& oc, const Vec3& d, double radius, double& t0,
                     double& t1) {
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - radius * radius;
    const double disc = b * b - c;
    if (disc < 0.0)
        return false;
    const double sq = std::sqrt(disc);
    t0 = -b - sq;
    t1 = -b + sq;
    return t1 > 0.0;
}

} // namespace

Rgb ProceduralEnv::eval(const Vec3& dir) const {
    Rgb out = base;
    for (const Lobe& l : lobes) {
        const double d = dir.dot(l.dir);
        if (d > 0.0)
            out += std::pow(d, l.power) * l.amplitude;
    }
    return out;
}

ProceduralEnv ProceduralEnv::default_env() {
    ProceduralEnv e;
    e.lobes.push_back({Vec3(0.4, -0.45, 0.8).normalized(),
                       Rgb(2.2, 2.0, 1.6), 14.0});
    e.lobes.push_back({Vec3(-0.7, 0.3, 0.1).normalized(),
                       Rgb(0.5, 0.7, 1.1), 5.0});
    e.lobes.push_back({Vec3(0.1, 0.8, -0.4).normalized(),
                       Rgb(0.35, 0.3, 0.25), 3.0});
    return e;
}

SurfaceHit intersect(const SyntheticScene& s, const Vec3& origin,
                     const Vec3& dir) {
    SurfaceHit h;
    switch (s.kind) {
    case SurfaceKind::Sphere: {
        double t0, t1;
        if (!sphere_interval(origin - s.center, dir, s.radius, t0, t1))
            return h;
        const double t = t0 > 1e-6 ? t0 : t1;
        if (t <= 1e-6)
            return h;
        h.hit = true;
        h.t = t;
        h.point = origin + t * dir;
        h.normal = (h.point - s.center).normalized();
        return h;
    }
    case SurfaceKind::Plane: {
        const Vec3 n = s.plane_normal.normalized();
        const double denom = dir.dot(n);
        if (std::abs(denom) < 1e-12)
            return h;
        const double t = (s.center - origin).dot(n) / denom;
        if (t <= 1e-6)
            return h;
        const Vec3 p = origin + t * dir;
        const Mat3 f = basis_from_normal(n);
        const Vec3 local = p - s.center;
        if (std::abs(local.dot(f.col(0))) > s.plane_extent ||
            std::abs(local.dot(f.col(1))) > s.plane_extent)
            return h;
        h.hit = true;
        h.t = t;
        h.point = p;
        h.normal = denom < 0.0 ? n : Vec3(-n);
        return h;
    }
    case SurfaceKind::Superellipsoid: {
        double t0, t1;
        const double bound = s.half_axes.norm() + 1e-6;
        if (!sphere_interval(origin - s.center, dir, bound, t0, t1))
            return h;
        t0 = std::max(t0, 1e-6);
        constexpr int kSteps = 384;
        const double dt = (t1 - t0) / kSteps;
        double prev_t = t0;
        double prev_f = se_implicit(s, origin + prev_t * dir);
        for (int i = 1; i <= kSteps; ++i) {
            const double t = t0 + i * dt;
            const double f = se_implicit(s, origin + t * dir);
            if (prev_f > 0.0 && f <= 0.0) {
                double lo = prev_t, hi = t;
                for (int k = 0; k < 64; ++k) {
                    const double mid = 0.5 * (lo + hi);
                    if (se_implicit(s, origin + mid * dir) > 0.0)
                        lo = mid;
                    else
                        hi = mid;
                }
                h.hit = true;
                h.t = 0.5 * (lo + hi);
                h.point = origin + h.t * dir;
                h.normal = se_gradient(s, h.point).normalized();
                return h;
            }
            prev_t = t;
            prev_f = f;
        }
        return h;
    }
    }
    return h;
}

StokesPixel mueller_compose(const Rgb& diffuse_radiance,
                            const Rgb& specular_radiance, double cos_theta,
                            double eta, double phi) {
    const FresnelTerms f = fresnel_cos(cos_theta, eta);
    const double Ts = 1.0 - f.R_s, Tp = 1.0 - f.R_p;

    Mat3 mt = Mat3::Zero();
    mt(0, 0) = f.T_plus;
    mt(0, 1) = mt(1, 0) = f.T_minus;
    mt(1, 1) = f.T_plus;
    mt(2, 2) = std::sqrt(std::max(Ts * Tp, 0.0));

    Mat3 mr = Mat3::Zero();
    mr(0, 0) = f.R_plus;
    mr(0, 1) = mr(1, 0) = f.R_minus;
    mr(1, 1) = f.R_plus;
    mr(2, 2) = std::sqrt(std::max(f.R_s * f.R_p, 0.0));

    const double c2 = std::cos(-2.0 * phi), s2 = std::sin(-2.0 * phi);
    Mat3 rot = Mat3::Identity();
    rot(1, 1) = c2;
    rot(1, 2) = -s2;
    rot(2, 1) = s2;
    rot(2, 2) = c2;

    StokesPixel out;
    for (int c = 0; c < 3; ++c) {
        const Vec3 sd = rot * (mt * Vec3(diffuse_radiance[c], 0.0, 0.0));
        const Vec3 ss = rot * (mr * Vec3(specular_radiance[c], 0.0, 0.0));
        out.s0[c] = sd[0] + ss[0];
        out.s1[c] = sd[1] + ss[1];
        out.s2[c] = sd[2] + ss[2];
    }
    return out;
}

PointRadiance integrate_point(const SyntheticScene& scene, const Vec3& point,
                              const Vec3& normal, const Vec3& view_world,
                              uint64_t pixel_seed) {
    Rand64 rng(pixel_seed);
    const Mat3 frame = basis_from_normal(normal);
    const double nov = std::max(normal.dot(view_world), 1e-9);
    const double a = std::max(scene.roughness, 1e-4);

    Rgb acc_d = Rgb::Zero();
    for (int i = 0; i < scene.samples; ++i) {
        const double u1 = rng.uniform(), u2 = rng.uniform();
        const double r = std::sqrt(u1);
        const double ph = 2.0 * kPi * u2;
        const Vec3 local(r * std::cos(ph), r * std::sin(ph),
                         std::sqrt(std::max(0.0, 1.0 - u1)));
        const Vec3 w = frame * local;
        const double ci = std::max(w.dot(normal), 0.0);
        // cosine-weighted estimator of (rho/pi) * Int L (w.n) Ti+ dw
        acc_d += scene.environment.eval(w) *
                 fresnel_cos(std::min(ci, 1.0), scene.eta).T_plus;
    }
    PointRadiance out;
    out.diffuse =
        albedo_at(scene, point).cwiseProduct(acc_d / double(scene.samples));

    Rgb acc_s = Rgb::Zero();
    for (int i = 0; i < scene.samples; ++i) {
        const double u1 = rng.uniform(), u2 = rng.uniform();
        // GGX half-vector sampling: pdf_h = D(h) (n.h)
        const double tan2 = a * a * u1 / std::max(1.0 - u1, 1e-12);
        const double coh = 1.0 / std::sqrt(1.0 + tan2);
        const double sih = std::sqrt(std::max(0.0, 1.0 - coh * coh));
        const double ph = 2.0 * kPi * u2;
        const Vec3 h =
            frame * Vec3(sih * std::cos(ph), sih * std::sin(ph), coh);
        const double voh = view_world.dot(h);
        if (voh <= 0.0)
            continue;
        const Vec3 w = 2.0 * voh * h - view_world;
        const double now = w.dot(normal);
        if (now <= 0.0)
            continue;
        const double noh = std::max(h.dot(normal), 1e-9);
        const double g = smith_g1(nov, a) * smith_g1(now, a);
        // Int L D G / (4 n.v) dw under pdf_w = D (n.h) / (4 v.h)
        acc_s += scene.environment.eval(w) * (g * voh / (nov * noh));
    }
    out.specular = acc_s / double(scene.samples);
    return out;
}

PolarizedView render_oracle(const SyntheticScene& scene, const Camera& cam) {
    const int w = cam.width, h = cam.height;
    PolarizedView v;
    v.name = cam.name;
    v.camera = cam;
    v.i0 = Image(w, h, 3);
    v.i45 = v.i0;
    v.i90 = v.i0;
    v.i135 = v.i0;
    v.mask = Image(w, h, 1);
    v.gt_normal = Image(w, h, 3);
    v.gt_depth = Image(w, h, 1);

    const Vec3 eye = cam.position();
    uint64_t base_seed = scene.seed;

#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Vec3 dir_world =
                (cam.rotation.transpose() * cam.ray(x, y)).normalized();
            const SurfaceHit hit = intersect(scene, eye, dir_world);
            if (!hit.hit)
                continue;
            v.mask.at(x, y) = 1.0;

            const Vec3 p_cam = cam.to_camera(hit.point);
            Vec3 n_cam = cam.rotation * hit.normal;
            Vec3 n_world = hit.normal;
            if (n_cam.dot(p_cam) > 0.0) { // back-facing: flip toward camera
                n_cam = -n_cam;
                n_world = -n_world;
            }
            v.gt_depth.at(x, y) = p_cam.z();
            v.gt_normal.at(x, y, 0) = n_cam.x();
            v.gt_normal.at(x, y, 1) = n_cam.y();
            v.gt_normal.at(x, y, 2) = n_cam.z();

            const Vec3 view_world = (eye - hit.point).normalized();
            uint64_t ps = base_seed + 0x9e3779b97f4a7c15ULL *
                                          (uint64_t(y) * w + x + 1);
            const PointRadiance rad = integrate_point(
                scene, hit.point, n_world, view_world, splitmix64(ps));

            const double cos_theta =
                std::clamp(n_cam.dot(-p_cam.normalized()), 0.0, 1.0);
            const double phi = azimuth_of_normal(n_cam).phi;
            const StokesPixel S = mueller_compose(rad.diffuse, rad.specular,
                                                  cos_theta, scene.eta, phi);
            const PolarizerQuad q = quad_from_stokes(S);
            v.i0.set_rgb(x, y, q.i0);
            v.i45.set_rgb(x, y, q.i45);
            v.i90.set_rgb(x, y, q.i90);
            v.i135.set_rgb(x, y, q.i135);
        }
    }
    v.stokes = stokes_from_quad(v.i0, v.i45, v.i90, v.i135);
    return v;
}

void make_synthetic_dataset(const SyntheticScene& scene, int n_views,
                            int resolution, uint64_t seed,
                            const std::string& out_dir) {
    if (n_views < 2)
        throw DataError("synthetic dataset needs at least 2 views");
    if (resolution <= 0)
        throw DataError("synthetic dataset resolution must be positive");

    double scale = scene.radius;
    if (scene.kind == SurfaceKind::Plane)
        scale = scene.plane_extent;
    else if (scene.kind == SurfaceKind::Superellipsoid)
        scale = scene.half_axes.norm();

    SyntheticScene sc = scene;
    std::vector<PolarizedView> views;
    views.reserve(n_views);
    for (int i = 0; i < n_views; ++i) {
        const double az = 2.0 * kPi * i / n_views;
        const double el = radians(20.0 + 12.0 * ((i % 2) ? -1.0 : 1.0));
        const Vec3 eye = scene.center +
                         3.0 * scale * Vec3(std::cos(az) * std::cos(el),
                                            std::sin(az) * std::cos(el),
                                            std::sin(el));
        char name[32];
        std::snprintf(name, sizeof(name), "view%03d", i);
        Camera cam = look_at_camera(eye, scene.center, Vec3(0, 0, 1),
                                    resolution, resolution, 1.1 * resolution);
        cam.name = name;

        uint64_t vs = seed + 1315423911ULL * (i + 1);
        sc.seed = splitmix64(vs);
        views.push_back(render_oracle(sc, cam));
    }
    save_dataset(out_dir, views);

    // Reference surface samples for shape evaluation: rays shot inward from
    // a bounding sphere (all three shapes are convex).
    uint64_t ps = seed ^ 0x94d049bb133111ebULL;
    Rand64 rng(splitmix64(ps));
    std::vector<PlyPoint> pts;
    pts.reserve(16384);
    const double far = 4.0 * scale + 1.0;
    for (int k = 0; k < 65536 && pts.size() < 16384; ++k) {
        Vec3 d(rng.gaussian(), rng.gaussian(), rng.gaussian());
        if (d.squaredNorm() < 1e-12)
            continue;
        d.normalize();
        const SurfaceHit hit =
            intersect(scene, scene.center + far * d, Vec3(-d));
        if (!hit.hit)
            continue;
        PlyPoint p;
        p.position = hit.point;
        p.normal = hit.normal;
        pts.push_back(p);
    }
    if (!pts.empty())
        write_ply(out_dir + "/gt_points.ply", pts);
}

} // namespace polgs
