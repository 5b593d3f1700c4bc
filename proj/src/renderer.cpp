#include "polgs/renderer.hpp"

#include <cmath>
#include <stdexcept>

namespace polgs {
namespace {

// cos2/sin2 of the normal's azimuth without atan2: cos2φ = (nx²-ny²)/ρ²,
// sin2φ = 2 nx ny / ρ². Degenerate normals fall back to φ = 0.
struct Azimuth2 {
    double c2 = 1.0, s2 = 0.0;
    double rho2 = 0.0;
    bool valid = false;
};

Azimuth2 azimuth2(const Vec3& n) {
    Azimuth2 a;
    a.rho2 = n.x() * n.x() + n.y() * n.y();
    if (a.rho2 > 1e-16) {
        a.c2 = (n.x() * n.x() - n.y() * n.y()) / a.rho2;
        a.s2 = 2.0 * n.x() * n.y() / a.rho2;
        a.valid = true;
    }
    return a;
}

void require_shape(const Image& img, int w, int h, int c, const char* what) {
    if (img.empty())
        return;
    if (img.width() != w || img.height() != h || img.channels() != c)
        throw std::invalid_argument(std::string("upstream gradient shape mismatch: ") + what);
}

inline Rgb rgb_or_zero(const Image& img, int x, int y) {
    return img.empty() ? Rgb(Rgb::Zero()) : img.rgb(x, y);
}

inline double val_or_zero(const Image& img, int x, int y) {
    return img.empty() ? 0.0 : img.at(x, y);
}

} // namespace

RenderOutputs render_view(const Scene& scene, const Camera& cam,
                          RenderMode mode, double eta,
                          bool record_for_backward) {
    const int w = cam.width, h = cam.height;
    RenderOutputs o;
    o.mode = mode;
    o.projected = project_all(scene.cloud, cam);
    o.geo = composite_tiled(o.projected, w, h, record_for_backward);
    o.stokes = StokesImage(w, h, 3);
    o.diffuse_s0 = Image(w, h, 3);
    o.specular_s0 = Image(w, h, 3);

    if (mode == RenderMode::Diffuse) {
        o.stokes.s0 = o.geo.color;
        o.diffuse_s0 = o.geo.color;
        return o;
    }

#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double A = o.geo.alpha.at(x, y);
            if (A <= 0.0)
                continue;
            const Vec3 n(o.geo.normal.at(x, y, 0), o.geo.normal.at(x, y, 1),
                         o.geo.normal.at(x, y, 2));
            if (n.squaredNorm() < 0.25) // unit when valid, zero when degenerate
                continue;
            const Rgb C = o.geo.color.rgb(x, y);
            const Vec3 v = -cam.ray(x, y).normalized();
            const FresnelTerms f = fresnel_cos(n.dot(v), eta);
            const Azimuth2 az = azimuth2(n);

            const Vec3 refl_world = cam.rotation.transpose() * reflect(v, n);
            const Rgb L_r = scene.environment.sample(refl_world);
            const Rgb spec = A * L_r;

            const Rgb P = f.T_minus * C + f.R_minus * spec;
            o.stokes.s0.set_rgb(x, y, f.T_plus * C + f.R_plus * spec);
            o.stokes.s1.set_rgb(x, y, az.c2 * P);
            o.stokes.s2.set_rgb(x, y, -az.s2 * P);
            o.diffuse_s0.set_rgb(x, y, f.T_plus * C);
            o.specular_s0.set_rgb(x, y, f.R_plus * spec);
        }
    }
    return o;
}

SceneGrads render_backward(const Scene& scene, const Camera& cam,
                           const RenderOutputs& out, const RenderGrads& up,
                           double eta) {
    const int w = cam.width, h = cam.height;
    require_shape(up.g_s0, w, h, 3, "s0");
    require_shape(up.g_s1, w, h, 3, "s1");
    require_shape(up.g_s2, w, h, 3, "s2");
    require_shape(up.g_alpha, w, h, 1, "alpha");
    require_shape(up.g_depth_map, w, h, 1, "depth map");
    require_shape(up.g_normal_map, w, h, 3, "normal map");

    SceneGrads sg(scene.cloud.size(), scene.environment.raw().size());

    Image gC(w, h, 3), gD(w, h, 1), gN(w, h, 3), gA(w, h, 1);

    // Serial over pixels: the cubemap gradient is a cross-pixel sum and this
    // keeps its accumulation order fixed regardless of thread count.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Rgb g0 = rgb_or_zero(up.g_s0, x, y);
            const Rgb g1 = rgb_or_zero(up.g_s1, x, y);
            const Rgb g2 = rgb_or_zero(up.g_s2, x, y);
            const Vec3 gnm(up.g_normal_map.empty()
                               ? Vec3(Vec3::Zero())
                               : Vec3(up.g_normal_map.at(x, y, 0),
                                      up.g_normal_map.at(x, y, 1),
                                      up.g_normal_map.at(x, y, 2)));
            const double gdm = val_or_zero(up.g_depth_map, x, y);

            const double A = out.geo.alpha.at(x, y);
            double gA_total = val_or_zero(up.g_alpha, x, y);
            double gDacc = 0.0;
            if (A > 0.0 && gdm != 0.0) {
                gDacc = gdm / A;
                gA_total -= gdm * out.geo.depth_accum.at(x, y) / (A * A);
            }

            const Vec3 Nacc(out.geo.normal_accum.at(x, y, 0),
                            out.geo.normal_accum.at(x, y, 1),
                            out.geo.normal_accum.at(x, y, 2));
            const double len = Nacc.norm();
            const Vec3 nhat = len > 1e-300 ? Vec3(Nacc / len) : Vec3(Vec3::Zero());
            Vec3 gnhat = gnm;
            Rgb gC_pix = Rgb::Zero();

            if (out.mode == RenderMode::Diffuse) {
                gC_pix += g0;
            } else if (A > 0.0 && len > 1e-300 && nhat.squaredNorm() > 0.25) {
                const Rgb C = out.geo.color.rgb(x, y);
                const Vec3 v = -cam.ray(x, y).normalized();
                const double c = nhat.dot(v);
                const FresnelGrad f = fresnel_cos_grad(c, eta);
                const Azimuth2 az = azimuth2(nhat);

                const Vec3 refl_cam = reflect(v, nhat);
                const Vec3 refl_world = cam.rotation.transpose() * refl_cam;
                const Cubemap::Sample smp =
                    scene.environment.sample_grad(refl_world);
                const Rgb spec = A * smp.value;
                const Rgb P = f.value.T_minus * C + f.value.R_minus * spec;

                const Rgb gP = az.c2 * g1 - az.s2 * g2;
                gC_pix += f.value.T_plus * g0 + f.value.T_minus * gP;
                const Rgb gspec = f.value.R_plus * g0 + f.value.R_minus * gP;

                const double gTp = g0.dot(C);
                const double gTm = gP.dot(C);
                const double gRp = g0.dot(spec);
                const double gRm = gP.dot(spec);
                const double ga2 = g1.dot(P);
                const double gb2 = -g2.dot(P);

                gA_total += gspec.dot(smp.value);
                const Rgb gLr = A * gspec;
                scene.environment.accumulate_raw_grad(smp, gLr, sg.env_raw);
                const Vec3 gdir_world = smp.dval_ddir.transpose() * gLr;
                const Vec3 grefl_cam = cam.rotation * gdir_world;
                gnhat += 2.0 * v * nhat.dot(grefl_cam) + 2.0 * c * grefl_cam;

                const double gc = gTp * f.dT_plus + gTm * f.dT_minus +
                                  gRp * f.dR_plus + gRm * f.dR_minus;
                gnhat += gc * v;

                if (az.valid) {
                    const double r4 = az.rho2 * az.rho2;
                    const double nx = nhat.x(), ny = nhat.y();
                    gnhat.x() += ga2 * 4.0 * nx * ny * ny / r4 +
                                 gb2 * 2.0 * ny * (ny * ny - nx * nx) / r4;
                    gnhat.y() += -ga2 * 4.0 * nx * nx * ny / r4 +
                                 gb2 * 2.0 * nx * (nx * nx - ny * ny) / r4;
                }
            }

            Vec3 gNacc = Vec3::Zero();
            if (len > 1e-300 && gnhat.squaredNorm() > 0.0)
                gNacc = (gnhat - nhat * nhat.dot(gnhat)) / len;

            gC.set_rgb(x, y, gC_pix);
            gD.at(x, y) = gDacc;
            gN.at(x, y, 0) = gNacc.x();
            gN.at(x, y, 1) = gNacc.y();
            gN.at(x, y, 2) = gNacc.z();
            gA.at(x, y) = gA_total;
        }
    }

    const CompositeGrads cg =
        composite_backward(out.projected, out.geo, gC, gD, gN, gA);
    std::vector<double> ndc;
    project_backward(out.projected, scene.cloud, cam, cg, sg.surfels, &ndc);
    for (size_t i = 0; i < out.projected.size(); ++i) {
        const int ci = out.projected[i].index;
        sg.ndc_grad[ci] = ndc[i];
        sg.visible[ci] = 1;
    }
    return sg;
}

} // namespace polgs
