#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polgs/dataset.hpp"
#include "polgs/stokes.hpp"

namespace polgs {

// Smooth analytic environment radiance: a base level plus phong-like lobes.
// Used by the reference path tracer; the engine learns its own cubemap and
// never sees this representation.
struct ProceduralEnv {
    Rgb base = Rgb(0.25, 0.25, 0.3);
    struct Lobe {
        Vec3 dir = Vec3(0, 0, 1); // unit
        Rgb amplitude = Rgb(1, 1, 1);
        double power = 8.0;
    };
    std::vector<Lobe> lobes;

    Rgb eval(const Vec3& dir) const;
    static ProceduralEnv default_env();
};

enum class SurfaceKind { Sphere, Plane, Superellipsoid };

// Analytic test scene for the reference renderer: one implicit surface, a
// spatially varying albedo, a dielectric interface and a rough specular lobe.
struct SyntheticScene {
    SurfaceKind kind = SurfaceKind::Sphere;
    Vec3 center = Vec3::Zero();
    double radius = 1.0;                  // sphere radius / size scale
    Vec3 half_axes = Vec3(1.0, 0.8, 0.6); // superellipsoid semi-axes
    double se_exponent = 4.0;             // superellipsoid sharpness
    Vec3 plane_normal = Vec3(0, 0, 1);
    double plane_extent = 1.2;            // half-width of the plane patch
    double eta = 1.5;
    double roughness = 0.25;              // GGX alpha
    Rgb albedo = Rgb(0.55, 0.35, 0.25);
    Rgb albedo2 = Rgb(0.2, 0.3, 0.5);     // checker partner (ignored if !checker)
    bool checker = false;
    ProceduralEnv environment = ProceduralEnv::default_env();
    int samples = 1024;
    uint64_t seed = 1234;
};

struct SurfaceHit {
    bool hit = false;
    double t = 0.0;
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero(); // unit, outward
};

// Analytic/bisected ray intersection against the scene surface.
SurfaceHit intersect(const SyntheticScene& scene, const Vec3& origin,
                     const Vec3& dir);

// Stokes composition through explicit Mueller matrices: unpolarized diffuse
// radiance through the transmission matrix plus specular radiance through
// the reflection matrix, both rotated from the normal's azimuth frame into
// the camera frame. Independent of the engine's direct composition formula.
StokesPixel mueller_compose(const Rgb& diffuse_radiance,
                            const Rgb& specular_radiance, double cos_theta,
                            double eta, double phi);

// Physically-based single-point radiances at a surface hit, integrated by
// Monte Carlo: cosine-weighted sampling for the transmitted diffuse term and
// GGX half-vector importance sampling with Smith shadowing for the specular
// lobe (Fresnel excluded — it is applied by the Mueller stage).
struct PointRadiance {
    Rgb diffuse = Rgb::Zero();  // includes albedo and incident transmission
    Rgb specular = Rgb::Zero(); // microfacet-weighted environment radiance
};
PointRadiance integrate_point(const SyntheticScene& scene, const Vec3& point,
                              const Vec3& normal, const Vec3& view_world,
                              uint64_t pixel_seed);

// Full reference render of one view; mask is exact geometric coverage and
// ground-truth camera-space normals/depth are attached.
PolarizedView render_oracle(const SyntheticScene& scene, const Camera& camera);

// Ring of cameras around the scene, each rendered by the reference path and
// written out in the standard dataset layout. Deterministic for a fixed seed.
void make_synthetic_dataset(const SyntheticScene& scene, int n_views,
                            int resolution, uint64_t seed,
                            const std::string& out_dir);

} // namespace polgs
