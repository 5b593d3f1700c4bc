#pragma once

#include "polgs/types.hpp"
#include "polgs/image.hpp"

namespace polgs {

// Linear-polarization Stokes components of one pixel, per color channel.
// s3 (circular) is identically zero under the unpolarized-illumination model
// and is not carried.
struct StokesPixel {
    Rgb s0 = Rgb::Zero();
    Rgb s1 = Rgb::Zero();
    Rgb s2 = Rgb::Zero();
};

// Half-sum (+) and half-difference (-) of the s/p Fresnel terms. The minus
// terms generate polarization; both vanish at normal incidence.
struct FresnelTerms {
    double T_plus = 0.0;
    double T_minus = 0.0;
    double R_plus = 0.0;
    double R_minus = 0.0;
    // Raw s/p reflectances, kept for the Mueller cross terms and tests.
    double R_s = 0.0;
    double R_p = 0.0;
};

// Fresnel terms at incidence angle theta for relative refractive index
// eta > 1. Transmission uses energy terms (T = 1 - R) with the same +/-
// convention. Incidence at or past grazing is clamped to pi/2 - 1e-6.
FresnelTerms fresnel(double theta, double eta);

// Same computation parameterized by cos(theta); this is the engine path, it
// avoids the d(theta)/d(normal) singularity at normal incidence.
FresnelTerms fresnel_cos(double cos_theta, double eta);

// fresnel_cos together with derivatives of all four +/- terms w.r.t.
// cos(theta). Derivative is zero where the grazing clamp is active.
struct FresnelGrad {
    FresnelTerms value;
    double dT_plus = 0.0;
    double dT_minus = 0.0;
    double dR_plus = 0.0;
    double dR_minus = 0.0;
};
FresnelGrad fresnel_cos_grad(double cos_theta, double eta);

// Azimuth of a camera-space normal, measured from the camera x-axis (the 0
// degree polarizer axis). Near the optical axis the azimuth is undefined;
// it is reported as 0 with the degenerate flag set (the polarized terms
// vanish there anyway since T- = R- = 0 at normal incidence).
struct Azimuth {
    double phi = 0.0;
    bool degenerate = false;
};
Azimuth azimuth_of_normal(const Vec3& n);

// Per-pixel shading inputs for the final Stokes composition.
struct ShadingInputs {
    Vec3 view = Vec3::UnitZ();     // unit, toward the camera
    Vec3 normal = Vec3::UnitZ();   // unit, camera space
    Rgb diffuse_color = Rgb::Zero();
    double phi_n = 0.0;
    double phi_h = 0.0;            // equal to phi_n under the model's simplification
};

// Final composition: diffuse color through the transmission column plus
// specular radiance through the reflection column, rotated by twice the
// azimuth.
StokesPixel compose_stokes(const ShadingInputs& in, const FresnelTerms& fres,
                           const Rgb& specular_radiance);

// Mirror reflection of the view direction about the normal.
Vec3 reflect(const Vec3& v, const Vec3& n);

// Quad of polarizer-filtered intensities from Stokes components (Malus
// relation); angles are 0/45/90/135 degrees.
struct PolarizerQuad {
    Rgb i0, i45, i90, i135;
};
PolarizerQuad quad_from_stokes(const StokesPixel& s);

// Synthesis for an arbitrary polarizer angle (radians).
Rgb polarizer_intensity(const StokesPixel& s, double angle);

// Channel-wise Stokes recovery from four co-registered polarizer images.
// Throws DataError if the shapes differ.
StokesImage stokes_from_quad(const Image& i0, const Image& i45,
                             const Image& i90, const Image& i135);

} // namespace polgs
