#include "polgs/stokes.hpp"

#include "polgs/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace polgs {
namespace {

// cos(pi/2 - 1e-6): the grazing clamp expressed on the cosine axis.
const double kMinCos = std::sin(1e-6);

struct FresnelRaw {
    double r_s, r_p;       // amplitude coefficients
    double dr_s, dr_p;     // d/d(cos theta)
};

FresnelRaw fresnel_raw(double c, double eta) {
    // cos of the refraction angle; eta > 1 keeps the radicand positive.
    const double ct = std::sqrt(1.0 - (1.0 - c * c) / (eta * eta));
    const double dct = c / (eta * eta * ct);

    FresnelRaw out;
    {
        const double num = c - eta * ct, den = c + eta * ct;
        out.r_s = num / den;
        const double dnum = 1.0 - eta * dct, dden = 1.0 + eta * dct;
        out.dr_s = (dnum * den - num * dden) / (den * den);
    }
    {
        const double num = eta * c - ct, den = eta * c + ct;
        out.r_p = num / den;
        const double dnum = eta - dct, dden = eta + dct;
        out.dr_p = (dnum * den - num * dden) / (den * den);
    }
    return out;
}

} // namespace

FresnelTerms fresnel(double theta, double eta) {
    const double clamped = std::min(theta, kPi / 2.0 - 1e-6);
    return fresnel_cos(std::cos(clamped), eta);
}

FresnelTerms fresnel_cos(double cos_theta, double eta) {
    return fresnel_cos_grad(cos_theta, eta).value;
}

FresnelGrad fresnel_cos_grad(double cos_theta, double eta) {
    if (!(eta > 1.0))
        throw std::invalid_argument("refractive index must exceed 1");
    const bool clamped = cos_theta < kMinCos || cos_theta > 1.0;
    const double c = std::min(std::max(cos_theta, kMinCos), 1.0);

    const FresnelRaw raw = fresnel_raw(c, eta);
    const double R_s = raw.r_s * raw.r_s;
    const double R_p = raw.r_p * raw.r_p;
    const double dR_s = clamped ? 0.0 : 2.0 * raw.r_s * raw.dr_s;
    const double dR_p = clamped ? 0.0 : 2.0 * raw.r_p * raw.dr_p;

    FresnelGrad g;
    g.value.R_s = R_s;
    g.value.R_p = R_p;
    g.value.R_plus = 0.5 * (R_s + R_p);
    g.value.R_minus = 0.5 * (R_s - R_p);
    // Energy transmission T = 1 - R, so T+ = 1 - R+ and T- = -R-.
    g.value.T_plus = 1.0 - g.value.R_plus;
    g.value.T_minus = -g.value.R_minus;
    g.dR_plus = 0.5 * (dR_s + dR_p);
    g.dR_minus = 0.5 * (dR_s - dR_p);
    g.dT_plus = -g.dR_plus;
    g.dT_minus = -g.dR_minus;
    return g;
}

Azimuth azimuth_of_normal(const Vec3& n) {
    Azimuth a;
    if (std::abs(n.x()) < 1e-8 && std::abs(n.y()) < 1e-8) {
        a.degenerate = true;
        return a;
    }
    a.phi = std::atan2(n.y(), n.x());
    return a;
}

StokesPixel compose_stokes(const ShadingInputs& in, const FresnelTerms& fres,
                           const Rgb& specular_radiance) {
    const double c2n = std::cos(2.0 * in.phi_n);
    const double s2n = std::sin(2.0 * in.phi_n);
    const double c2h = std::cos(2.0 * in.phi_h);
    const double s2h = std::sin(2.0 * in.phi_h);

    StokesPixel out;
    out.s0 = fres.T_plus * in.diffuse_color + fres.R_plus * specular_radiance;
    out.s1 = fres.T_minus * c2n * in.diffuse_color +
             fres.R_minus * c2h * specular_radiance;
    out.s2 = -fres.T_minus * s2n * in.diffuse_color -
             fres.R_minus * s2h * specular_radiance;
    return out;
}

Vec3 reflect(const Vec3& v, const Vec3& n) {
    return 2.0 * v.dot(n) * n - v;
}

PolarizerQuad quad_from_stokes(const StokesPixel& s) {
    PolarizerQuad q;
    q.i0 = 0.5 * (s.s0 + s.s1);
    q.i45 = 0.5 * (s.s0 + s.s2);
    q.i90 = 0.5 * (s.s0 - s.s1);
    q.i135 = 0.5 * (s.s0 - s.s2);
    return q;
}

Rgb polarizer_intensity(const StokesPixel& s, double angle) {
    return 0.5 * (s.s0 + std::cos(2.0 * angle) * s.s1 +
                  std::sin(2.0 * angle) * s.s2);
}

StokesImage stokes_from_quad(const Image& i0, const Image& i45,
                             const Image& i90, const Image& i135) {
    if (!i0.same_shape(i45) || !i0.same_shape(i90) || !i0.same_shape(i135))
        throw DataError("polarizer quad images have mismatched shapes");

    StokesImage out;
    out.s0 = Image(i0.width(), i0.height(), i0.channels());
    out.s1 = out.s0;
    out.s2 = out.s0;
    const int n = i0.width() * i0.height() * i0.channels();
    const double* a = i0.data();
    const double* b = i45.data();
    const double* c = i90.data();
    const double* d = i135.data();
    for (int i = 0; i < n; ++i) {
        out.s0.data()[i] = 0.5 * (a[i] + b[i] + c[i] + d[i]);
        out.s1.data()[i] = a[i] - c[i];
        out.s2.data()[i] = b[i] - d[i];
    }
    return out;
}

} // namespace polgs
