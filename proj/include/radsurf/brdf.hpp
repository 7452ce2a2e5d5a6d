#pragma once

// Simplified Disney BRDF: Lambertian diffuse plus an isotropic GGX specular
// lobe with Smith separable shadowing and scalar Schlick Fresnel (F0 = 0.04).
// The microfacet alpha is roughness squared.

#include "radsurf/core.hpp"

namespace radsurf {

inline constexpr double kFresnelF0 = 0.04;
inline constexpr double kBrdfDenomGuard = 1e-6;

// GGX normal distribution, evaluated at cos(theta_h) = n . h.
inline double ggx_d(double n_dot_h, double alpha_g) {
    double a2 = alpha_g * alpha_g;
    double d = n_dot_h * n_dot_h * (a2 - 1.0) + 1.0;
    return a2 / std::max(kPi * d * d, kBrdfDenomGuard);
}

// Smith separable masking term for one direction.
inline double smith_g1(double n_dot_v, double alpha_g) {
    double a2 = alpha_g * alpha_g;
    double denom = n_dot_v + std::sqrt(a2 + (1.0 - a2) * n_dot_v * n_dot_v);
    return 2.0 * n_dot_v / std::max(denom, kBrdfDenomGuard);
}

inline double fresnel_schlick(double cos_theta) {
    double m = std::clamp(1.0 - cos_theta, 0.0, 1.0);
    double m2 = m * m;
    return kFresnelF0 + (1.0 - kFresnelF0) * m2 * m2 * m;
}

struct BrdfValue {
    Vec3 diffuse;     // albedo / pi, zero outside the upper hemisphere
    double specular;  // scalar GGX lobe, applied to all channels
    Vec3 total() const { return diffuse + Vec3{specular, specular, specular}; }
};

// wi, wo unit directions pointing away from the surface; n unit normal.
// Returns zero when either direction lies below the surface.
inline BrdfValue eval_brdf(const Vec3& albedo, double roughness, const Vec3& n, const Vec3& wo,
                           const Vec3& wi) {
    BrdfValue out{};
    double n_i = dot(n, wi);
    double n_o = dot(n, wo);
    if (n_i <= 0.0 || n_o <= 0.0) return out;
    out.diffuse = albedo / kPi;
    Vec3 h = normalize(wi + wo);
    double n_h = std::max(dot(n, h), 0.0);
    double h_o = std::max(dot(h, wo), 0.0);
    double alpha_g = roughness * roughness;
    double d = ggx_d(n_h, alpha_g);
    double f = fresnel_schlick(h_o);
    double g = smith_g1(n_i, alpha_g) * smith_g1(n_o, alpha_g);
    out.specular = d * f * g / std::max(4.0 * n_i * n_o, kBrdfDenomGuard);
    return out;
}

// Same evaluation plus d(specular)/d(roughness), computed analytically
// through D and both Smith factors (alpha_g = roughness^2).
inline BrdfValue eval_brdf_rough_grad(const Vec3& albedo, double roughness, const Vec3& n,
                                      const Vec3& wo, const Vec3& wi, double& d_spec_d_rough) {
    BrdfValue out{};
    d_spec_d_rough = 0.0;
    double n_i = dot(n, wi);
    double n_o = dot(n, wo);
    if (n_i <= 0.0 || n_o <= 0.0) return out;
    out.diffuse = albedo / kPi;
    Vec3 h = normalize(wi + wo);
    double n_h = std::max(dot(n, h), 0.0);
    double h_o = std::max(dot(h, wo), 0.0);
    double alpha_g = roughness * roughness;
    double a2 = alpha_g * alpha_g;

    double q = n_h * n_h * (a2 - 1.0) + 1.0;
    double d_denom = kPi * q * q;
    bool d_guarded = d_denom < kBrdfDenomGuard;
    double d = a2 / std::max(d_denom, kBrdfDenomGuard);
    // dD/d(a2) = (q - 2 * a2 * n_h^2) / (pi * q^3)
    double dd_da2 = d_guarded ? 0.0 : (q - 2.0 * a2 * n_h * n_h) / (kPi * q * q * q);

    auto g1 = [&](double c, double& dg1_da2) {
        double s = std::sqrt(a2 + (1.0 - a2) * c * c);
        double denom = c + s;
        if (denom < kBrdfDenomGuard) {
            dg1_da2 = 0.0;
            return 2.0 * c / kBrdfDenomGuard;
        }
        double val = 2.0 * c / denom;
        // ds/d(a2) = (1 - c^2) / (2 s)
        double ds = s > 0.0 ? (1.0 - c * c) / (2.0 * s) : 0.0;
        dg1_da2 = -val / denom * ds;
        return val;
    };
    double dgi_da2, dgo_da2;
    double g_i = g1(n_i, dgi_da2);
    double g_o = g1(n_o, dgo_da2);
    double f = fresnel_schlick(h_o);

    double denom = std::max(4.0 * n_i * n_o, kBrdfDenomGuard);
    // Grouped exactly like eval_brdf so both paths return the same bits.
    out.specular = d * f * (g_i * g_o) / denom;
    double dspec_da2 = f * (dd_da2 * g_i * g_o + d * dgi_da2 * g_o + d * g_i * dgo_da2) / denom;
    // Every alpha_g dependence enters through a2 = roughness^4.
    d_spec_d_rough = dspec_da2 * 4.0 * roughness * roughness * roughness;
    return out;
}

}  // namespace radsurf
