#pragma once

// Image comparison metrics for evaluation. PSNR operates in the display
// domain (tonemapped, clamped to [0,1]) so decibel numbers are comparable
// across exposure levels.

#include <limits>

#include "radsurf/image.hpp"
#include "radsurf/losses.hpp"

namespace radsurf {

inline double mse_display(const Image& a, const Image& b) {
    if (!a.same_size(b)) throw std::invalid_argument("mse: image sizes differ");
    double acc = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        Vec3 d = tonemap(a.pixels[i]) - tonemap(b.pixels[i]);
        acc += d.x * d.x + d.y * d.y + d.z * d.z;
    }
    return acc / (3.0 * static_cast<double>(a.pixels.size()));
}

// PSNR over tone-mapped values quantized to 8-bit steps, matching how
// benchmark numbers are usually computed from written PNGs.
inline double psnr(const Image& a, const Image& b) {
    if (!a.same_size(b)) throw std::invalid_argument("psnr: image sizes differ");
    auto q8 = [](const Vec3& c) {
        Vec3 t = tonemap(c);
        return Vec3{std::round(t.x * 255.0), std::round(t.y * 255.0), std::round(t.z * 255.0)} /
               255.0;
    };
    double acc = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        Vec3 d = q8(a.pixels[i]) - q8(b.pixels[i]);
        acc += d.x * d.x + d.y * d.y + d.z * d.z;
    }
    double m = acc / (3.0 * static_cast<double>(a.pixels.size()));
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

inline double ssim_display(const Image& a, const Image& b) {
    return ssim(tonemap(a), tonemap(b));
}

// Mean angle in degrees between normal maps, over pixels where both are
// nonzero.
inline double mean_normal_angle_deg(const Image& a, const Image& b) {
    if (!a.same_size(b)) throw std::invalid_argument("normal mae: image sizes differ");
    double acc = 0.0;
    size_t valid = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        double na = norm(a.pixels[i]);
        double nb = norm(b.pixels[i]);
        if (na < 1e-6 || nb < 1e-6) continue;
        double c = std::clamp(dot(a.pixels[i], b.pixels[i]) / (na * nb), -1.0, 1.0);
        acc += std::acos(c) * 180.0 / kPi;
        ++valid;
    }
    return valid ? acc / static_cast<double>(valid) : 0.0;
}

// MSE of the first channel; roughness renders replicate the scalar.
inline double mse_scalar(const Image& a, const Image& b) {
    if (!a.same_size(b)) throw std::invalid_argument("mse: image sizes differ");
    double acc = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        double d = a.pixels[i].x - b.pixels[i].x;
        acc += d * d;
    }
    return acc / static_cast<double>(a.pixels.size());
}

}  // namespace radsurf
