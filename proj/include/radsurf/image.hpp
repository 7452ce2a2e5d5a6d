#pragma once

// Linear RGB raster, row-major, top-down.

#include <vector>

#include "radsurf/core.hpp"

namespace radsurf {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<Vec3> pixels;

    Image() = default;
    Image(int w, int h, Vec3 fill = Vec3{}) : width(w), height(h) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("image size must be positive");
        pixels.assign(static_cast<size_t>(w) * h, fill);
    }

    size_t index(int x, int y) const { return static_cast<size_t>(y) * width + x; }
    Vec3& at(int x, int y) { return pixels[index(x, y)]; }
    const Vec3& at(int x, int y) const { return pixels[index(x, y)]; }
    size_t pixel_count() const { return pixels.size(); }

    bool same_size(const Image& o) const { return width == o.width && height == o.height; }
};

// Display transform used for PNG output and PSNR: clamp to [0,1], gamma 1/2.2.
inline Vec3 tonemap(const Vec3& c) {
    Vec3 v = clamp01(c);
    return {std::pow(v.x, 1.0 / 2.2), std::pow(v.y, 1.0 / 2.2), std::pow(v.z, 1.0 / 2.2)};
}

inline Image tonemap(const Image& img) {
    Image out(img.width, img.height);
    for (size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = tonemap(img.pixels[i]);
    return out;
}

}  // namespace radsurf
