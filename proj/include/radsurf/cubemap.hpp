#pragma once

// Environment light as a nearest-texel cubemap. Face order +X,-X,+Y,-Y,+Z,-Z
// with OpenGL-style per-face (s,t) projections; ties on the dominant axis
// resolve X over Y over Z so every direction maps to exactly one texel.

#include <cstdint>
#include <vector>

#include "radsurf/core.hpp"

namespace radsurf {

class Cubemap {
  public:
    static constexpr int kFaces = 6;

    Cubemap() = default;
    explicit Cubemap(int res, Vec3 fill = Vec3{}) : res_(res) {
        if (res <= 0) throw std::invalid_argument("cubemap resolution must be positive");
        texels_.assign(static_cast<size_t>(kFaces) * res * res, fill);
    }

    int res() const { return res_; }
    bool empty() const { return texels_.empty(); }
    size_t texel_count() const { return texels_.size(); }

    size_t flat_index(int face, int x, int y) const {
        return (static_cast<size_t>(face) * res_ + y) * res_ + x;
    }

    Vec3& at(int face, int x, int y) { return texels_[flat_index(face, x, y)]; }
    const Vec3& at(int face, int x, int y) const { return texels_[flat_index(face, x, y)]; }

    std::vector<Vec3>& texels() { return texels_; }
    const std::vector<Vec3>& texels() const { return texels_; }

    struct Texel {
        int face;
        int x;
        int y;
    };

    // Face and texel for a nonzero direction (need not be unit length).
    Texel locate(const Vec3& d) const {
        double ax = std::fabs(d.x), ay = std::fabs(d.y), az = std::fabs(d.z);
        int face;
        double ma, sc, tc;
        if (ax >= ay && ax >= az) {
            ma = ax;
            if (d.x >= 0) { face = 0; sc = -d.z; tc = -d.y; }
            else          { face = 1; sc = d.z;  tc = -d.y; }
        } else if (ay >= az) {
            ma = ay;
            if (d.y >= 0) { face = 2; sc = d.x; tc = d.z; }
            else          { face = 3; sc = d.x; tc = -d.z; }
        } else {
            ma = az;
            if (d.z >= 0) { face = 4; sc = d.x; tc = -d.y; }
            else          { face = 5; sc = -d.x; tc = -d.y; }
        }
        if (ma == 0.0) throw std::invalid_argument("cubemap lookup of zero direction");
        double u = 0.5 * (sc / ma + 1.0);
        double v = 0.5 * (tc / ma + 1.0);
        int x = std::clamp(static_cast<int>(u * res_), 0, res_ - 1);
        int y = std::clamp(static_cast<int>(v * res_), 0, res_ - 1);
        return {face, x, y};
    }

    Vec3 sample(const Vec3& d) const {
        Texel t = locate(d);
        return at(t.face, t.x, t.y);
    }

    size_t flat_index_of(const Vec3& d) const {
        Texel t = locate(d);
        return flat_index(t.face, t.x, t.y);
    }

    // Unit direction through the center of a texel; inverse of locate().
    Vec3 texel_direction(int face, int x, int y) const {
        double sc = 2.0 * (x + 0.5) / res_ - 1.0;
        double tc = 2.0 * (y + 0.5) / res_ - 1.0;
        Vec3 d;
        switch (face) {
            case 0: d = {1.0, -tc, -sc}; break;
            case 1: d = {-1.0, -tc, sc}; break;
            case 2: d = {sc, 1.0, tc}; break;
            case 3: d = {sc, -1.0, -tc}; break;
            case 4: d = {sc, -tc, 1.0}; break;
            case 5: d = {-sc, -tc, -1.0}; break;
            default: throw std::invalid_argument("cubemap face out of range");
        }
        return normalize(d);
    }

    // Solid angle subtended by one texel; exact per-texel quadrature weight.
    double texel_solid_angle(int face, int x, int y) const {
        auto area = [](double u, double v) { return std::atan2(u * v, std::sqrt(u * u + v * v + 1.0)); };
        double u0 = 2.0 * x / res_ - 1.0;
        double u1 = 2.0 * (x + 1) / res_ - 1.0;
        double v0 = 2.0 * y / res_ - 1.0;
        double v1 = 2.0 * (y + 1) / res_ - 1.0;
        (void)face;
        return area(u1, v1) - area(u0, v1) - area(u1, v0) + area(u0, v0);
    }

    void validate() const {
        if (res_ <= 0 || texels_.size() != static_cast<size_t>(kFaces) * res_ * res_)
            throw std::invalid_argument("cubemap has inconsistent storage");
        for (size_t i = 0; i < texels_.size(); ++i) {
            const Vec3& t = texels_[i];
            if (!is_finite(t) || t.x < 0 || t.y < 0 || t.z < 0)
                throw std::invalid_argument(
                    strformat("cubemap texel %zu is negative or non-finite", i));
        }
    }

  private:
    int res_ = 0;
    std::vector<Vec3> texels_;
};

}  // namespace radsurf
