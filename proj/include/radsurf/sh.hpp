#pragma once

// Real spherical harmonics up to degree 3 (16 basis functions), standard
// real-valued convention: band 0 is the constant 1/(2*sqrt(pi)).
// Coefficient blocks are stored channel-major: sh[ch * 16 + i].

#include <array>

#include "radsurf/core.hpp"

namespace radsurf {

inline constexpr int kShDegree = 3;
inline constexpr int kShBasisCount = 16;
inline constexpr int kShCoeffsPerSurfel = 3 * kShBasisCount;

using ShBasis = std::array<double, kShBasisCount>;
using ShCoeffs = std::array<double, kShCoeffsPerSurfel>;

// Basis values at unit direction d, ordered (l,m) = (0,0), (1,-1), (1,0),
// (1,1), (2,-2) ... (3,3).
inline ShBasis sh_basis(const Vec3& d) {
    const double x = d.x, y = d.y, z = d.z;
    const double xx = x * x, yy = y * y, zz = z * z;
    ShBasis b;
    b[0] = 0.28209479177387814;
    b[1] = 0.4886025119029199 * y;
    b[2] = 0.4886025119029199 * z;
    b[3] = 0.4886025119029199 * x;
    b[4] = 1.0925484305920792 * x * y;
    b[5] = 1.0925484305920792 * y * z;
    b[6] = 0.31539156525252005 * (3.0 * zz - 1.0);
    b[7] = 1.0925484305920792 * x * z;
    b[8] = 0.5462742152960396 * (xx - yy);
    b[9] = 0.5900435899266435 * y * (3.0 * xx - yy);
    b[10] = 2.890611442640554 * x * y * z;
    b[11] = 0.4570457994644658 * y * (5.0 * zz - 1.0);
    b[12] = 0.3731763325901154 * z * (5.0 * zz - 3.0);
    b[13] = 0.4570457994644658 * x * (5.0 * zz - 1.0);
    b[14] = 1.445305721320277 * z * (xx - yy);
    b[15] = 0.5900435899266435 * x * (xx - 3.0 * yy);
    return b;
}

// Raw (unclamped) radiance lookup; may be negative for untrained coefficients.
inline Vec3 eval_sh(const ShCoeffs& sh, const ShBasis& basis) {
    Vec3 out;
    for (int ch = 0; ch < 3; ++ch) {
        const double* c = sh.data() + ch * kShBasisCount;
        double acc = 0.0;
        for (int i = 0; i < kShBasisCount; ++i) acc += basis[i] * c[i];
        out[ch] = acc;
    }
    return out;
}

inline Vec3 eval_sh(const ShCoeffs& sh, const Vec3& dir) { return eval_sh(sh, sh_basis(dir)); }

// Rendering lookup: negative channels clamp to zero (subgradient zero there).
inline Vec3 eval_sh_clamped(const ShCoeffs& sh, const ShBasis& basis) {
    Vec3 v = eval_sh(sh, basis);
    return {std::max(0.0, v.x), std::max(0.0, v.y), std::max(0.0, v.z)};
}

inline Vec3 eval_sh_clamped(const ShCoeffs& sh, const Vec3& dir) {
    return eval_sh_clamped(sh, sh_basis(dir));
}

}  // namespace radsurf
