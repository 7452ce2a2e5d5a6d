#include <catch2/catch_amalgamated.hpp>

#include <radsurf/rng.hpp>
#include <radsurf/sh.hpp>

#include <cmath>
#include <vector>

using namespace radsurf;

namespace {

// Independent real spherical harmonics oracle built from associated Legendre
// recurrences without the Condon-Shortley phase:
//   Y_{l,0}  = K(l,0) P_l^0(cos t)
//   Y_{l,m}  = sqrt(2) K(l,m) cos(m p) P_l^m(cos t),  m > 0
//   Y_{l,-m} = sqrt(2) K(l,m) sin(m p) P_l^m(cos t)
double legendre_p(int l, int m, double x) {
    // P_m^m = (2m-1)!! (1-x^2)^{m/2}, then upward recurrence in l.
    double pmm = 1.0;
    double somx2 = std::sqrt(std::max(0.0, 1.0 - x * x));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
        pmm *= fact * somx2;
        fact += 2.0;
    }
    if (l == m) return pmm;
    double pmmp1 = x * (2.0 * m + 1.0) * pmm;
    if (l == m + 1) return pmmp1;
    double pll = 0.0;
    for (int ll = m + 2; ll <= l; ++ll) {
        pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    return pll;
}

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

double sh_oracle(int l, int m, const Vec3& d) {
    double cos_t = d.z;
    double phi = std::atan2(d.y, d.x);
    int am = std::abs(m);
    double k = std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * factorial(l - am) / factorial(l + am));
    double p = legendre_p(l, am, cos_t);
    if (m == 0) return k * p;
    if (m > 0) return std::sqrt(2.0) * k * std::cos(am * phi) * p;
    return std::sqrt(2.0) * k * std::sin(am * phi) * p;
}

}  // namespace

TEST_CASE("sh basis matches the Legendre recurrence oracle") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        Vec3 d = rng.uniform_sphere();
        ShBasis b = sh_basis(d);
        int idx = 0;
        for (int l = 0; l <= kShDegree; ++l)
            for (int m = -l; m <= l; ++m, ++idx) {
                INFO("l=" << l << " m=" << m << " dir=(" << d.x << "," << d.y << "," << d.z
                          << ")");
                CHECK(b[idx] == Catch::Approx(sh_oracle(l, m, d)).margin(1e-12));
            }
        REQUIRE(idx == kShBasisCount);
    }
}

TEST_CASE("sh basis is orthonormal under Monte Carlo integration") {
    Rng rng(78);
    const int n = 200000;
    std::vector<double> gram(kShBasisCount * kShBasisCount, 0.0);
    for (int s = 0; s < n; ++s) {
        ShBasis b = sh_basis(rng.uniform_sphere());
        for (int i = 0; i < kShBasisCount; ++i)
            for (int j = i; j < kShBasisCount; ++j) gram[i * kShBasisCount + j] += b[i] * b[j];
    }
    double w = 4.0 * kPi / n;  // uniform sphere pdf = 1/(4 pi)
    for (int i = 0; i < kShBasisCount; ++i)
        for (int j = i; j < kShBasisCount; ++j) {
            double v = gram[i * kShBasisCount + j] * w;
            INFO("i=" << i << " j=" << j);
            CHECK(v == Catch::Approx(i == j ? 1.0 : 0.0).margin(0.02));
        }
}

TEST_CASE("eval_sh is linear in the coefficients and clamp is exact") {
    ShCoeffs sh{};
    sh.fill(0.0);
    sh[0] = 1.0;                       // red channel constant term
    sh[kShBasisCount + 2] = -3.0;      // green channel Y_{1,0}
    Vec3 up{0, 0, 1};
    Vec3 v = eval_sh(sh, up);
    CHECK(v.x == Catch::Approx(0.28209479177387814));
    CHECK(v.y == Catch::Approx(-3.0 * 0.4886025119029199));
    CHECK(v.z == 0.0);
    Vec3 c = eval_sh_clamped(sh, up);
    CHECK(c.x == v.x);
    CHECK(c.y == 0.0);

    // Doubling coefficients doubles the raw value.
    for (double& x : sh) x *= 2.0;
    Vec3 v2 = eval_sh(sh, up);
    CHECK(v2.x == Catch::Approx(2.0 * v.x));
    CHECK(v2.y == Catch::Approx(2.0 * v.y));
}

TEST_CASE("band-0 coefficient equals the mean radiance over the sphere") {
    ShCoeffs sh{};
    sh.fill(0.0);
    Rng rng(5);
    for (int i = 0; i < kShBasisCount; ++i) sh[i] = rng.uniform(-1.0, 1.0);
    double acc = 0.0;
    const int n = 100000;
    Rng dirs(6);
    for (int s = 0; s < n; ++s) acc += eval_sh(sh, dirs.uniform_sphere()).x;
    double mean = acc / n;
    // All bands above zero integrate to zero over the sphere.
    CHECK(mean == Catch::Approx(sh[0] * 0.28209479177387814).margin(2e-3));
}
