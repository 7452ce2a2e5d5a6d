#include <catch2/catch_amalgamated.hpp>

#include <radsurf/oracle.hpp>

using namespace radsurf;
using namespace radsurf::oracle;

namespace {

// Two coaxial parallel rectangles, full sides (su, sv), separated by dist.
// Patch 0 faces +z at z = 0, patch 1 faces -z at z = dist.
PatchScene parallel_pair(double su, double sv, double dist) {
    PatchScene ps;
    RectPatch a;
    a.center = {0, 0, 0};
    a.axis_u = {1, 0, 0};
    a.axis_v = {0, 1, 0};
    a.half_u = su / 2;
    a.half_v = sv / 2;
    RectPatch b = a;
    b.center = {0, 0, dist};
    b.axis_u = {-1, 0, 0};  // normal = u x v = (0,0,-1), same footprint as a
    b.axis_v = {0, 1, 0};
    ps.patches = {a, b};
    return ps;
}

// Closed form for directly opposed parallel rectangles.
double analytic_parallel_ff(double a, double b, double c) {
    double x = a / c, y = b / c;
    double t1 = std::log(std::sqrt((1 + x * x) * (1 + y * y) / (1 + x * x + y * y)));
    double t2 = x * std::sqrt(1 + y * y) * std::atan(x / std::sqrt(1 + y * y));
    double t3 = y * std::sqrt(1 + x * x) * std::atan(y / std::sqrt(1 + x * x));
    double t4 = x * std::atan(x) + y * std::atan(y);
    return 2.0 / (kPi * x * y) * (t1 + t2 + t3 - t4);
}

}  // namespace

TEST_CASE("rectangle intersection basics") {
    PatchScene ps = parallel_pair(1, 1, 2);
    Ray ray{{0.2, -0.1, -1}, {0, 0, 1}};
    auto hit = intersect_rects(ps, ray);
    REQUIRE(hit);
    CHECK(hit->patch == 0);
    CHECK(hit->t == Catch::Approx(1.0));
    CHECK(hit->point.x == Catch::Approx(0.2));

    auto second = intersect_rects(ps, ray, 0);
    REQUIRE(second);
    CHECK(second->patch == 1);
    CHECK(second->t == Catch::Approx(3.0));

    Ray miss{{2.0, 0, -1}, {0, 0, 1}};  // outside both rectangles
    CHECK_FALSE(intersect_rects(ps, miss));
    Ray behind{{0, 0, -1}, {0, 0, -1}};
    CHECK_FALSE(intersect_rects(ps, behind));
}

TEST_CASE("form factor matches the analytic parallel-plate value") {
    PatchScene ps = parallel_pair(1, 1, 1);
    double want = analytic_parallel_ff(1, 1, 1);
    CHECK(want == Catch::Approx(0.19982489569838746));
    double got = form_factor(ps, 0, 1, 32);
    CHECK(got == Catch::Approx(want).epsilon(0.005));
    // A second geometry: 2 x 1 rectangle pair at distance 0.5.
    PatchScene wide = parallel_pair(2, 1, 0.5);
    CHECK(form_factor(wide, 0, 1, 48) ==
          Catch::Approx(analytic_parallel_ff(4, 2, 1)).epsilon(0.01));
}

TEST_CASE("form factors obey reciprocity") {
    PatchScene ps = parallel_pair(1, 1, 1);
    ps.patches[1].half_u = 0.25;  // shrink the receiver
    double f01 = form_factor(ps, 0, 1, 40);
    double f10 = form_factor(ps, 1, 0, 40);
    CHECK(ps.patches[0].area() * f01 ==
          Catch::Approx(ps.patches[1].area() * f10).epsilon(1e-6));
}

TEST_CASE("occluders remove form-factor coupling") {
    PatchScene ps = parallel_pair(1, 1, 2);
    double open = form_factor(ps, 0, 1, 16);
    RectPatch blocker;
    blocker.center = {0, 0, 1};
    blocker.axis_u = {1, 0, 0};
    blocker.axis_v = {0, 1, 0};
    blocker.half_u = blocker.half_v = 5.0;  // fully blocks the gap
    ps.patches.push_back(blocker);
    CHECK(open > 0.0);
    CHECK(form_factor(ps, 0, 1, 16) == 0.0);
}

TEST_CASE("zero albedo radiosity returns pure emission") {
    PatchScene ps = parallel_pair(1, 1, 1);
    ps.patches[0].albedo = {0, 0, 0};
    ps.patches[1].albedo = {0, 0, 0};
    ps.patches[0].emission = {2.0, 0.5, 0.1};
    RadiosityResult r = radiosity_reference(ps, 4);
    CHECK(r.patch_radiance[0].x == Catch::Approx(2.0).margin(1e-12));
    CHECK(r.patch_radiance[0].y == Catch::Approx(0.5).margin(1e-12));
    CHECK(r.patch_radiance[1].x == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("two-patch radiosity reproduces the geometric series") {
    PatchScene ps = parallel_pair(1, 1, 1);
    ps.patches[0].albedo = ps.patches[1].albedo = {0.8, 0.8, 0.8};
    ps.patches[0].emission = {1.0, 1.0, 1.0};
    RadiosityResult r = radiosity_reference(ps, 16, 1e-10);
    double f = analytic_parallel_ff(1, 1, 1);
    double rho = 0.8;
    double l1 = rho * f / (1.0 - rho * rho * f * f);
    double l0 = 1.0 + rho * f * l1;
    CHECK(r.patch_radiance[1].x == Catch::Approx(l1).epsilon(0.02));
    CHECK(r.patch_radiance[0].x == Catch::Approx(l0).epsilon(0.02));
    CHECK(r.iterations > 1);
    CHECK(r.element_radiance.size() == 2u * 16 * 16);
}

TEST_CASE("single patch under uniform light reflects its albedo exactly") {
    PatchScene ps;
    RectPatch p;
    p.center = {0, 0, 0};
    p.axis_u = {1, 0, 0};
    p.axis_v = {0, 1, 0};
    p.albedo = {0.6, 0.3, 0.9};
    ps.patches = {p};
    Cubemap env(4, Vec3{2.0, 2.0, 2.0});
    ps.env = &env;
    RadiosityResult r = radiosity_reference(ps, 2);
    // Cosine-weighted mean of a constant environment is the constant itself,
    // so every sample contributes exactly albedo * 2.
    CHECK(r.patch_radiance[0].x == Catch::Approx(1.2).margin(1e-12));
    CHECK(r.patch_radiance[0].y == Catch::Approx(0.6).margin(1e-12));
    CHECK(r.patch_radiance[0].z == Catch::Approx(1.8).margin(1e-12));
}

TEST_CASE("path tracing a lone patch under uniform light converges to albedo") {
    PatchScene ps;
    RectPatch p;
    p.center = {0, 0, 0};
    p.axis_u = {1, 0, 0};
    p.axis_v = {0, 1, 0};
    p.albedo = {0.5, 0.5, 0.5};
    ps.patches = {p};
    Cubemap env(2, Vec3{1, 1, 1});
    ps.env = &env;
    Vec3 wo = normalize(Vec3{0.1, 0.2, 1.0});
    Vec3 acc;
    const int n = 100000;
    Rng rng(99);
    for (int i = 0; i < n; ++i) acc += path_trace(ps, 0, {0.1, 0.0, 0.0}, wo, 1, rng);
    Vec3 mean = acc / static_cast<double>(n);
    CHECK(mean.x == Catch::Approx(0.5).epsilon(0.02));
    // Back side is black.
    Rng rng2(100);
    Vec3 back = path_trace(ps, 0, {0, 0, 0}, {0, 0, -1}, 3, rng2);
    CHECK(back.x == 0.0);
}

TEST_CASE("incident reference falls back to the environment on miss") {
    PatchScene ps = parallel_pair(1, 1, 1);
    ps.patches[1].emission = {3, 3, 3};
    Cubemap env(2, Vec3{0.25, 0.5, 0.75});
    ps.env = &env;
    Rng rng(101);
    Vec3 escaped = incident_reference(ps, {5, 5, 0.5}, {0, 0, 1}, 2, rng);
    CHECK(escaped.y == 0.5);
    Rng rng2(102);
    Vec3 toward = incident_reference(ps, {0, 0, 0.5}, {0, 0, 1}, 0, rng2, 0);
    CHECK(toward.x == 3.0);  // depth 0: emission only
}

TEST_CASE("reference renders are thread invariant") {
    PatchScene ps = parallel_pair(1, 1, 1);
    ps.patches[0].emission = {1, 0.5, 0.25};
    ps.patches[0].albedo = ps.patches[1].albedo = {0.5, 0.5, 0.5};
    Cubemap env(2, Vec3{0.3, 0.3, 0.3});
    ps.env = &env;
    Camera cam = Camera::look_at({0, -2, 0.5}, {0, 0, 0.5}, {0, 0, 1}, 60, 8, 6);
    Image a = render_reference(ps, cam, 4, 2, 5, 1);
    Image b = render_reference(ps, cam, 4, 2, 5, 3);
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        CHECK(a.pixels[i].x == b.pixels[i].x);
        CHECK(a.pixels[i].y == b.pixels[i].y);
        CHECK(a.pixels[i].z == b.pixels[i].z);
    }
}

TEST_CASE("spd solver inverts a random system") {
    Rng rng(103);
    const int n = 6;
    std::vector<double> m(n * n), a(n * n, 0.0);
    for (auto& v : m) v = rng.uniform(-1, 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = i == j ? 0.5 : 0.0;  // M^T M + 0.5 I
            for (int k = 0; k < n; ++k) acc += m[k * n + i] * m[k * n + j];
            a[i * n + j] = acc;
        }
    std::vector<double> x_true(n), b(n, 0.0);
    for (auto& v : x_true) v = rng.uniform(-2, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) b[i] += a[i * n + j] * x_true[j];
    std::vector<double> x = solve_spd(a, b, n);
    for (int i = 0; i < n; ++i) CHECK(x[i] == Catch::Approx(x_true[i]).margin(1e-9));

    std::vector<double> indef(4, 0.0);
    indef[0] = 1.0;
    indef[3] = -1.0;  // [[1,0],[0,-1]]
    CHECK_THROWS_AS(solve_spd(indef, {1.0, 1.0}, 2), std::runtime_error);
}

TEST_CASE("finite difference helper recovers polynomial derivatives") {
    double x = 2.0;
    double d = finite_diff([&] { return x * x * x; }, [&] { return x; },
                           [&](double v) { x = v; }, 1e-5);
    CHECK(d == Catch::Approx(12.0).epsilon(1e-8));
    CHECK(x == 2.0);  // restored
}
