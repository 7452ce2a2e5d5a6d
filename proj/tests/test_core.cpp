#include <catch2/catch_amalgamated.hpp>

#include <radsurf/core.hpp>
#include <radsurf/rng.hpp>

using namespace radsurf;

TEST_CASE("vec3 arithmetic") {
    Vec3 a{1, 2, 3}, b{4, -5, 6};
    CHECK((a + b).x == 5.0);
    CHECK((a - b).y == 7.0);
    CHECK(dot(a, b) == 4.0 - 10.0 + 18.0);
    Vec3 c = cross(Vec3{1, 0, 0}, Vec3{0, 1, 0});
    CHECK(c.x == 0.0);
    CHECK(c.y == 0.0);
    CHECK(c.z == 1.0);
    CHECK(norm(Vec3{3, 4, 0}) == Catch::Approx(5.0));
    CHECK(max_component(b) == 6.0);
    CHECK(mean_component(a) == Catch::Approx(2.0));
}

TEST_CASE("normalize and unit checks") {
    Vec3 v = normalize(Vec3{1, 2, -2});
    CHECK(norm(v) == Catch::Approx(1.0));
    CHECK(is_unit(v));
    CHECK_FALSE(is_unit(Vec3{1, 1, 0}));
    Mat3 id;
    CHECK(is_orthonormal(id));
    Mat3 skew = Mat3::from_cols(Vec3{1, 0, 0}, normalize(Vec3{1, 1, 0}), Vec3{0, 0, 1});
    CHECK_FALSE(is_orthonormal(skew));
}

TEST_CASE("build_onb produces a right-handed orthonormal frame") {
    Rng rng(42);
    for (int i = 0; i < 100; ++i) {
        Vec3 n = rng.uniform_sphere();
        Vec3 t, b;
        build_onb(n, t, b);
        CHECK(std::fabs(dot(t, n)) < 1e-12);
        CHECK(std::fabs(dot(b, n)) < 1e-12);
        CHECK(std::fabs(dot(t, b)) < 1e-12);
        CHECK(norm(t) == Catch::Approx(1.0).margin(1e-12));
        Vec3 rebuilt = cross(t, b);
        CHECK(norm(rebuilt - n) < 1e-9);
    }
}

TEST_CASE("reflect_about mirrors across the axis") {
    Vec3 n{0, 0, 1};
    Vec3 v = normalize(Vec3{1, 0, 1});
    Vec3 r = reflect_about(v, n);
    CHECK(r.x == Catch::Approx(-v.x));
    CHECK(r.y == Catch::Approx(0.0).margin(1e-15));
    CHECK(r.z == Catch::Approx(v.z));
    CHECK(norm(r) == Catch::Approx(1.0));
}

TEST_CASE("mat3 column access and transpose") {
    Mat3 m = Mat3::from_cols(Vec3{1, 2, 3}, Vec3{4, 5, 6}, Vec3{7, 8, 9});
    CHECK(m.col(1).y == 5.0);
    Mat3 t = transpose(m);
    CHECK(t.col(2).x == 3.0);
    Vec3 v = m * Vec3{1, 0, 0};
    CHECK(v.z == 3.0);
}

TEST_CASE("strformat formats like printf") {
    CHECK(strformat("x=%d y=%.2f", 3, 1.5) == "x=3 y=1.50");
    CHECK(strformat("%s", "abc") == "abc");
    std::string wide = strformat("%.17g", 0.1);
    CHECK(wide == "0.10000000000000001");
}
