#include <catch2/catch_amalgamated.hpp>

#include <radsurf/cubemap.hpp>
#include <radsurf/rng.hpp>

using namespace radsurf;

TEST_CASE("texel_direction inverts locate") {
    Cubemap cm(8);
    for (int f = 0; f < Cubemap::kFaces; ++f)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                Vec3 d = cm.texel_direction(f, x, y);
                REQUIRE(norm(d) == Catch::Approx(1.0).margin(1e-12));
                auto t = cm.locate(d);
                CHECK(t.face == f);
                CHECK(t.x == x);
                CHECK(t.y == y);
            }
}

TEST_CASE("every direction lands in exactly one texel") {
    Cubemap cm(4);
    Rng rng(11);
    for (int i = 0; i < 5000; ++i) {
        Vec3 d = rng.uniform_sphere();
        auto t = cm.locate(d);
        CHECK(t.face >= 0);
        CHECK(t.face < 6);
        CHECK(t.x >= 0);
        CHECK(t.x < 4);
        CHECK(t.y >= 0);
        CHECK(t.y < 4);
        CHECK(cm.flat_index_of(d) == cm.flat_index(t.face, t.x, t.y));
    }
}

TEST_CASE("texel solid angles sum to the full sphere") {
    for (int res : {1, 2, 4, 16}) {
        Cubemap cm(res);
        double total = 0.0;
        for (int f = 0; f < Cubemap::kFaces; ++f)
            for (int y = 0; y < res; ++y)
                for (int x = 0; x < res; ++x) {
                    double w = cm.texel_solid_angle(f, x, y);
                    REQUIRE(w > 0.0);
                    total += w;
                }
        CHECK(total == Catch::Approx(4.0 * kPi).epsilon(1e-10));
    }
}

TEST_CASE("sample returns the stored texel value") {
    Cubemap cm(4);
    for (int f = 0; f < 6; ++f)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                cm.at(f, x, y) = Vec3{static_cast<double>(f), static_cast<double>(x),
                                      static_cast<double>(y)};
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        Vec3 d = rng.uniform_sphere();
        auto t = cm.locate(d);
        Vec3 s = cm.sample(d);
        CHECK(s.x == static_cast<double>(t.face));
        CHECK(s.y == static_cast<double>(t.x));
        CHECK(s.z == static_cast<double>(t.y));
    }
}

TEST_CASE("validate rejects negative and non-finite texels") {
    Cubemap cm(2, Vec3{0.5, 0.5, 0.5});
    CHECK_NOTHROW(cm.validate());
    cm.at(3, 1, 0).y = -0.25;
    CHECK_THROWS_AS(cm.validate(), std::invalid_argument);
    cm.at(3, 1, 0).y = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(cm.validate(), std::invalid_argument);
}
