#include <catch2/catch_amalgamated.hpp>

#include <radsurf/parallel.hpp>
#include <radsurf/rng.hpp>

#include <set>
#include <vector>

using namespace radsurf;

TEST_CASE("rng is a pure function of its key") {
    Rng a(7, 1, 2, 3);
    Rng b(7, 1, 2, 3);
    for (int i = 0; i < 32; ++i) CHECK(a.next64() == b.next64());
}

TEST_CASE("distinct keys give distinct streams") {
    std::set<uint64_t> firsts;
    for (uint64_t s = 0; s < 8; ++s)
        for (uint64_t x = 0; x < 8; ++x) {
            Rng r(s, x, 0, 0);
            firsts.insert(r.next64());
        }
    CHECK(firsts.size() == 64);
    // Key components are not interchangeable.
    CHECK(Rng(1, 2, 0, 0).next64() != Rng(2, 1, 0, 0).next64());
    CHECK(Rng(0, 1, 2, 3).next64() != Rng(0, 3, 2, 1).next64());
}

TEST_CASE("uniform stays in range and has the right mean") {
    Rng r(123);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        acc += u;
    }
    CHECK(acc / n == Catch::Approx(0.5).margin(0.005));
    double lo = r.uniform(-3.0, 5.0);
    CHECK(lo >= -3.0);
    CHECK(lo < 5.0);
}

TEST_CASE("uniform_index is unbiased over small ranges") {
    Rng r(9);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) ++counts[r.uniform_index(7)];
    for (int c : counts) CHECK(std::fabs(c - n / 7.0) < 5.0 * std::sqrt(n / 7.0));
}

TEST_CASE("uniform_hemisphere lies above the normal with cos mean 1/2") {
    Rng r(31);
    Vec3 n = normalize(Vec3{0.3, -0.5, 0.8});
    double cos_acc = 0.0;
    const int k = 50000;
    for (int i = 0; i < k; ++i) {
        Vec3 w = r.uniform_hemisphere(n);
        REQUIRE(dot(w, n) >= 0.0);
        REQUIRE(norm(w) == Catch::Approx(1.0).margin(1e-12));
        cos_acc += dot(w, n);
    }
    CHECK(cos_acc / k == Catch::Approx(0.5).margin(0.005));
}

TEST_CASE("cosine_hemisphere has cos mean 2/3") {
    Rng r(32);
    Vec3 n{0, 0, 1};
    double cos_acc = 0.0;
    const int k = 50000;
    for (int i = 0; i < k; ++i) {
        Vec3 w = r.cosine_hemisphere(n);
        REQUIRE(dot(w, n) >= 0.0);
        cos_acc += dot(w, n);
    }
    CHECK(cos_acc / k == Catch::Approx(2.0 / 3.0).margin(0.005));
}

TEST_CASE("parallel_sum is identical for any thread count") {
    auto f = [](size_t i) { return std::sin(0.1 * static_cast<double>(i)); };
    double s1 = parallel_sum(10001, 64, 1, f);
    double s2 = parallel_sum(10001, 64, 2, f);
    double s4 = parallel_sum(10001, 64, 4, f);
    CHECK(s1 == s2);
    CHECK(s1 == s4);
}

TEST_CASE("parallel_chunks covers the range exactly once") {
    std::vector<int> hits(1000, 0);
    parallel_chunks(hits.size(), 17, 4, [&](size_t, size_t b, size_t e) {
        for (size_t i = b; i < e; ++i) ++hits[i];
    });
    for (int h : hits) CHECK(h == 1);
}
