#include <catch2/catch_amalgamated.hpp>

#include <radsurf/image_io.hpp>
#include <radsurf/rng.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace radsurf;

namespace {

std::filesystem::path temp_file(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("pfm round trip preserves float32 payload") {
    Image img(5, 3);
    Rng rng(1);
    for (Vec3& p : img.pixels)
        p = {rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)};
    auto path = temp_file("radsurf_test_rt.pfm");
    write_pfm(path.string(), img);
    Image back = read_pfm(path.string());
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        for (int ch = 0; ch < 3; ++ch) {
            // Written as float32: the round trip must be exact at that width.
            float f = static_cast<float>(img.pixels[i][ch]);
            CHECK(static_cast<float>(back.pixels[i][ch]) == f);
            CHECK(back.pixels[i][ch] == static_cast<double>(f));
        }
    std::filesystem::remove(path);
}

TEST_CASE("pfm header is little-endian color") {
    Image img(2, 2);
    auto path = temp_file("radsurf_test_hdr.pfm");
    write_pfm(path.string(), img);
    std::ifstream in(path, std::ios::binary);
    std::string magic, dims1, dims2, scale;
    in >> magic >> dims1 >> dims2 >> scale;
    CHECK(magic == "PF");
    CHECK(dims1 == "2");
    CHECK(dims2 == "2");
    CHECK(std::stod(scale) < 0.0);  // negative scale marks little-endian
    std::filesystem::remove(path);
}

TEST_CASE("cubemap pfm round trip") {
    Cubemap cm(4);
    Rng rng(2);
    for (Vec3& t : cm.texels()) t = {rng.uniform(), rng.uniform(), rng.uniform()};
    auto path = temp_file("radsurf_test_cm.pfm");
    write_cubemap_pfm(path.string(), cm);
    Cubemap back = read_cubemap_pfm(path.string());
    REQUIRE(back.res() == cm.res());
    for (size_t i = 0; i < cm.texels().size(); ++i)
        for (int ch = 0; ch < 3; ++ch)
            CHECK(static_cast<float>(back.texels()[i][ch]) ==
                  static_cast<float>(cm.texels()[i][ch]));
    std::filesystem::remove(path);
}

TEST_CASE("cubemap pfm rejects non-stacked sizes") {
    Image img(4, 20);  // height is not 6x width
    auto path = temp_file("radsurf_test_badcm.pfm");
    write_pfm(path.string(), img);
    CHECK_THROWS(read_cubemap_pfm(path.string()));
    std::filesystem::remove(path);
}

TEST_CASE("png writer emits a valid signature and size") {
    Image img(7, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 7; ++x) img.at(x, y) = Vec3{x / 7.0, y / 4.0, 0.25};
    auto path = temp_file("radsurf_test.png");
    write_png(path.string(), img);
    std::ifstream in(path, std::ios::binary);
    unsigned char sig[8];
    in.read(reinterpret_cast<char*>(sig), 8);
    const unsigned char expect[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    for (int i = 0; i < 8; ++i) CHECK(sig[i] == expect[i]);
    // IHDR: 4-byte length, "IHDR", then big-endian width and height.
    unsigned char hdr[25];
    in.read(reinterpret_cast<char*>(hdr), 25);
    CHECK(hdr[4] == 'I');
    uint32_t w = (hdr[8] << 24) | (hdr[9] << 16) | (hdr[10] << 8) | hdr[11];
    uint32_t h = (hdr[12] << 24) | (hdr[13] << 16) | (hdr[14] << 8) | hdr[15];
    CHECK(w == 7);
    CHECK(h == 4);
    std::filesystem::remove(path);
}

TEST_CASE("read_pfm reports missing files") {
    CHECK_THROWS(read_pfm("/nonexistent/path/image.pfm"));
}
