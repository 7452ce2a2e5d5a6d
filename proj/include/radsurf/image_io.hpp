#pragma once

// Image file I/O. PFM is the lossless interchange format (float32, color,
// little-endian via negative scale). PNG output is display-only (tonemapped
// 8-bit), written with zlib.

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "radsurf/cubemap.hpp"
#include "radsurf/image.hpp"

namespace radsurf {

namespace detail {

inline void put_float_le(std::vector<unsigned char>& out, float f) {
    unsigned char b[4];
    std::memcpy(b, &f, 4);  // union-safe on little-endian hosts
    out.insert(out.end(), b, b + 4);
}

inline std::string read_pfm_token(std::istream& in) {
    std::string tok;
    in >> tok;
    return tok;
}

}  // namespace detail

// Rows are written bottom-up per the PFM convention; `pixels` is top-down.
inline void write_pfm(const std::string& path, int width, int height,
                      const std::vector<Vec3>& pixels) {
    if (width <= 0 || height <= 0 || pixels.size() != static_cast<size_t>(width) * height)
        throw std::invalid_argument("write_pfm: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(strformat("cannot open %s for writing", path.c_str()));
    out << "PF\n" << width << " " << height << "\n-1.0\n";
    std::vector<unsigned char> row;
    row.reserve(static_cast<size_t>(width) * 12);
    for (int y = height - 1; y >= 0; --y) {
        row.clear();
        for (int x = 0; x < width; ++x) {
            const Vec3& p = pixels[static_cast<size_t>(y) * width + x];
            detail::put_float_le(row, static_cast<float>(p.x));
            detail::put_float_le(row, static_cast<float>(p.y));
            detail::put_float_le(row, static_cast<float>(p.z));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error(strformat("failed writing %s", path.c_str()));
}

inline void write_pfm(const std::string& path, const Image& img) {
    write_pfm(path, img.width, img.height, img.pixels);
}

inline Image read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(strformat("cannot open %s", path.c_str()));
    std::string magic = detail::read_pfm_token(in);
    if (magic != "PF")
        throw std::runtime_error(strformat("%s: not a color PFM file", path.c_str()));
    int width = 0, height = 0;
    double scale = 0.0;
    in >> width >> height >> scale;
    if (!in || width <= 0 || height <= 0 || scale == 0.0)
        throw std::runtime_error(strformat("%s: malformed PFM header", path.c_str()));
    in.get();  // single whitespace after the scale line
    if (scale > 0)
        throw std::runtime_error(strformat("%s: big-endian PFM is not supported", path.c_str()));
    Image img(width, height);
    std::vector<float> row(static_cast<size_t>(width) * 3);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw std::runtime_error(strformat("%s: truncated PFM data", path.c_str()));
        for (int x = 0; x < width; ++x)
            img.at(x, y) = {row[3 * x], row[3 * x + 1], row[3 * x + 2]};
    }
    return img;
}

// Cubemaps are stored as one PFM with the six faces stacked vertically in
// face order, +X at the top.
inline void write_cubemap_pfm(const std::string& path, const Cubemap& cm) {
    int r = cm.res();
    std::vector<Vec3> stacked(static_cast<size_t>(r) * r * Cubemap::kFaces);
    for (int f = 0; f < Cubemap::kFaces; ++f)
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x)
                stacked[(static_cast<size_t>(f) * r + y) * r + x] = cm.at(f, x, y);
    write_pfm(path, r, r * Cubemap::kFaces, stacked);
}

inline Cubemap read_cubemap_pfm(const std::string& path) {
    Image img = read_pfm(path);
    if (img.height != img.width * Cubemap::kFaces)
        throw std::runtime_error(
            strformat("%s: expected six stacked square faces, got %dx%d", path.c_str(),
                      img.width, img.height));
    Cubemap cm(img.width);
    int r = img.width;
    for (int f = 0; f < Cubemap::kFaces; ++f)
        for (int y = 0; y < r; ++y)
            for (int x = 0; x < r; ++x) cm.at(f, x, y) = img.at(x, f * r + y);
    cm.validate();
    return cm;
}

namespace detail {

inline void png_chunk(std::ofstream& out, const char type[4], const unsigned char* data,
                      uint32_t len) {
    auto be32 = [](uint32_t v, unsigned char* b) {
        b[0] = static_cast<unsigned char>(v >> 24);
        b[1] = static_cast<unsigned char>(v >> 16);
        b[2] = static_cast<unsigned char>(v >> 8);
        b[3] = static_cast<unsigned char>(v);
    };
    unsigned char lenb[4];
    be32(len, lenb);
    out.write(reinterpret_cast<const char*>(lenb), 4);
    out.write(type, 4);
    if (len) out.write(reinterpret_cast<const char*>(data), len);
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (len) crc = crc32(crc, data, len);
    unsigned char crcb[4];
    be32(static_cast<uint32_t>(crc), crcb);
    out.write(reinterpret_cast<const char*>(crcb), 4);
}

}  // namespace detail

// Tonemapped 8-bit RGB preview of a linear image.
inline void write_png(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(strformat("cannot open %s for writing", path.c_str()));
    static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.write(reinterpret_cast<const char*>(sig), 8);

    unsigned char ihdr[13];
    auto be32 = [](uint32_t v, unsigned char* b) {
        b[0] = static_cast<unsigned char>(v >> 24);
        b[1] = static_cast<unsigned char>(v >> 16);
        b[2] = static_cast<unsigned char>(v >> 8);
        b[3] = static_cast<unsigned char>(v);
    };
    be32(static_cast<uint32_t>(img.width), ihdr);
    be32(static_cast<uint32_t>(img.height), ihdr + 4);
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // color type RGB
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    detail::png_chunk(out, "IHDR", ihdr, 13);

    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(img.height) * (1 + static_cast<size_t>(img.width) * 3));
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < img.width; ++x) {
            Vec3 c = tonemap(img.at(x, y));
            for (int ch = 0; ch < 3; ++ch)
                raw.push_back(static_cast<unsigned char>(std::lround(c[ch] * 255.0)));
        }
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("png: zlib compression failed");
    detail::png_chunk(out, "IDAT", comp.data(), static_cast<uint32_t>(comp_len));
    detail::png_chunk(out, "IEND", nullptr, 0);
    if (!out) throw std::runtime_error(strformat("failed writing %s", path.c_str()));
}

}  // namespace radsurf
