#pragma once

// Scene model: oriented Gaussian disk primitives (surfels), an environment
// cubemap, and calibrated cameras. JSON on disk, environment as a sibling PFM.
// All state is immutable during tracing; mutation happens only through the
// optimizer's parameter views.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "radsurf/camera.hpp"
#include "radsurf/cubemap.hpp"
#include "radsurf/image_io.hpp"
#include "radsurf/sh.hpp"

namespace radsurf {

struct Surfel {
    Vec3 center;
    Vec3 tangent_u;      // unit
    Vec3 tangent_v;      // unit, orthogonal to tangent_u
    double scale_u = 1;  // Gaussian sigma along tangent_u, world units
    double scale_v = 1;
    double opacity = 0.5;
    ShCoeffs sh{};       // outgoing radiance, channel-major
    Vec3 albedo{0.5, 0.5, 0.5};
    double roughness = 0.5;

    Vec3 normal() const { return cross(tangent_u, tangent_v); }
};

struct Scene {
    std::vector<Surfel> surfels;
    Cubemap env;
    std::vector<Camera> cameras;
    std::string env_path = "env.pfm";  // relative to the scene JSON
    std::string base_dir;              // directory of the loaded JSON; not serialized

    // Resolves a path stored in the scene file against its directory.
    std::string resolve(const std::string& rel) const {
        if (rel.empty() || base_dir.empty()) return rel;
        return (std::filesystem::path(base_dir) / rel).string();
    }

    void validate() const {
        for (size_t i = 0; i < surfels.size(); ++i) {
            const Surfel& s = surfels[i];
            auto fail = [&](const char* field, const char* what) {
                throw std::invalid_argument(
                    strformat("surfel %zu: field '%s' %s", i, field, what));
            };
            if (!is_finite(s.center)) fail("p", "is not finite");
            if (!is_unit(s.tangent_u)) fail("tu", "is not unit length");
            if (!is_unit(s.tangent_v)) fail("tv", "is not unit length");
            if (std::fabs(dot(s.tangent_u, s.tangent_v)) > 1e-6)
                fail("tv", "is not orthogonal to tu");
            if (!(s.scale_u > 0) || !(s.scale_v > 0) || !std::isfinite(s.scale_u) ||
                !std::isfinite(s.scale_v))
                fail("s", "must be positive and finite");
            if (!(s.opacity > 0) || !(s.opacity < 1)) fail("alpha", "must lie in (0,1)");
            for (double c : s.sh)
                if (!std::isfinite(c)) fail("sh", "has a non-finite coefficient");
            if (!is_finite(s.albedo) || s.albedo.x < 0 || s.albedo.x > 1 || s.albedo.y < 0 ||
                s.albedo.y > 1 || s.albedo.z < 0 || s.albedo.z > 1)
                fail("albedo", "must lie in [0,1]");
            if (!(s.roughness >= 0) || !(s.roughness <= 1) || !std::isfinite(s.roughness))
                fail("rough", "must lie in [0,1]");
        }
        env.validate();
        for (size_t i = 0; i < cameras.size(); ++i) {
            try {
                cameras[i].validate();
            } catch (const std::exception& e) {
                throw std::invalid_argument(strformat("camera %zu: %s", i, e.what()));
            }
        }
    }
};

namespace detail {

inline nlohmann::json vec3_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 json_vec3(const nlohmann::json& j, const char* ctx) {
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error(strformat("%s: expected an array of 3 numbers", ctx));
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace detail

inline nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json j;
    j["env"] = scene.env_path;
    nlohmann::json surfels = nlohmann::json::array();
    for (const Surfel& s : scene.surfels) {
        nlohmann::json js;
        js["p"] = detail::vec3_json(s.center);
        js["tu"] = detail::vec3_json(s.tangent_u);
        js["tv"] = detail::vec3_json(s.tangent_v);
        js["s"] = nlohmann::json::array({s.scale_u, s.scale_v});
        js["alpha"] = s.opacity;
        js["sh"] = s.sh;
        js["albedo"] = detail::vec3_json(s.albedo);
        js["rough"] = s.roughness;
        surfels.push_back(std::move(js));
    }
    j["surfels"] = std::move(surfels);
    nlohmann::json cams = nlohmann::json::array();
    for (const Camera& c : scene.cameras) {
        nlohmann::json jc;
        jc["fx"] = c.fx;
        jc["fy"] = c.fy;
        jc["cx"] = c.cx;
        jc["cy"] = c.cy;
        jc["w"] = c.width;
        jc["h"] = c.height;
        std::array<double, 16> m{};
        for (int r = 0; r < 3; ++r) {
            for (int col = 0; col < 3; ++col) m[r * 4 + col] = c.rot(r, col);
            m[r * 4 + 3] = c.pos[r];
        }
        m[15] = 1.0;
        jc["world_from_cam"] = m;
        if (!c.ref_image.empty()) jc["ref"] = c.ref_image;
        cams.push_back(std::move(jc));
    }
    j["cameras"] = std::move(cams);
    return j;
}

inline Scene scene_from_json(const nlohmann::json& j) {
    Scene scene;
    if (!j.contains("surfels") || !j["surfels"].is_array())
        throw std::runtime_error("scene: missing 'surfels' array");
    scene.env_path = j.value("env", std::string{});
    size_t idx = 0;
    for (const auto& js : j["surfels"]) {
        Surfel s;
        std::string ctx = strformat("surfel %zu", idx);
        try {
            s.center = detail::json_vec3(js.at("p"), "p");
            s.tangent_u = detail::json_vec3(js.at("tu"), "tu");
            s.tangent_v = detail::json_vec3(js.at("tv"), "tv");
            const auto& sc = js.at("s");
            if (!sc.is_array() || sc.size() != 2)
                throw std::runtime_error("s: expected an array of 2 numbers");
            s.scale_u = sc[0].get<double>();
            s.scale_v = sc[1].get<double>();
            s.opacity = js.at("alpha").get<double>();
            const auto& sh = js.at("sh");
            if (!sh.is_array() || sh.size() != kShCoeffsPerSurfel)
                throw std::runtime_error(
                    strformat("sh: expected %d coefficients", kShCoeffsPerSurfel));
            for (int k = 0; k < kShCoeffsPerSurfel; ++k) s.sh[k] = sh[k].get<double>();
            s.albedo = detail::json_vec3(js.at("albedo"), "albedo");
            s.roughness = js.at("rough").get<double>();
        } catch (const std::exception& e) {
            throw std::runtime_error(strformat("%s: %s", ctx.c_str(), e.what()));
        }
        scene.surfels.push_back(s);
        ++idx;
    }
    if (j.contains("cameras")) {
        size_t ci = 0;
        for (const auto& jc : j["cameras"]) {
            Camera c;
            try {
                c.fx = jc.at("fx").get<double>();
                c.fy = jc.at("fy").get<double>();
                c.cx = jc.at("cx").get<double>();
                c.cy = jc.at("cy").get<double>();
                c.width = jc.at("w").get<int>();
                c.height = jc.at("h").get<int>();
                const auto& m = jc.at("world_from_cam");
                if (!m.is_array() || m.size() != 16)
                    throw std::runtime_error("world_from_cam: expected 16 numbers (row-major)");
                for (int r = 0; r < 3; ++r) {
                    for (int col = 0; col < 3; ++col) c.rot(r, col) = m[r * 4 + col].get<double>();
                    c.pos[r] = m[r * 4 + 3].get<double>();
                }
                for (int col = 0; col < 4; ++col) {
                    double want = col == 3 ? 1.0 : 0.0;
                    if (std::fabs(m[12 + col].get<double>() - want) > 1e-9)
                        throw std::runtime_error("world_from_cam: last row must be 0 0 0 1");
                }
                c.ref_image = jc.value("ref", std::string{});
            } catch (const std::exception& e) {
                throw std::runtime_error(strformat("camera %zu: %s", ci, e.what()));
            }
            scene.cameras.push_back(c);
            ++ci;
        }
    }
    return scene;
}

// Loads scene JSON plus its environment PFM (resolved relative to the JSON's
// directory) and validates every invariant.
inline Scene load_scene(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(strformat("cannot open %s", path.c_str()));
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(strformat("%s: %s", path.c_str(), e.what()));
    }
    Scene scene = scene_from_json(j);
    if (scene.env_path.empty())
        throw std::runtime_error(strformat("%s: missing 'env' cubemap path", path.c_str()));
    scene.base_dir = std::filesystem::path(path).parent_path().string();
    scene.env = read_cubemap_pfm(scene.resolve(scene.env_path));
    try {
        scene.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(strformat("%s: %s", path.c_str(), e.what()));
    }
    return scene;
}

// Writes scene JSON and the environment PFM beside it.
inline void save_scene(const Scene& scene, const std::string& path) {
    scene.validate();
    if (scene.env_path.empty())
        throw std::invalid_argument("save_scene: scene has no env path");
    std::ofstream out(path);
    if (!out) throw std::runtime_error(strformat("cannot open %s for writing", path.c_str()));
    out << scene_to_json(scene).dump(1, '\t') << "\n";
    if (!out) throw std::runtime_error(strformat("failed writing %s", path.c_str()));
    std::filesystem::path dir = std::filesystem::path(path).parent_path();
    write_cubemap_pfm((dir / scene.env_path).string(), scene.env);
    // Keep the saved scene self-contained: reference images named by the JSON
    // move along with it when saving into a different directory.
    for (const Camera& c : scene.cameras) {
        if (c.ref_image.empty()) continue;
        std::filesystem::path src = scene.resolve(c.ref_image);
        std::filesystem::path dst = dir / c.ref_image;
        std::error_code ec;
        if (std::filesystem::exists(src, ec) &&
            !std::filesystem::equivalent(src, dst, ec))
            std::filesystem::copy_file(src, dst,
                                       std::filesystem::copy_options::overwrite_existing);
    }
}

}  // namespace radsurf
