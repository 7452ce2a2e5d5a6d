#pragma once

// Built-in benchmark scenes. Each preset pairs a surfel scene with the exact
// rectangle description the brute-force reference implementations consume,
// so renders and optimization results can be checked against ground truth.

#include <filesystem>
#include <string>
#include <vector>

#include "radsurf/image_io.hpp"
#include "radsurf/oracle.hpp"
#include "radsurf/scene.hpp"
#include "radsurf/sh.hpp"
#include "radsurf/splitsum.hpp"

namespace radsurf {

// Cosine-weighted hemispherical reflectance of the specular lobe at the given
// roughness, read from the shared environment-BRDF table. The shaded surfels
// always carry this lobe on top of their diffuse term; Lambertian reference
// patches fold it into their albedo so both descriptions reflect the same
// energy. At high roughness the lobe is broad and the approximation is tight.
inline double specular_diffuse_equivalent(double roughness) {
    const BrdfLut& lut = shared_brdf_lut();
    int j = std::min(kLutRes - 1, static_cast<int>(roughness * kLutRes));
    double acc = 0.0;
    for (int i = 0; i < kLutRes; ++i) {
        double c = (i + 0.5) / kLutRes;
        acc += 2.0 * c * (kFresnelF0 * lut.at_scale(i, j) + lut.at_bias(i, j)) / kLutRes;
    }
    return acc;
}

struct Preset {
    std::string name;
    Scene scene;
    oracle::PatchScene patches;     // env pointer unset; use linked()
    std::vector<int> surfel_patch;  // surfel index -> patch index

    // Patch scene with its environment wired to this preset's cubemap.
    oracle::PatchScene linked() const {
        oracle::PatchScene ps = patches;
        ps.env = &scene.env;
        return ps;
    }
};

// Covers a rectangle with a per_side x per_side grid of Gaussian surfels.
// sigma_ratio scales the Gaussian sigma relative to the grid cell size; the
// default overlaps neighbors enough that the sheet is near-opaque between
// cell centers.
inline std::vector<Surfel> surfelize_patch(const oracle::RectPatch& p, int per_side,
                                           double sigma_ratio = 0.7, double opacity = 0.99,
                                           double roughness = 1.0) {
    std::vector<Surfel> out;
    out.reserve(static_cast<size_t>(per_side) * per_side);
    double cell_u = 2.0 * p.half_u / per_side;
    double cell_v = 2.0 * p.half_v / per_side;
    for (int j = 0; j < per_side; ++j) {
        for (int i = 0; i < per_side; ++i) {
            double u = -p.half_u + (i + 0.5) * cell_u;
            double v = -p.half_v + (j + 0.5) * cell_v;
            Surfel s;
            s.center = p.center + u * p.axis_u + v * p.axis_v;
            s.tangent_u = p.axis_u;
            s.tangent_v = p.axis_v;
            s.scale_u = sigma_ratio * cell_u;
            s.scale_v = sigma_ratio * cell_v;
            s.opacity = opacity;
            s.albedo = p.albedo;
            s.roughness = roughness;
            s.sh.fill(0.0);
            out.push_back(s);
        }
    }
    return out;
}

inline Cubemap make_env_uniform(int res, const Vec3& value) { return Cubemap(res, value); }

// Smooth vertical gradient: zenith above, ground below, horizon in between.
inline Cubemap make_env_gradient_sky(int res, const Vec3& zenith, const Vec3& horizon,
                                     const Vec3& ground) {
    Cubemap env(res);
    for (int f = 0; f < Cubemap::kFaces; ++f)
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                Vec3 d = env.texel_direction(f, x, y);
                double z = d.z;  // +z is up in preset scenes
                env.at(f, x, y) = z >= 0.0 ? (1.0 - z) * horizon + z * zenith
                                           : (1.0 + z) * horizon + (-z) * ground;
            }
    return env;
}

// Constant sky plus a disk light of the given angular radius around sun_dir.
inline Cubemap make_env_sun_sky(int res, const Vec3& sun_dir, const Vec3& sun_radiance,
                                double sun_radius_deg, const Vec3& sky) {
    Cubemap env(res, sky);
    Vec3 sd = normalize(sun_dir);
    double cos_r = std::cos(sun_radius_deg * kPi / 180.0);
    for (int f = 0; f < Cubemap::kFaces; ++f)
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x)
                if (dot(env.texel_direction(f, x, y), sd) >= cos_r)
                    env.at(f, x, y) = sun_radiance;
    return env;
}

namespace detail {

// Deterministic near-uniform direction set (golden spiral).
inline Vec3 fibonacci_sphere(int i, int n) {
    double z = 1.0 - (2.0 * i + 1.0) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = static_cast<double>(i) * kPi * (3.0 - std::sqrt(5.0));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace detail

// Fits each surfel's SH coefficients to path-traced outgoing radiance at its
// center: least squares over a fixed direction set, with directions below the
// surface assigned the mean of the visible-hemisphere targets so the fit
// stays bounded where the loss never samples.
inline void bake_radiance_sh(Scene& scene, const oracle::PatchScene& ps,
                             const std::vector<int>& surfel_patch, int n_dirs, int spp,
                             int depth, uint64_t seed, int threads) {
    if (surfel_patch.size() != scene.surfels.size())
        throw std::invalid_argument("bake_radiance_sh: patch map size mismatch");
    std::vector<Vec3> dirs(static_cast<size_t>(n_dirs));
    std::vector<ShBasis> basis(static_cast<size_t>(n_dirs));
    std::vector<double> ata(static_cast<size_t>(kShBasisCount) * kShBasisCount, 0.0);
    for (int d = 0; d < n_dirs; ++d) {
        dirs[d] = detail::fibonacci_sphere(d, n_dirs);
        basis[d] = sh_basis(dirs[d]);
        for (int a = 0; a < kShBasisCount; ++a)
            for (int b = 0; b < kShBasisCount; ++b)
                ata[static_cast<size_t>(a) * kShBasisCount + b] += basis[d][a] * basis[d][b];
    }
    // Tiny ridge keeps the fit solvable when n_dirs < basis count; it is far
    // below the quadrature error otherwise.
    for (int a = 0; a < kShBasisCount; ++a)
        ata[static_cast<size_t>(a) * kShBasisCount + a] += 1e-9 * (1.0 + n_dirs / kPi);

    parallel_chunks(scene.surfels.size(), 8, threads, [&](size_t, size_t lo, size_t hi) {
        for (size_t si = lo; si < hi; ++si) {
            Surfel& s = scene.surfels[si];
            int patch = surfel_patch[si];
            Vec3 n = s.normal();
            std::vector<Vec3> target(static_cast<size_t>(n_dirs));
            std::vector<bool> upper(static_cast<size_t>(n_dirs), false);
            Vec3 mean_upper;
            int n_upper = 0;
            for (int d = 0; d < n_dirs; ++d) {
                if (dot(n, dirs[d]) <= 1e-9) continue;
                Vec3 acc;
                for (int k = 0; k < spp; ++k) {
                    Rng rng(seed, si, static_cast<uint64_t>(d),
                            static_cast<uint64_t>(k));
                    acc += oracle::path_trace(ps, patch, s.center, dirs[d], depth, rng);
                }
                target[d] = acc / static_cast<double>(spp);
                upper[d] = true;
                mean_upper += target[d];
                ++n_upper;
            }
            if (n_upper == 0) continue;
            mean_upper = mean_upper / static_cast<double>(n_upper);
            for (int d = 0; d < n_dirs; ++d)
                if (!upper[d]) target[d] = mean_upper;
            for (int ch = 0; ch < 3; ++ch) {
                std::vector<double> rhs(kShBasisCount, 0.0);
                for (int d = 0; d < n_dirs; ++d)
                    for (int k = 0; k < kShBasisCount; ++k) rhs[k] += basis[d][k] * target[d][ch];
                std::vector<double> c = oracle::solve_spd(ata, rhs, kShBasisCount);
                for (int k = 0; k < kShBasisCount; ++k) s.sh[ch * kShBasisCount + k] = c[k];
            }
        }
    });
}

// Single surfel under a uniform unit environment. The white furnace: a 50%
// gray diffuse surface must reflect exactly half the incident light.
inline Preset make_furnace_preset(int env_res = 16) {
    Preset p;
    p.name = "furnace";
    oracle::RectPatch patch;
    patch.center = {0, 0, 0};
    patch.axis_u = {1, 0, 0};
    patch.axis_v = {0, 1, 0};
    patch.albedo = {0.5, 0.5, 0.5};
    p.patches.patches.push_back(patch);

    Surfel s;
    s.center = patch.center;
    s.tangent_u = patch.axis_u;
    s.tangent_v = patch.axis_v;
    s.scale_u = s.scale_v = 0.5;
    s.opacity = 0.9;
    s.albedo = patch.albedo;
    s.roughness = 1.0;
    s.sh.fill(0.0);
    p.scene.surfels.push_back(s);
    p.surfel_patch.push_back(0);

    p.scene.env = make_env_uniform(env_res, {1.0, 1.0, 1.0});
    p.scene.cameras.push_back(
        Camera::look_at({0, 0, 2.0}, {0, 0, 0}, {0, 1, 0}, 45.0, 64, 64));
    return p;
}

// Two coaxial unit squares one unit apart, facing each other, lit by a smooth
// sky. The bottom patch receives sky light around the top patch plus one
// bounce off it; the radiosity solver gives the exact diffuse equilibrium.
inline Preset make_two_patch_preset(int per_side = 16, double sigma_ratio = 0.7,
                                    double opacity = 0.99, int env_res = 16) {
    Preset p;
    p.name = "two-patch";
    oracle::RectPatch top;
    top.center = {0, 0, 1};
    top.axis_u = {1, 0, 0};
    top.axis_v = {0, -1, 0};  // normal (0,0,-1): faces the bottom patch
    top.albedo = {0.85, 0.85, 0.85};
    oracle::RectPatch bottom;
    bottom.center = {0, 0, 0};
    bottom.axis_u = {1, 0, 0};
    bottom.axis_v = {0, 1, 0};  // normal (0,0,+1)
    bottom.albedo = {0.8, 0.55, 0.35};
    p.patches.patches = {top, bottom};

    double spec = specular_diffuse_equivalent(1.0);
    for (int i = 0; i < 2; ++i) {
        auto s = surfelize_patch(p.patches.patches[i], per_side, sigma_ratio, opacity);
        p.scene.surfels.insert(p.scene.surfels.end(), s.begin(), s.end());
        p.surfel_patch.insert(p.surfel_patch.end(), s.size(), i);
        p.patches.patches[i].albedo += Vec3{spec, spec, spec};
    }

    p.scene.env = make_env_gradient_sky(env_res, {1.0, 0.95, 0.9}, {0.6, 0.65, 0.75},
                                        {0.25, 0.25, 0.25});
    p.scene.cameras.push_back(
        Camera::look_at({1.7, 0.4, 0.55}, {0, 0, 0.4}, {0, 0, 1}, 50.0, 64, 64));
    p.scene.cameras.push_back(
        Camera::look_at({-1.2, 1.3, 0.9}, {0, 0, 0.4}, {0, 0, 1}, 50.0, 64, 64));
    return p;
}

// Five-wall open box (Cornell-style) lit through the opening by a sun-and-sky
// environment. Indirect light dominates the side walls' color bleeding.
inline Preset make_box_preset(int per_side = 20, double sigma_ratio = 0.7,
                              double opacity = 0.99, int env_res = 16) {
    Preset p;
    p.name = "box";
    auto rect = [](Vec3 c, Vec3 u, Vec3 v, Vec3 albedo) {
        oracle::RectPatch r;
        r.center = c;
        r.axis_u = u;
        r.axis_v = v;
        r.albedo = albedo;
        return r;
    };
    Vec3 white{0.75, 0.75, 0.75};
    p.patches.patches = {
        rect({0.5, 0.5, 0}, {1, 0, 0}, {0, 1, 0}, white),           // back, normal +z
        rect({0, 0.5, 0.5}, {0, 1, 0}, {0, 0, 1}, {0.7, 0.25, 0.22}),  // left, normal +x
        rect({1, 0.5, 0.5}, {0, 0, 1}, {0, 1, 0}, {0.25, 0.7, 0.25}),  // right, normal -x
        rect({0.5, 0, 0.5}, {0, 0, 1}, {1, 0, 0}, white),           // floor, normal +y
        rect({0.5, 1, 0.5}, {1, 0, 0}, {0, 0, 1}, white),           // ceiling, normal -y
    };

    double spec = specular_diffuse_equivalent(0.9);
    for (size_t i = 0; i < p.patches.patches.size(); ++i) {
        auto s = surfelize_patch(p.patches.patches[i], per_side, sigma_ratio, opacity, 0.9);
        p.scene.surfels.insert(p.scene.surfels.end(), s.begin(), s.end());
        p.surfel_patch.insert(p.surfel_patch.end(), s.size(), static_cast<int>(i));
        p.patches.patches[i].albedo += Vec3{spec, spec, spec};
    }

    p.scene.env = make_env_sun_sky(env_res, {0.35, 0.45, 0.82}, {18, 16, 13}, 12.0,
                                   {0.35, 0.4, 0.5});
    p.scene.cameras.push_back(
        Camera::look_at({0.5, 0.55, 2.6}, {0.5, 0.5, 0.4}, {0, 1, 0}, 40.0, 64, 64));
    p.scene.cameras.push_back(
        Camera::look_at({0.85, 0.75, 2.4}, {0.5, 0.5, 0.3}, {0, 1, 0}, 42.0, 64, 64));
    return p;
}

inline Preset make_preset(const std::string& name) {
    if (name == "furnace") return make_furnace_preset();
    if (name == "two-patch") return make_two_patch_preset();
    if (name == "box") return make_box_preset();
    throw std::runtime_error(
        strformat("unknown preset '%s' (expected furnace, two-patch, or box)", name.c_str()));
}

// A warm directional environment used to test relighting.
inline Cubemap make_relight_env(int res = 16) {
    return make_env_sun_sky(res, {-0.5, 0.35, 0.79}, {14, 9, 4}, 15.0, {0.18, 0.2, 0.28});
}

// Renders reference images for every camera with the brute-force path tracer,
// stores them beside the scene, and writes scene.json + env.pfm.
inline void write_preset(Preset& preset, const std::string& dir, int ref_spp = 512,
                         int ref_depth = 4, uint64_t seed = 99, int threads = 0) {
    std::filesystem::create_directories(dir);
    oracle::PatchScene ps = preset.linked();
    for (size_t i = 0; i < preset.scene.cameras.size(); ++i) {
        Camera& cam = preset.scene.cameras[i];
        Image ref = oracle::render_reference(ps, cam, ref_spp, ref_depth, seed + i, threads);
        std::string name = strformat("ref_%02zu.pfm", i);
        write_pfm((std::filesystem::path(dir) / name).string(), ref);
        write_png((std::filesystem::path(dir) / strformat("ref_%02zu.png", i)).string(), ref);
        cam.ref_image = name;
    }
    preset.scene.base_dir = dir;
    save_scene(preset.scene, (std::filesystem::path(dir) / "scene.json").string());
}

}  // namespace radsurf
