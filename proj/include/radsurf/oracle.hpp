#pragma once

// Independent reference solvers used to validate the engine. They share only
// elementary vector math with the main code paths: analytic rectangles
// instead of Gaussian disks, recursive path tracing instead of alpha
// blending, and a radiosity fixed point instead of gradient descent.

#include <optional>

#include "radsurf/camera.hpp"
#include "radsurf/cubemap.hpp"
#include "radsurf/image.hpp"
#include "radsurf/parallel.hpp"
#include "radsurf/rng.hpp"

namespace radsurf::oracle {

// One-sided diffuse rectangle: emits and reflects from its front (normal)
// side, black from behind, opaque from both sides.
struct RectPatch {
    Vec3 center;
    Vec3 axis_u;  // unit
    Vec3 axis_v;  // unit, orthogonal to axis_u
    double half_u = 0.5;
    double half_v = 0.5;
    Vec3 albedo{0.5, 0.5, 0.5};
    Vec3 emission{};  // emitted radiance

    Vec3 normal() const { return cross(axis_u, axis_v); }
    double area() const { return 4.0 * half_u * half_v; }
};

struct PatchScene {
    std::vector<RectPatch> patches;
    const Cubemap* env = nullptr;  // optional; rays that escape sample it
};

struct RectHit {
    int patch;
    double t;
    Vec3 point;
};

inline std::optional<RectHit> intersect_rects(const PatchScene& ps, const Ray& ray,
                                              int exclude = -1) {
    std::optional<RectHit> best;
    for (size_t i = 0; i < ps.patches.size(); ++i) {
        if (static_cast<int>(i) == exclude) continue;
        const RectPatch& p = ps.patches[i];
        Vec3 n = p.normal();
        double denom = dot(n, ray.dir);
        if (std::fabs(denom) < 1e-12) continue;
        double t = dot(n, p.center - ray.origin) / denom;
        if (!(t > ray.t_min)) continue;
        if (best && t >= best->t) continue;
        Vec3 local = ray.origin + t * ray.dir - p.center;
        if (std::fabs(dot(local, p.axis_u)) > p.half_u) continue;
        if (std::fabs(dot(local, p.axis_v)) > p.half_v) continue;
        best = RectHit{static_cast<int>(i), t, ray.origin + t * ray.dir};
    }
    return best;
}

// Radiance leaving patch `i` at x toward wo. One uniform-hemisphere
// continuation per call; `depth` is the number of remaining bounces.
inline Vec3 path_trace(const PatchScene& ps, int i, const Vec3& x, const Vec3& wo, int depth,
                       Rng& rng) {
    const RectPatch& p = ps.patches[static_cast<size_t>(i)];
    Vec3 n = p.normal();
    if (dot(n, wo) <= 0.0) return {};  // queried from behind
    Vec3 out = p.emission;
    if (depth <= 0) return out;
    Vec3 wi = rng.uniform_hemisphere(n);
    double cos_i = dot(wi, n);
    if (cos_i <= 0.0) return out;
    Ray ray{x, wi};
    Vec3 incoming;
    if (auto hit = intersect_rects(ps, ray, i)) {
        incoming = path_trace(ps, hit->patch, hit->point, -wi, depth - 1, rng);
    } else if (ps.env) {
        incoming = ps.env->sample(wi);
    }
    // (rho/pi) * L_in * cos / pdf, pdf = 1/(2*pi).
    out += 2.0 * cos_i * mul(p.albedo, incoming);
    return out;
}

// Camera reference render; spp independent paths per pixel, averaged.
inline Image render_reference(const PatchScene& ps, const Camera& camera, int spp, int depth,
                              uint64_t seed, int threads) {
    Image img(camera.width, camera.height);
    parallel_chunks(img.pixel_count(), static_cast<size_t>(camera.width), threads,
                    [&](size_t, size_t b, size_t e) {
                        for (size_t idx = b; idx < e; ++idx) {
                            int x = static_cast<int>(idx % camera.width);
                            int y = static_cast<int>(idx / camera.width);
                            Ray ray = camera.primary_ray(x, y);
                            Vec3 acc;
                            for (int s = 0; s < spp; ++s) {
                                Rng rng(seed, idx, static_cast<uint64_t>(s));
                                if (auto hit = intersect_rects(ps, ray)) {
                                    acc += path_trace(ps, hit->patch, hit->point, -ray.dir,
                                                      depth, rng);
                                } else if (ps.env) {
                                    acc += ps.env->sample(ray.dir);
                                }
                            }
                            img.pixels[idx] = acc / static_cast<double>(spp);
                        }
                    });
    return img;
}

// Radiance arriving at x from direction wi (for probing interreflection).
inline Vec3 incident_reference(const PatchScene& ps, const Vec3& x, const Vec3& wi, int depth,
                               Rng& rng, int exclude = -1) {
    Ray ray{x, wi};
    if (auto hit = intersect_rects(ps, ray, exclude))
        return path_trace(ps, hit->patch, hit->point, -wi, depth, rng);
    return ps.env ? ps.env->sample(wi) : Vec3{};
}

// Concentrated environment texels split out for next-event estimation. Each
// bright texel is subdivided into sub x sub cells with exact solid angles so
// partial occlusion resolves below texel granularity.
struct EnvBright {
    struct Cell {
        Vec3 dir;
        Vec3 radiance;
        double omega;
    };
    std::vector<Cell> cells;
    std::vector<uint8_t> is_bright;  // per flat texel index
};

inline EnvBright make_env_bright(const Cubemap& env, double threshold, int sub = 2) {
    EnvBright out;
    out.is_bright.assign(env.texel_count(), 0);
    int res = env.res();
    auto slice = [](double u0, double u1, double v0, double v1) {
        auto corner = [](double u, double v) {
            return std::atan2(u * v, std::sqrt(u * u + v * v + 1.0));
        };
        return corner(u1, v1) - corner(u0, v1) - corner(u1, v0) + corner(u0, v0);
    };
    for (int f = 0; f < Cubemap::kFaces; ++f) {
        for (int y = 0; y < res; ++y) {
            for (int x = 0; x < res; ++x) {
                const Vec3& l = env.at(f, x, y);
                if (max_component(l) <= threshold) continue;
                out.is_bright[env.flat_index(f, x, y)] = 1;
                for (int sy = 0; sy < sub; ++sy) {
                    for (int sx = 0; sx < sub; ++sx) {
                        double u0 = 2.0 * (x + static_cast<double>(sx) / sub) / res - 1.0;
                        double u1 = 2.0 * (x + (sx + 1.0) / sub) / res - 1.0;
                        double v0 = 2.0 * (y + static_cast<double>(sy) / sub) / res - 1.0;
                        double v1 = 2.0 * (y + (sy + 1.0) / sub) / res - 1.0;
                        double sc = 0.5 * (u0 + u1);
                        double tc = 0.5 * (v0 + v1);
                        Vec3 d;
                        switch (f) {
                            case 0: d = {1.0, -tc, -sc}; break;
                            case 1: d = {-1.0, -tc, sc}; break;
                            case 2: d = {sc, 1.0, tc}; break;
                            case 3: d = {sc, -1.0, -tc}; break;
                            case 4: d = {sc, -tc, 1.0}; break;
                            default: d = {-sc, -tc, -1.0}; break;
                        }
                        out.cells.push_back({normalize(d), l, slice(u0, u1, v0, v1)});
                    }
                }
            }
        }
    }
    return out;
}

// Irradiance at x on patch `i` from the bright cells, with visibility rays.
inline Vec3 bright_irradiance(const PatchScene& ps, int i, const Vec3& x, const Vec3& n,
                              const EnvBright& bright) {
    Vec3 acc;
    for (const EnvBright::Cell& c : bright.cells) {
        double cos_i = dot(n, c.dir);
        if (cos_i <= 0.0) continue;
        Ray ray{x, c.dir};
        if (intersect_rects(ps, ray, i)) continue;
        acc += (cos_i * c.omega) * c.radiance;
    }
    return acc;
}

// path_trace with next-event estimation for the bright texel set: their
// single-scatter contribution is integrated by quadrature at every vertex and
// escaped rays skip them, so the expectation matches path_trace at equal
// depth with far less variance when the environment has a concentrated light.
inline Vec3 path_trace_nee(const PatchScene& ps, int i, const Vec3& x, const Vec3& wo, int depth,
                           Rng& rng, const EnvBright& bright) {
    const RectPatch& p = ps.patches[static_cast<size_t>(i)];
    Vec3 n = p.normal();
    if (dot(n, wo) <= 0.0) return {};  // queried from behind
    Vec3 out = p.emission;
    if (depth <= 0) return out;
    out += (1.0 / kPi) * mul(p.albedo, bright_irradiance(ps, i, x, n, bright));
    Vec3 wi = rng.uniform_hemisphere(n);
    double cos_i = dot(wi, n);
    if (cos_i <= 0.0) return out;
    Ray ray{x, wi};
    Vec3 incoming;
    if (auto hit = intersect_rects(ps, ray, i)) {
        incoming = path_trace_nee(ps, hit->patch, hit->point, -wi, depth - 1, rng, bright);
    } else if (ps.env && !bright.is_bright[ps.env->flat_index_of(wi)]) {
        incoming = ps.env->sample(wi);
    }
    out += 2.0 * cos_i * mul(p.albedo, incoming);
    return out;
}

namespace detail {

struct Element {
    int patch;
    Vec3 center;
    Vec3 normal;
    double area;
};

inline bool element_visible(const PatchScene& ps, const Vec3& a, const Vec3& b, int skip_a,
                            int skip_b) {
    Vec3 d = b - a;
    double dist = norm(d);
    if (dist <= 0.0) return false;
    Ray ray{a, d / dist, 1e-9};
    for (size_t i = 0; i < ps.patches.size(); ++i) {
        if (static_cast<int>(i) == skip_a || static_cast<int>(i) == skip_b) continue;
        const RectPatch& p = ps.patches[i];
        Vec3 n = p.normal();
        double denom = dot(n, ray.dir);
        if (std::fabs(denom) < 1e-12) continue;
        double t = dot(n, p.center - ray.origin) / denom;
        if (!(t > ray.t_min) || t >= dist - 1e-9) continue;
        Vec3 local = ray.origin + t * ray.dir - p.center;
        if (std::fabs(dot(local, p.axis_u)) > p.half_u) continue;
        if (std::fabs(dot(local, p.axis_v)) > p.half_v) continue;
        return false;
    }
    return true;
}

inline std::vector<Element> subdivide(const PatchScene& ps, int sub) {
    std::vector<Element> elems;
    elems.reserve(ps.patches.size() * static_cast<size_t>(sub) * sub);
    for (size_t i = 0; i < ps.patches.size(); ++i) {
        const RectPatch& p = ps.patches[i];
        double du = 2.0 * p.half_u / sub;
        double dv = 2.0 * p.half_v / sub;
        for (int a = 0; a < sub; ++a)
            for (int b = 0; b < sub; ++b) {
                Vec3 c = p.center + ((a + 0.5) * du - p.half_u) * p.axis_u +
                         ((b + 0.5) * dv - p.half_v) * p.axis_v;
                elems.push_back({static_cast<int>(i), c, p.normal(), du * dv});
            }
    }
    return elems;
}

}  // namespace detail

struct RadiosityResult {
    std::vector<Vec3> patch_radiance;    // area-weighted mean outgoing radiance
    std::vector<Vec3> element_radiance;
    int subdivisions = 0;
    int iterations = 0;
};

// Diffuse global-illumination fixed point L = E + (rho/pi) * H on subdivided
// elements, point-to-point form factors with visibility, environment
// irradiance folded into the constant term. Jacobi iteration to `tol`.
inline RadiosityResult radiosity_reference(const PatchScene& ps, int subdivisions,
                                           double tol = 1e-8, int env_samples = 2048,
                                           uint64_t seed = 7) {
    auto elems = detail::subdivide(ps, subdivisions);
    size_t n = elems.size();

    // Geometric coupling G[i][j] = cos_i cos_j V A_j / (pi r^2): H_i = sum G L_j.
    std::vector<std::vector<std::pair<uint32_t, double>>> coupling(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (elems[i].patch == elems[j].patch) continue;
            Vec3 d = elems[j].center - elems[i].center;
            double r2 = norm2(d);
            if (r2 <= 0.0) continue;
            double r = std::sqrt(r2);
            Vec3 dir = d / r;
            double cos_i = dot(elems[i].normal, dir);
            double cos_j = dot(elems[j].normal, -dir);
            if (cos_i <= 0.0 || cos_j <= 0.0) continue;
            if (!detail::element_visible(ps, elems[i].center, elems[j].center, elems[i].patch,
                                         elems[j].patch))
                continue;
            coupling[i].emplace_back(static_cast<uint32_t>(j),
                                     cos_i * cos_j * elems[j].area / (kPi * r2));
        }
    }

    // Constant term: emission plus reflected environment irradiance.
    std::vector<Vec3> base(n);
    for (size_t i = 0; i < n; ++i) {
        const RectPatch& p = ps.patches[static_cast<size_t>(elems[i].patch)];
        base[i] = p.emission;
        if (ps.env) {
            Rng rng(seed, i);
            Vec3 acc;
            for (int s = 0; s < env_samples; ++s) {
                Vec3 wi = rng.cosine_hemisphere(elems[i].normal);
                Ray ray{elems[i].center, wi};
                bool blocked = false;
                for (size_t k = 0; k < ps.patches.size(); ++k) {
                    if (static_cast<int>(k) == elems[i].patch) continue;
                    const RectPatch& q = ps.patches[k];
                    Vec3 nq = q.normal();
                    double denom = dot(nq, ray.dir);
                    if (std::fabs(denom) < 1e-12) continue;
                    double t = dot(nq, q.center - ray.origin) / denom;
                    if (!(t > ray.t_min)) continue;
                    Vec3 local = ray.origin + t * ray.dir - q.center;
                    if (std::fabs(dot(local, q.axis_u)) > q.half_u) continue;
                    if (std::fabs(dot(local, q.axis_v)) > q.half_v) continue;
                    blocked = true;
                    break;
                }
                if (!blocked) acc += ps.env->sample(wi);
            }
            // cosine-weighted mean approximates (1/pi) * integral(L cos).
            Vec3 h_over_pi = acc / static_cast<double>(env_samples);
            base[i] += mul(p.albedo, h_over_pi);
        }
    }

    RadiosityResult out;
    out.subdivisions = subdivisions;
    std::vector<Vec3> radiance = base;
    std::vector<Vec3> next(n);
    for (int iter = 0; iter < 100000; ++iter) {
        double delta = 0.0;
        for (size_t i = 0; i < n; ++i) {
            Vec3 h;
            for (const auto& [j, g] : coupling[i]) h += g * radiance[j];
            const RectPatch& p = ps.patches[static_cast<size_t>(elems[i].patch)];
            next[i] = base[i] + mul(p.albedo, h);
            delta = std::max(delta, max_component(cwise_abs(next[i] - radiance[i])));
        }
        radiance.swap(next);
        out.iterations = iter + 1;
        if (delta < tol) break;
    }
    out.element_radiance = radiance;
    out.patch_radiance.assign(ps.patches.size(), Vec3{});
    std::vector<double> areas(ps.patches.size(), 0.0);
    for (size_t i = 0; i < n; ++i) {
        out.patch_radiance[static_cast<size_t>(elems[i].patch)] += elems[i].area * radiance[i];
        areas[static_cast<size_t>(elems[i].patch)] += elems[i].area;
    }
    for (size_t p = 0; p < ps.patches.size(); ++p)
        if (areas[p] > 0.0) out.patch_radiance[p] /= areas[p];
    return out;
}

// Patch-to-patch form factor by element quadrature with visibility.
inline double form_factor(const PatchScene& ps, int from, int to, int subdivisions) {
    auto elems = detail::subdivide(ps, subdivisions);
    double acc = 0.0, area_from = 0.0;
    for (const auto& ei : elems) {
        if (ei.patch != from) continue;
        area_from += ei.area;
        for (const auto& ej : elems) {
            if (ej.patch != to) continue;
            Vec3 d = ej.center - ei.center;
            double r2 = norm2(d);
            if (r2 <= 0.0) continue;
            Vec3 dir = d / std::sqrt(r2);
            double cos_i = dot(ei.normal, dir);
            double cos_j = dot(ej.normal, -dir);
            if (cos_i <= 0.0 || cos_j <= 0.0) continue;
            if (!detail::element_visible(ps, ei.center, ej.center, ei.patch, ej.patch)) continue;
            acc += cos_i * cos_j * ei.area * ej.area / (kPi * r2);
        }
    }
    return area_from > 0.0 ? acc / area_from : 0.0;
}

// Central finite difference through a get/set parameter accessor.
template <class F, class Get, class Set>
double finite_diff(F&& f, Get&& get, Set&& set, double step) {
    double x0 = get();
    set(x0 + step);
    double fp = f();
    set(x0 - step);
    double fm = f();
    set(x0);
    return (fp - fm) / (2.0 * step);
}

// Dense symmetric positive-definite solve (Cholesky); used for fitting SH
// coefficients to reference radiance.
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, int n) {
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[static_cast<size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                sum -= a[static_cast<size_t>(i) * n + k] * a[static_cast<size_t>(j) * n + k];
            if (i == j) {
                if (sum <= 0.0) throw std::runtime_error("solve_spd: matrix not positive definite");
                a[static_cast<size_t>(i) * n + j] = std::sqrt(sum);
            } else {
                a[static_cast<size_t>(i) * n + j] = sum / a[static_cast<size_t>(j) * n + j];
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        double sum = b[static_cast<size_t>(i)];
        for (int k = 0; k < i; ++k) sum -= a[static_cast<size_t>(i) * n + k] * b[static_cast<size_t>(k)];
        b[static_cast<size_t>(i)] = sum / a[static_cast<size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double sum = b[static_cast<size_t>(i)];
        for (int k = i + 1; k < n; ++k) sum -= a[static_cast<size_t>(k) * n + i] * b[static_cast<size_t>(k)];
        b[static_cast<size_t>(i)] = sum / a[static_cast<size_t>(i) * n + i];
    }
    return b;
}

}  // namespace radsurf::oracle
