#pragma once

// Shaded image renders that combine the surfel blender with the split-sum
// environment tables. These are the cheap per-iteration renders: no secondary
// rays, every blended hit is shaded from precomputed tables.

#include "radsurf/grad.hpp"
#include "radsurf/scene.hpp"
#include "radsurf/splitsum.hpp"
#include "radsurf/tracer.hpp"

namespace radsurf {

// Alpha-blended image where each surfel contributes its split-sum shade.
inline RenderOutput render_splitsum(const Tracer& tracer, const SplitSum& ss,
                                    const Camera& camera, int threads) {
    const Scene& scene = tracer.scene();
    RenderOutput out;
    out.color = Image(camera.width, camera.height);
    out.alpha.assign(out.color.pixel_count(), 0.0);
    parallel_chunks(out.color.pixel_count(), static_cast<size_t>(camera.width), threads,
                    [&](size_t, size_t b, size_t e) {
                        for (size_t i = b; i < e; ++i) {
                            int x = static_cast<int>(i % camera.width);
                            int y = static_cast<int>(i / camera.width);
                            Ray ray = camera.primary_ray(x, y);
                            TraceResult r = tracer.trace_custom(ray, -1, [&](uint32_t idx) {
                                const Surfel& s = scene.surfels[idx];
                                return ss.shade(s.normal(), -ray.dir, s.albedo, s.roughness);
                            });
                            out.color.pixels[i] = r.value;
                            out.alpha[i] = 1.0 - r.transmittance;
                        }
                    });
    return out;
}

// Gradients of a split-sum render w.r.t. albedo, roughness, opacity, and the
// shading tables. Per-row partial results merge in row order, so the result
// does not depend on the thread count.
inline void render_splitsum_backward(const Tracer& tracer, const SplitSum& ss,
                                     const Camera& camera, const Image& d_color,
                                     const std::vector<double>* d_alpha, int threads,
                                     GradientTape& tape, SplitSum::TableAdjoint& tables) {
    const Scene& scene = tracer.scene();
    size_t n = d_color.pixel_count();
    size_t chunk = static_cast<size_t>(camera.width);
    size_t num_chunks = (n + chunk - 1) / chunk;
    std::vector<SparseGrad> partial(num_chunks);
    std::vector<SplitSum::TableAdjoint> partial_tables(num_chunks, SplitSum::TableAdjoint(ss));
    parallel_chunks(n, chunk, threads, [&](size_t c, size_t b, size_t e) {
        for (size_t i = b; i < e; ++i) {
            Vec3 dv = d_color.pixels[i];
            double dt = d_alpha ? -(*d_alpha)[i] : 0.0;  // alpha = 1 - T
            if (dv.x == 0 && dv.y == 0 && dv.z == 0 && dt == 0) continue;
            int x = static_cast<int>(i % camera.width);
            int y = static_cast<int>(i / camera.width);
            Ray ray = camera.primary_ray(x, y);
            tracer.trace_custom_backward(
                ray, -1,
                [&](uint32_t idx) {
                    const Surfel& s = scene.surfels[idx];
                    return ss.shade(s.normal(), -ray.dir, s.albedo, s.roughness);
                },
                dv, dt,
                [&](uint32_t idx, const Vec3& dc) {
                    const Surfel& s = scene.surfels[idx];
                    Vec3 d_albedo;
                    double d_rough = 0.0;
                    ss.shade_backward(s.normal(), -ray.dir, s.albedo, s.roughness, dc,
                                      d_albedo, d_rough, partial_tables[c]);
                    for (int ch = 0; ch < 3; ++ch)
                        partial[c].push_back(
                            {ParamClass::Albedo,
                             static_cast<uint32_t>(albedo_param_index(idx, ch)),
                             d_albedo[ch]});
                    partial[c].push_back({ParamClass::Roughness, idx, d_rough});
                },
                partial[c]);
        }
    });
    for (const SparseGrad& g : partial) tape.accumulate(g);
    for (const auto& t : partial_tables) tables.add(t);
}

// Blended cosine-irradiance lookups: each surfel contributes the irradiance
// table sampled at its normal. Feeds the white-light prior.
inline RenderOutput render_irradiance(const Tracer& tracer, const SplitSum& ss,
                                      const Camera& camera, int threads) {
    const Scene& scene = tracer.scene();
    RenderOutput out;
    out.color = Image(camera.width, camera.height);
    out.alpha.assign(out.color.pixel_count(), 0.0);
    parallel_chunks(out.color.pixel_count(), static_cast<size_t>(camera.width), threads,
                    [&](size_t, size_t b, size_t e) {
                        for (size_t i = b; i < e; ++i) {
                            int x = static_cast<int>(i % camera.width);
                            int y = static_cast<int>(i / camera.width);
                            Ray ray = camera.primary_ray(x, y);
                            TraceResult r = tracer.trace_custom(ray, -1, [&](uint32_t idx) {
                                return ss.irradiance().sample(
                                    scene.surfels[idx].normal());
                            });
                            out.color.pixels[i] = r.value;
                            out.alpha[i] = 1.0 - r.transmittance;
                        }
                    });
    return out;
}

inline void render_irradiance_backward(const Tracer& tracer, const SplitSum& ss,
                                       const Camera& camera, const Image& d_color,
                                       const std::vector<double>* d_alpha, int threads,
                                       GradientTape& tape, SplitSum::TableAdjoint& tables) {
    const Scene& scene = tracer.scene();
    size_t n = d_color.pixel_count();
    size_t chunk = static_cast<size_t>(camera.width);
    size_t num_chunks = (n + chunk - 1) / chunk;
    std::vector<SparseGrad> partial(num_chunks);
    std::vector<SplitSum::TableAdjoint> partial_tables(num_chunks, SplitSum::TableAdjoint(ss));
    parallel_chunks(n, chunk, threads, [&](size_t c, size_t b, size_t e) {
        for (size_t i = b; i < e; ++i) {
            Vec3 dv = d_color.pixels[i];
            double dt = d_alpha ? -(*d_alpha)[i] : 0.0;
            if (dv.x == 0 && dv.y == 0 && dv.z == 0 && dt == 0) continue;
            int x = static_cast<int>(i % camera.width);
            int y = static_cast<int>(i / camera.width);
            Ray ray = camera.primary_ray(x, y);
            tracer.trace_custom_backward(
                ray, -1,
                [&](uint32_t idx) {
                    return ss.irradiance().sample(scene.surfels[idx].normal());
                },
                dv, dt,
                [&](uint32_t idx, const Vec3& dc) {
                    size_t t = ss.irradiance().flat_index_of(scene.surfels[idx].normal());
                    partial_tables[c].irradiance[t] += dc;
                },
                partial[c]);
        }
    });
    for (const SparseGrad& g : partial) tape.accumulate(g);
    for (const auto& t : partial_tables) tables.add(t);
}

}  // namespace radsurf
