#pragma once

// Radiometric consistency: every surfel's stored outgoing radiance should
// match a physically-based estimate of the rendering equation at its
// location. Incident light along a secondary ray combines environment light
// attenuated by the traced transmittance with the radiance blended from hit
// surfels; the residual between stored and estimated radiance is minimized
// jointly with respect to both sides.

#include "radsurf/brdf.hpp"
#include "radsurf/splitsum.hpp"
#include "radsurf/tracer.hpp"

namespace radsurf {

struct IncidentRadiance {
    Vec3 total;       // transmittance * direct + traced
    Vec3 direct;      // unoccluded environment radiance along the ray
    Vec3 traced;      // alpha-blended surfel radiance along the ray
    double transmittance = 1.0;

    double occlusion() const { return 1.0 - transmittance; }
};

// Light arriving at x from direction wi (pointing away from x).
inline IncidentRadiance incident_radiance(const Tracer& tracer, const Cubemap& env,
                                          const Vec3& x, const Vec3& wi, int exclude) {
    IncidentRadiance out;
    Ray ray{x, wi};
    TraceResult tr = tracer.trace(ray, TraceMode::Radiance, exclude);
    out.traced = tr.value;
    out.transmittance = tr.transmittance;
    out.direct = env.sample(wi);
    out.total = tr.transmittance * out.direct + tr.value;
    return out;
}

enum class IncidentTerm { Full, DirectOnly, IndirectOnly };

inline Vec3 incident_term_value(const IncidentRadiance& li, IncidentTerm term) {
    switch (term) {
        case IncidentTerm::Full: return li.total;
        case IncidentTerm::DirectOnly: return li.transmittance * li.direct;
        case IncidentTerm::IndirectOnly: return li.traced;
    }
    return {};
}

// Per-ray values cached by the forward estimate so the backward pass only
// re-gathers hit sets once.
struct PbrRayCache {
    Vec3 traced;
    double transmittance;
};

// Uniform-hemisphere Monte Carlo estimate of outgoing radiance at surfel j:
//   (2*pi / n_s) * sum f_r(wo, wi) * L_i(wi) * (wi . n)
// The estimate is zero when wo lies below the surfel plane.
inline Vec3 pbr_radiance(const Tracer& tracer, const Cubemap& env, uint32_t j, const Vec3& wo,
                         int n_s, Rng rng, IncidentTerm term = IncidentTerm::Full,
                         std::vector<PbrRayCache>* cache = nullptr) {
    const Surfel& s = tracer.scene().surfels[j];
    Vec3 n = s.normal();
    if (cache) cache->assign(static_cast<size_t>(n_s), {Vec3{}, 1.0});
    if (dot(n, wo) <= 0.0) return {};
    Vec3 acc;
    for (int i = 0; i < n_s; ++i) {
        Vec3 wi = rng.uniform_hemisphere(n);
        double cos_i = dot(wi, n);
        if (cos_i <= 0.0) continue;
        IncidentRadiance li =
            incident_radiance(tracer, env, s.center, wi, static_cast<int>(j));
        if (cache) (*cache)[static_cast<size_t>(i)] = {li.traced, li.transmittance};
        Vec3 f = eval_brdf(s.albedo, s.roughness, n, wo, wi).total();
        acc += cos_i * mul(f, incident_term_value(li, term));
    }
    return (kTwoPi / n_s) * acc;
}

// Reverse pass of pbr_radiance. Re-draws the same directions (identical rng)
// and uses the cached per-ray trace values; secondary hit sets are re-gathered
// by the trace backward. d_out is dLoss/d(estimate).
inline void pbr_radiance_backward(const Tracer& tracer, const Cubemap& env, uint32_t j,
                                  const Vec3& wo, int n_s, Rng rng, IncidentTerm term,
                                  const std::vector<PbrRayCache>& cache, const Vec3& d_out,
                                  SparseGrad& out) {
    const Surfel& s = tracer.scene().surfels[j];
    Vec3 n = s.normal();
    if (dot(n, wo) <= 0.0) return;
    double scale = kTwoPi / n_s;
    Vec3 d_albedo;
    double d_rough = 0.0;
    for (int i = 0; i < n_s; ++i) {
        Vec3 wi = rng.uniform_hemisphere(n);
        double cos_i = dot(wi, n);
        if (cos_i <= 0.0) continue;
        const PbrRayCache& rc = cache[static_cast<size_t>(i)];
        Vec3 direct = env.sample(wi);
        Vec3 li;
        switch (term) {
            case IncidentTerm::Full: li = rc.transmittance * direct + rc.traced; break;
            case IncidentTerm::DirectOnly: li = rc.transmittance * direct; break;
            case IncidentTerm::IndirectOnly: li = rc.traced; break;
        }
        double d_spec_d_rough;
        BrdfValue f = eval_brdf_rough_grad(s.albedo, s.roughness, n, wo, wi, d_spec_d_rough);
        double w = scale * cos_i;

        // Material gradients through f_r.
        d_albedo += (w / kPi) * mul(d_out, li);
        d_rough += w * d_spec_d_rough * (d_out.x * li.x + d_out.y * li.y + d_out.z * li.z);

        Vec3 f_total = f.total();
        Vec3 d_li = w * mul(d_out, f_total);  // adjoint of the selected incident term
        if (term != IncidentTerm::IndirectOnly) {
            // Environment texel the ray would look up.
            size_t texel = env.flat_index_of(wi);
            Vec3 d_direct = rc.transmittance * d_li;
            for (int ch = 0; ch < 3; ++ch)
                out.push_back({ParamClass::Env, static_cast<uint32_t>(texel * 3 + ch),
                               d_direct[ch]});
        }
        double d_t = term != IncidentTerm::IndirectOnly ? dot(d_li, direct) : 0.0;
        Vec3 d_traced = term != IncidentTerm::DirectOnly ? d_li : Vec3{};
        if (d_t != 0.0 || d_traced.x != 0.0 || d_traced.y != 0.0 || d_traced.z != 0.0) {
            Ray ray{s.center, wi};
            tracer.trace_backward(ray, TraceMode::Radiance, d_traced, d_t,
                                  static_cast<int>(j), out);
        }
    }
    for (int ch = 0; ch < 3; ++ch)
        out.push_back(
            {ParamClass::Albedo, static_cast<uint32_t>(albedo_param_index(j, ch)), d_albedo[ch]});
    out.push_back({ParamClass::Roughness, j, d_rough});
}

struct RadLossConfig {
    int n_g = 256;          // surfels sampled per evaluation
    int n_s = 64;           // hemisphere rays per residual estimate
    bool detach_lg = false;     // freeze the stored-radiance side of the residual
    bool detach_lpbr = false;   // freeze the physically-based side
    bool camera_dirs = true;    // add a view direction toward a random camera
};

// Residual of one surfel at one outgoing direction: stored SH radiance
// (unclamped) minus the Monte Carlo estimate.
inline Vec3 radiometric_residual(const Tracer& tracer, const Cubemap& env, uint32_t j,
                                 const Vec3& wo, int n_s, Rng rng,
                                 std::vector<PbrRayCache>* cache = nullptr) {
    Vec3 lg = eval_sh(tracer.scene().surfels[j].sh, wo);
    Vec3 lpbr = pbr_radiance(tracer, env, j, wo, n_s, std::move(rng), IncidentTerm::Full, cache);
    return lg - lpbr;
}

// Mean over samples and channels of |residual|, with optional gradient
// accumulation. Gradients flow to both residual terms unless detached and are
// scaled by d_loss (the loss weight); the returned value is unweighted.
// Deterministic: sample draws are keyed by (seed, iteration, slot) and
// per-chunk gradient lists merge in slot order.
inline double radiometric_loss(const Tracer& tracer, const Cubemap& env,
                               const std::vector<Camera>& cameras, const RadLossConfig& cfg,
                               uint64_t seed, uint64_t iteration, int threads,
                               GradientTape* tape, double d_loss = 1.0) {
    const Scene& scene = tracer.scene();
    size_t n_surfels = scene.surfels.size();
    if (n_surfels == 0) throw std::invalid_argument("radiometric loss needs surfels");
    int dirs = cfg.camera_dirs && !cameras.empty() ? 2 : 1;
    size_t n = static_cast<size_t>(cfg.n_g);
    double sample_weight = 1.0 / (static_cast<double>(n) * dirs * 3.0);

    size_t chunk = 8;
    size_t num_chunks = (n + chunk - 1) / chunk;
    std::vector<double> partial_loss(num_chunks, 0.0);
    std::vector<SparseGrad> partial_grad(tape ? num_chunks : 0);

    parallel_chunks(n, chunk, threads, [&](size_t c, size_t b, size_t e) {
        std::vector<PbrRayCache> cache;
        for (size_t slot = b; slot < e; ++slot) {
            uint32_t j = static_cast<uint32_t>(
                Rng(seed, iteration, slot, 0).uniform_index(n_surfels));
            const Surfel& s = scene.surfels[j];
            Vec3 nrm = s.normal();
            for (int d = 0; d < dirs; ++d) {
                Vec3 wo;
                if (d == 0) {
                    wo = Rng(seed, iteration, slot, 1).uniform_hemisphere(nrm);
                } else {
                    size_t ci = Rng(seed, iteration, slot, 2).uniform_index(cameras.size());
                    Vec3 to_cam = cameras[ci].pos - s.center;
                    double len = norm(to_cam);
                    if (len <= 0.0) continue;
                    wo = to_cam / len;
                }
                Rng ray_rng(seed, iteration, slot, 16 + static_cast<uint64_t>(d));
                Vec3 res = radiometric_residual(tracer, env, j, wo, cfg.n_s, ray_rng,
                                                tape ? &cache : nullptr);
                partial_loss[c] +=
                    sample_weight * (std::fabs(res.x) + std::fabs(res.y) + std::fabs(res.z));
                if (!tape) continue;
                double gw = sample_weight * d_loss;
                Vec3 d_res{res.x > 0 ? gw : (res.x < 0 ? -gw : 0.0),
                           res.y > 0 ? gw : (res.y < 0 ? -gw : 0.0),
                           res.z > 0 ? gw : (res.z < 0 ? -gw : 0.0)};
                if (!cfg.detach_lg) {
                    ShBasis basis = sh_basis(wo);
                    for (int ch = 0; ch < 3; ++ch) {
                        if (d_res[ch] == 0.0) continue;
                        for (int k = 0; k < kShBasisCount; ++k)
                            partial_grad[c].push_back(
                                {ParamClass::Sh,
                                 static_cast<uint32_t>(
                                     sh_param_index(j, ch * kShBasisCount + k)),
                                 d_res[ch] * basis[k]});
                    }
                }
                if (!cfg.detach_lpbr) {
                    pbr_radiance_backward(tracer, env, j, wo, cfg.n_s,
                                          Rng(seed, iteration, slot,
                                              16 + static_cast<uint64_t>(d)),
                                          IncidentTerm::Full, cache, -d_res, partial_grad[c]);
                }
            }
        }
    });
    double loss = 0.0;
    for (double p : partial_loss) loss += p;
    if (tape)
        for (const SparseGrad& g : partial_grad) tape->accumulate(g);
    return loss;
}

// Init-stage variant: the physically-based side is the split-sum shade of the
// surfel itself (no secondary rays). Gradients flow to sh, albedo, roughness,
// and the split-sum table adjoints.
inline double radiometric_loss_splitsum(const Tracer& tracer, const SplitSum& ss,
                                        const std::vector<Camera>& cameras,
                                        const RadLossConfig& cfg, uint64_t seed,
                                        uint64_t iteration, int threads, GradientTape* tape,
                                        SplitSum::TableAdjoint* table_adj, double d_loss = 1.0) {
    const Scene& scene = tracer.scene();
    size_t n_surfels = scene.surfels.size();
    if (n_surfels == 0) throw std::invalid_argument("radiometric loss needs surfels");
    int dirs = cfg.camera_dirs && !cameras.empty() ? 2 : 1;
    size_t n = static_cast<size_t>(cfg.n_g);
    double sample_weight = 1.0 / (static_cast<double>(n) * dirs * 3.0);

    size_t chunk = 64;
    size_t num_chunks = (n + chunk - 1) / chunk;
    std::vector<double> partial_loss(num_chunks, 0.0);
    std::vector<SparseGrad> partial_grad(tape ? num_chunks : 0);
    std::vector<SplitSum::TableAdjoint> partial_tables;
    if (table_adj)
        partial_tables.assign(num_chunks, SplitSum::TableAdjoint(ss));

    parallel_chunks(n, chunk, threads, [&](size_t c, size_t b, size_t e) {
        for (size_t slot = b; slot < e; ++slot) {
            uint32_t j = static_cast<uint32_t>(
                Rng(seed, iteration, slot, 0).uniform_index(n_surfels));
            const Surfel& s = scene.surfels[j];
            Vec3 nrm = s.normal();
            for (int d = 0; d < dirs; ++d) {
                Vec3 wo;
                if (d == 0) {
                    wo = Rng(seed, iteration, slot, 1).uniform_hemisphere(nrm);
                } else {
                    size_t ci = Rng(seed, iteration, slot, 2).uniform_index(cameras.size());
                    Vec3 to_cam = cameras[ci].pos - s.center;
                    double len = norm(to_cam);
                    if (len <= 0.0) continue;
                    wo = to_cam / len;
                }
                Vec3 res = eval_sh(s.sh, wo) - ss.shade(nrm, wo, s.albedo, s.roughness);
                partial_loss[c] +=
                    sample_weight * (std::fabs(res.x) + std::fabs(res.y) + std::fabs(res.z));
                if (!tape) continue;
                double gw = sample_weight * d_loss;
                Vec3 d_res{res.x > 0 ? gw : (res.x < 0 ? -gw : 0.0),
                           res.y > 0 ? gw : (res.y < 0 ? -gw : 0.0),
                           res.z > 0 ? gw : (res.z < 0 ? -gw : 0.0)};
                if (!cfg.detach_lg) {
                    ShBasis basis = sh_basis(wo);
                    for (int ch = 0; ch < 3; ++ch) {
                        if (d_res[ch] == 0.0) continue;
                        for (int k = 0; k < kShBasisCount; ++k)
                            partial_grad[c].push_back(
                                {ParamClass::Sh,
                                 static_cast<uint32_t>(
                                     sh_param_index(j, ch * kShBasisCount + k)),
                                 d_res[ch] * basis[k]});
                    }
                }
                if (!cfg.detach_lpbr && table_adj) {
                    Vec3 d_albedo;
                    double d_rough = 0.0;
                    ss.shade_backward(nrm, wo, s.albedo, s.roughness, -d_res, d_albedo,
                                      d_rough, partial_tables[c]);
                    for (int ch = 0; ch < 3; ++ch)
                        partial_grad[c].push_back(
                            {ParamClass::Albedo,
                             static_cast<uint32_t>(albedo_param_index(j, ch)), d_albedo[ch]});
                    partial_grad[c].push_back({ParamClass::Roughness, j, d_rough});
                }
            }
        }
    });
    double loss = 0.0;
    for (double p : partial_loss) loss += p;
    if (tape)
        for (const SparseGrad& g : partial_grad) tape->accumulate(g);
    if (table_adj)
        for (const auto& t : partial_tables) table_adj->add(t);
    return loss;
}

// Physically-based image: each blended primary hit is shaded by the Monte
// Carlo estimate. Rays are keyed by (seed, pixel, surfel) so results are
// independent of scheduling.
inline RenderOutput render_pbr_mc(const Tracer& tracer, const Cubemap& env, const Camera& camera,
                                  int n_s, uint64_t seed, IncidentTerm term, int threads) {
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
                                return pbr_radiance(tracer, env, idx, -ray.dir, n_s,
                                                    Rng(seed, i, idx), term);
                            });
                            out.color.pixels[i] = r.value;
                            out.alpha[i] = 1.0 - r.transmittance;
                        }
                    });
    return out;
}

inline void render_pbr_mc_backward(const Tracer& tracer, const Cubemap& env,
                                   const Camera& camera, int n_s, uint64_t seed,
                                   IncidentTerm term, const Image& d_color, int threads,
                                   GradientTape& tape) {
    size_t n = d_color.pixel_count();
    size_t chunk = static_cast<size_t>(camera.width);
    size_t num_chunks = (n + chunk - 1) / chunk;
    std::vector<SparseGrad> partial(num_chunks);
    parallel_chunks(n, chunk, threads, [&](size_t c, size_t b, size_t e) {
        // One cache per blended hit: the replay fills them in blend order and
        // the adjoint phase looks its hit's rays back up by surfel id.
        std::vector<std::pair<uint32_t, std::vector<PbrRayCache>>> caches;
        for (size_t i = b; i < e; ++i) {
            Vec3 dv = d_color.pixels[i];
            if (dv.x == 0 && dv.y == 0 && dv.z == 0) continue;
            int x = static_cast<int>(i % camera.width);
            int y = static_cast<int>(i / camera.width);
            Ray ray = camera.primary_ray(x, y);
            caches.clear();
            tracer.trace_custom_backward(
                ray, -1,
                [&](uint32_t idx) {
                    caches.emplace_back(idx, std::vector<PbrRayCache>{});
                    return pbr_radiance(tracer, env, idx, -ray.dir, n_s, Rng(seed, i, idx),
                                        term, &caches.back().second);
                },
                dv, 0.0,
                [&](uint32_t idx, const Vec3& dc) {
                    for (const auto& [hit, cache] : caches) {
                        if (hit != idx) continue;
                        pbr_radiance_backward(tracer, env, idx, -ray.dir, n_s,
                                              Rng(seed, i, idx), term, cache, dc, partial[c]);
                        break;
                    }
                },
                partial[c]);
        }
    });
    for (const SparseGrad& g : partial) tape.accumulate(g);
}

}  // namespace radsurf
