#pragma once

// Differentiable ray tracer over Gaussian disk surfels. Hits are gathered in
// fixed-size chunks of the K nearest remaining intersections (ordered by
// (t, surfel index)), alpha-blended front to back, and terminated once the
// transmittance drops below a threshold. The chunked schedule produces the
// same blend sequence as a global sort of all intersections, so results do
// not depend on chunk boundaries.

#include <optional>
#include <vector>

#include "radsurf/bvh.hpp"
#include "radsurf/grad.hpp"
#include "radsurf/parallel.hpp"

namespace radsurf {

inline constexpr int kChunkSize = 16;              // hits gathered per traversal pass
inline constexpr double kMinTransmittance = 0.03;  // early termination threshold
inline constexpr double kAlphaGCutoff = 1.0 / 255.0;
inline constexpr double kDenomCutoff = 1e-9;       // |n . d| below this is parallel

struct SplatHit {
    double t;  // ray parameter of the plane intersection
    double u;  // local offset along tangent_u, in units of scale_u
    double v;
    double g;  // Gaussian weight exp(-(u^2+v^2)/2)
};

// Full intersection contract against one surfel: plane hit behind t_min,
// near-parallel rays, points outside the 3-sigma rectangle, and contributions
// with alpha*G below 1/255 all miss.
inline std::optional<SplatHit> intersect_splat(const Ray& ray, const Surfel& s) {
    Vec3 n = s.normal();
    double denom = dot(n, ray.dir);
    if (std::fabs(denom) < kDenomCutoff) return std::nullopt;
    double t = dot(n, s.center - ray.origin) / denom;
    if (!(t > ray.t_min)) return std::nullopt;
    Vec3 local = ray.origin + t * ray.dir - s.center;
    double u = dot(local, s.tangent_u) / s.scale_u;
    if (std::fabs(u) > kSigmaCutoff) return std::nullopt;
    double v = dot(local, s.tangent_v) / s.scale_v;
    if (std::fabs(v) > kSigmaCutoff) return std::nullopt;
    double g = std::exp(-0.5 * (u * u + v * v));
    if (s.opacity * g < kAlphaGCutoff) return std::nullopt;
    return SplatHit{t, u, v, g};
}

enum class TraceMode { Radiance, Normal, Albedo, Roughness, Depth };

struct TraceRecord {
    uint32_t surfel;
    double t;
    double g;
    double weight;  // blend weight T * alpha * G at the time of compositing
};

struct TraceResult {
    Vec3 value;
    double transmittance = 1.0;
    int hits = 0;
};

struct RenderOutput {
    Image color;
    std::vector<double> alpha;  // per-pixel coverage 1 - T, row-major
};

class Tracer {
  public:
    explicit Tracer(const Scene& scene) : scene_(&scene), bvh_(scene.surfels) {
        packed_.resize(scene.surfels.size());
        for (size_t i = 0; i < scene.surfels.size(); ++i) pack(i);
    }

    // Re-reads opacities after an optimizer step. Geometry is immutable, so
    // the BVH stays valid.
    void refresh_params() {
        for (size_t i = 0; i < packed_.size(); ++i) packed_[i].alpha = scene_->surfels[i].opacity;
    }

    const Scene& scene() const { return *scene_; }
    const Bvh& bvh() const { return bvh_; }

    // Core blend schedule. Calls sink(hit, T_before) for every blended hit in
    // front-to-back order and returns the final transmittance.
    template <class Sink>
    double blend_hits(const Ray& ray, int exclude, Sink&& sink) const {
        double T = 1.0;
        GatherKey last{ray.t_min, UINT32_MAX};
        HitRec chunk[kChunkSize];
        for (;;) {
            int m = gather_chunk(ray, exclude, last, chunk);
            if (m == 0) return T;
            for (int i = 0; i < m; ++i) {
                const HitRec& h = chunk[i];
                sink(h, T);
                T *= 1.0 - packed_[h.idx].alpha * h.g;
                if (T < kMinTransmittance) return T;
            }
            if (m < kChunkSize) return T;
            last = {chunk[m - 1].t, chunk[m - 1].idx};
        }
    }

    // Alpha-blended attribute trace. Radiance evaluates each surfel's SH at
    // the direction toward the ray origin, clamped at zero; Depth returns the
    // weight-normalized blended depth in all three channels.
    TraceResult trace(const Ray& ray, TraceMode mode, int exclude = -1,
                      std::vector<TraceRecord>* records = nullptr) const {
        switch (mode) {
            case TraceMode::Radiance: {
                ShBasis basis = sh_basis(-ray.dir);
                return trace_custom(
                    ray, exclude,
                    [&](uint32_t idx) { return eval_sh_clamped(scene_->surfels[idx].sh, basis); },
                    records);
            }
            case TraceMode::Normal:
                return trace_custom(
                    ray, exclude, [&](uint32_t idx) { return packed_[idx].n; }, records);
            case TraceMode::Albedo:
                return trace_custom(
                    ray, exclude, [&](uint32_t idx) { return scene_->surfels[idx].albedo; },
                    records);
            case TraceMode::Roughness:
                return trace_custom(
                    ray, exclude,
                    [&](uint32_t idx) {
                        double r = scene_->surfels[idx].roughness;
                        return Vec3{r, r, r};
                    },
                    records);
            case TraceMode::Depth: {
                double num = 0.0, den = 0.0;
                TraceResult out;
                out.transmittance = blend_hits(ray, exclude, [&](const HitRec& h, double T) {
                    double w = T * packed_[h.idx].alpha * h.g;
                    num += w * h.t;
                    den += w;
                    ++out.hits;
                    if (records) records->push_back({h.idx, h.t, h.g, w});
                });
                double d = den > 0.0 ? num / den : 0.0;
                out.value = {d, d, d};
                return out;
            }
        }
        return {};
    }

    // Blend with caller-supplied per-surfel colors (used by shaded renders).
    template <class ColorFn>
    TraceResult trace_custom(const Ray& ray, int exclude, ColorFn&& color,
                             std::vector<TraceRecord>* records = nullptr) const {
        TraceResult out;
        out.transmittance = blend_hits(ray, exclude, [&](const HitRec& h, double T) {
            double w = T * packed_[h.idx].alpha * h.g;
            out.value += w * color(h.idx);
            ++out.hits;
            if (records) records->push_back({h.idx, h.t, h.g, w});
        });
        return out;
    }

    double trace_transmittance(const Ray& ray, int exclude = -1) const {
        return blend_hits(ray, exclude, [](const HitRec&, double) {});
    }

    // Reverse pass of trace_custom. Re-gathers the identical blend sequence,
    // then walks it back to front. adjoint(idx, dColor) receives the
    // gradient of the loss w.r.t. that hit's color; opacity gradients are
    // accumulated here. dT is the adjoint of the final transmittance.
    template <class ColorFn, class Adjoint>
    void trace_custom_backward(const Ray& ray, int exclude, ColorFn&& color, const Vec3& d_value,
                               double d_transmittance, Adjoint&& adjoint, SparseGrad& out) const {
        struct Step {
            uint32_t idx;
            double a;  // alpha * G
            double g;
            double T;  // transmittance before this hit
            Vec3 c;
        };
        // One buffer per (thread, call site): lambda-typed instantiations make
        // nested backward passes (primary blend -> per-hit secondary rays)
        // use distinct buffers.
        thread_local std::vector<Step> steps;
        steps.clear();
        double t_final = blend_hits(ray, exclude, [&](const HitRec& h, double T) {
            steps.push_back({h.idx, packed_[h.idx].alpha * h.g, h.g, T, color(h.idx)});
        });
        Vec3 suffix;  // sum of w_j * c_j over hits after the current one
        for (size_t k = steps.size(); k-- > 0;) {
            const Step& s = steps[k];
            double w = s.T * s.a;
            Vec3 dc = w * d_value;
            adjoint(s.idx, dc);
            double one_minus = 1.0 - s.a;  // >= 1e-4 once opacities are projected
            double da = dot(d_value, s.T * s.c - suffix / one_minus) -
                        d_transmittance * t_final / one_minus;
            out.push_back({ParamClass::Opacity, s.idx, s.g * da});
            suffix += w * s.c;
        }
    }

    // Reverse pass of trace() for attribute modes. Depth has no backward; it
    // only feeds diagnostic losses.
    void trace_backward(const Ray& ray, TraceMode mode, const Vec3& d_value,
                        double d_transmittance, int exclude, SparseGrad& out) const {
        switch (mode) {
            case TraceMode::Radiance: {
                ShBasis basis = sh_basis(-ray.dir);
                trace_custom_backward(
                    ray, exclude,
                    [&](uint32_t idx) { return eval_sh_clamped(scene_->surfels[idx].sh, basis); },
                    d_value, d_transmittance,
                    [&](uint32_t idx, const Vec3& dc) {
                        sh_clamped_backward(idx, basis, dc, out);
                    },
                    out);
                return;
            }
            case TraceMode::Normal:
                trace_custom_backward(
                    ray, exclude, [&](uint32_t idx) { return packed_[idx].n; }, d_value,
                    d_transmittance, [](uint32_t, const Vec3&) {}, out);
                return;
            case TraceMode::Albedo:
                trace_custom_backward(
                    ray, exclude, [&](uint32_t idx) { return scene_->surfels[idx].albedo; },
                    d_value, d_transmittance,
                    [&](uint32_t idx, const Vec3& dc) {
                        for (int ch = 0; ch < 3; ++ch)
                            out.push_back({ParamClass::Albedo,
                                           static_cast<uint32_t>(albedo_param_index(idx, ch)),
                                           dc[ch]});
                    },
                    out);
                return;
            case TraceMode::Roughness:
                trace_custom_backward(
                    ray, exclude,
                    [&](uint32_t idx) {
                        double r = scene_->surfels[idx].roughness;
                        return Vec3{r, r, r};
                    },
                    d_value, d_transmittance,
                    [&](uint32_t idx, const Vec3& dc) {
                        out.push_back({ParamClass::Roughness, idx, dc.x + dc.y + dc.z});
                    },
                    out);
                return;
            case TraceMode::Depth:
                throw std::invalid_argument("depth trace has no backward pass");
        }
    }

    // Gradient of clamped SH radiance w.r.t. the surfel's coefficients.
    // Channels clamped at zero pass no gradient.
    void sh_clamped_backward(uint32_t idx, const ShBasis& basis, const Vec3& dc,
                             SparseGrad& out) const {
        const ShCoeffs& sh = scene_->surfels[idx].sh;
        for (int ch = 0; ch < 3; ++ch) {
            if (dc[ch] == 0.0) continue;
            const double* c = sh.data() + ch * kShBasisCount;
            double raw = 0.0;
            for (int i = 0; i < kShBasisCount; ++i) raw += basis[i] * c[i];
            if (raw < 0.0) continue;
            for (int i = 0; i < kShBasisCount; ++i)
                out.push_back({ParamClass::Sh,
                               static_cast<uint32_t>(sh_param_index(idx, ch * kShBasisCount + i)),
                               dc[ch] * basis[i]});
        }
    }

    RenderOutput render_image(const Camera& camera, TraceMode mode, int threads,
                              std::vector<std::vector<TraceRecord>>* records = nullptr) const {
        RenderOutput out;
        out.color = Image(camera.width, camera.height);
        out.alpha.assign(out.color.pixel_count(), 0.0);
        if (records) records->assign(out.color.pixel_count(), {});
        size_t n = out.color.pixel_count();
        parallel_chunks(n, static_cast<size_t>(camera.width), threads,
                        [&](size_t, size_t begin, size_t end) {
                            for (size_t i = begin; i < end; ++i) {
                                int x = static_cast<int>(i % camera.width);
                                int y = static_cast<int>(i / camera.width);
                                TraceResult r = trace(camera.primary_ray(x, y), mode, -1,
                                                      records ? &(*records)[i] : nullptr);
                                out.color.pixels[i] = r.value;
                                out.alpha[i] = 1.0 - r.transmittance;
                            }
                        });
        return out;
    }

    // Accumulates dLoss/dparams for an attribute render. d_alpha may be null;
    // entries merge into the tape in pixel chunk order (bit-reproducible).
    void render_backward(const Camera& camera, TraceMode mode, const Image& d_color,
                         const std::vector<double>* d_alpha, int threads,
                         GradientTape& tape) const {
        size_t n = d_color.pixel_count();
        size_t chunk = static_cast<size_t>(d_color.width);
        size_t num_chunks = (n + chunk - 1) / chunk;
        std::vector<SparseGrad> partial(num_chunks);
        parallel_chunks(n, chunk, threads, [&](size_t c, size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i) {
                Vec3 dv = d_color.pixels[i];
                double dt = d_alpha ? -(*d_alpha)[i] : 0.0;  // alpha = 1 - T
                if (dv.x == 0 && dv.y == 0 && dv.z == 0 && dt == 0) continue;
                int x = static_cast<int>(i % camera.width);
                int y = static_cast<int>(i / camera.width);
                trace_backward(camera.primary_ray(x, y), mode, dv, dt, -1, partial[c]);
            }
        });
        for (const SparseGrad& g : partial) tape.accumulate(g);
    }

  private:
    struct PackedSurfel {
        Vec3 p, tu, tv, n;
        double su, sv, alpha;
    };

    struct GatherKey {
        double t;
        uint32_t idx;
    };

    struct HitRec {
        double t;
        double g;
        uint32_t idx;
    };

    void pack(size_t i) {
        const Surfel& s = scene_->surfels[i];
        packed_[i] = {s.center,  s.tangent_u, s.tangent_v, s.normal(),
                      s.scale_u, s.scale_v,   s.opacity};
    }

    static bool key_less(double t_a, uint32_t i_a, double t_b, uint32_t i_b) {
        return t_a < t_b || (t_a == t_b && i_a < i_b);
    }

    // K nearest intersections with (t, idx) strictly after `last`, sorted
    // ascending. Returns the number found.
    int gather_chunk(const Ray& ray, int exclude, const GatherKey& last,
                     HitRec (&out)[kChunkSize]) const {
        if (bvh_.empty()) return 0;
        Vec3 inv_d = Bvh::safe_inv(ray.dir);
        int count = 0;
        uint32_t stack[Bvh::kMaxDepth + 2];
        int sp = 0;
        stack[sp++] = 0;
        const auto& nodes = bvh_.nodes();
        const auto& prims = bvh_.prim_indices();
        while (sp > 0) {
            const Bvh::Node& node = nodes[stack[--sp]];
            double entry, exit;
            if (!node.box.hit(ray.origin, inv_d, ray.t_min, entry, exit)) continue;
            if (exit < last.t) continue;  // every hit inside lies before the resume key
            if (count == kChunkSize && entry > out[count - 1].t)
                continue;  // cannot beat the current worst key
            if (node.count > 0) {
                for (uint32_t i = 0; i < node.count; ++i) {
                    uint32_t prim = prims[node.first + i];
                    if (static_cast<int>(prim) == exclude) continue;
                    double t, g;
                    if (!intersect_packed(packed_[prim], ray, t, g)) continue;
                    if (!key_less(last.t, last.idx, t, prim)) continue;
                    if (count == kChunkSize) {
                        if (!key_less(t, prim, out[count - 1].t, out[count - 1].idx)) continue;
                        --count;
                    }
                    int pos = count;
                    while (pos > 0 && key_less(t, prim, out[pos - 1].t, out[pos - 1].idx)) {
                        out[pos] = out[pos - 1];
                        --pos;
                    }
                    out[pos] = {t, g, prim};
                    ++count;
                }
            } else {
                // Near child first so the worst-key prune tightens quickly.
                uint32_t left = static_cast<uint32_t>(&node - nodes.data()) + 1;
                uint32_t right = node.link;
                double el, xl, er, xr;
                bool hl = nodes[left].box.hit(ray.origin, inv_d, ray.t_min, el, xl);
                bool hr = nodes[right].box.hit(ray.origin, inv_d, ray.t_min, er, xr);
                if (hl && hr) {
                    if (er < el) std::swap(left, right);
                    stack[sp++] = right;
                    stack[sp++] = left;
                } else if (hl) {
                    stack[sp++] = left;
                } else if (hr) {
                    stack[sp++] = right;
                }
            }
        }
        return count;
    }

    static bool intersect_packed(const PackedSurfel& s, const Ray& ray, double& t, double& g) {
        double denom = dot(s.n, ray.dir);
        if (std::fabs(denom) < kDenomCutoff) return false;
        double t_hit = dot(s.n, s.p - ray.origin) / denom;
        if (!(t_hit > ray.t_min)) return false;
        // Same operations as intersect_splat so both produce identical bits.
        Vec3 local = ray.origin + t_hit * ray.dir - s.p;
        double u = dot(local, s.tu) / s.su;
        if (std::fabs(u) > kSigmaCutoff) return false;
        double v = dot(local, s.tv) / s.sv;
        if (std::fabs(v) > kSigmaCutoff) return false;
        double gg = std::exp(-0.5 * (u * u + v * v));
        if (s.alpha * gg < kAlphaGCutoff) return false;
        t = t_hit;
        g = gg;
        return true;
    }

    const Scene* scene_;
    Bvh bvh_;
    std::vector<PackedSurfel> packed_;
};

}  // namespace radsurf
