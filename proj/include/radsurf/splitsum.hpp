#pragma once

// Split-sum image-based shading. Precomputes a GGX-prefiltered environment
// mip chain, a cosine irradiance map, and a Karis BRDF integration LUT.
//
// The sampling pattern of the prefilter and irradiance integrals depends only
// on texel directions and fixed seeds, never on texel values, so both tables
// are linear in the environment. They are materialized once as sparse
// operators; refreshing tables after an optimizer step is a matvec and the
// exact environment gradient is the transposed matvec.

#include <cstdint>
#include <map>
#include <vector>

#include "radsurf/brdf.hpp"
#include "radsurf/cubemap.hpp"
#include "radsurf/grad.hpp"
#include "radsurf/parallel.hpp"
#include "radsurf/rng.hpp"

namespace radsurf {

inline constexpr int kPrefilterSamples = 256;
inline constexpr int kIrradianceSamples = 512;
inline constexpr int kLutRes = 64;
// Stratified sample grid per LUT cell; grazing n.v cells carry a 1/(n.v)
// variance amplification that plain random sampling resolves poorly.
inline constexpr int kLutSampleGrid = 64;
inline constexpr uint64_t kSeedPrefilter = 0x70726566;
inline constexpr uint64_t kSeedIrradiance = 0x69727261;
inline constexpr uint64_t kSeedLut = 0x6c7574;

namespace detail {

// Sparse row-major operator: out[r] = sum_k w[k] * in[col[k]].
struct LinearOp {
    std::vector<uint32_t> row_ptr;
    std::vector<uint32_t> col;
    std::vector<double> w;

    size_t rows() const { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }

    void assemble(std::vector<std::map<uint32_t, double>>&& row_maps) {
        row_ptr.assign(row_maps.size() + 1, 0);
        size_t nnz = 0;
        for (size_t r = 0; r < row_maps.size(); ++r) {
            nnz += row_maps[r].size();
            row_ptr[r + 1] = static_cast<uint32_t>(nnz);
        }
        col.reserve(nnz);
        w.reserve(nnz);
        for (auto& rm : row_maps) {
            for (const auto& [c, weight] : rm) {
                col.push_back(c);
                w.push_back(weight);
            }
        }
    }

    void apply(const std::vector<Vec3>& in, std::vector<Vec3>& out, int threads) const {
        out.assign(rows(), Vec3{});
        parallel_chunks(rows(), 256, threads, [&](size_t, size_t b, size_t e) {
            for (size_t r = b; r < e; ++r) {
                Vec3 acc;
                for (uint32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += w[k] * in[col[k]];
                out[r] = acc;
            }
        });
    }

    // in_adj[col] += w * out_adj[row]; serial, fixed order.
    void apply_transpose_add(const std::vector<Vec3>& out_adj, std::vector<Vec3>& in_adj) const {
        for (size_t r = 0; r < rows(); ++r) {
            const Vec3& a = out_adj[r];
            if (a.x == 0 && a.y == 0 && a.z == 0) continue;
            for (uint32_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) in_adj[col[k]] += w[k] * a;
        }
    }
};

// GGX half-vector importance sample around +Z; pdf proportional to D * cos.
inline Vec3 ggx_half_sample(double u1, double u2, double alpha_g) {
    double a2 = alpha_g * alpha_g;
    double phi = kTwoPi * u1;
    double cos2 = (1.0 - u2) / (1.0 + (a2 - 1.0) * u2);
    double cos_t = std::sqrt(std::max(0.0, cos2));
    double sin_t = std::sqrt(std::max(0.0, 1.0 - cos2));
    return {sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t};
}

// Visible-normal GGX sample (Heitz 2018) for a view direction with v.z > 0.
// pdf(h) = G1(v) D(h) (v.h) / (n.v); reflecting v about h and weighting by
// G1(l) integrates the separable-Smith specular lobe with weights <= 1.
inline Vec3 ggx_vndf_sample(const Vec3& v, double alpha_g, double u1, double u2) {
    Vec3 vh = normalize(Vec3{alpha_g * v.x, alpha_g * v.y, v.z});
    double lensq = vh.x * vh.x + vh.y * vh.y;
    Vec3 t1 = lensq > 0.0 ? Vec3{-vh.y, vh.x, 0.0} / std::sqrt(lensq) : Vec3{1, 0, 0};
    Vec3 t2 = cross(vh, t1);
    double r = std::sqrt(u1);
    double phi = kTwoPi * u2;
    double p1 = r * std::cos(phi);
    double p2 = r * std::sin(phi);
    double s = 0.5 * (1.0 + vh.z);
    p2 = (1.0 - s) * std::sqrt(std::max(0.0, 1.0 - p1 * p1)) + s * p2;
    Vec3 nh = p1 * t1 + p2 * t2 + std::sqrt(std::max(0.0, 1.0 - p1 * p1 - p2 * p2)) * vh;
    return normalize(Vec3{alpha_g * nh.x, alpha_g * nh.y, std::max(0.0, nh.z)});
}

}  // namespace detail

struct BrdfLut {
    int res = kLutRes;
    std::vector<double> scale;  // multiplies F0
    std::vector<double> bias;

    double at_scale(int i, int j) const { return scale[static_cast<size_t>(j) * res + i]; }
    double at_bias(int i, int j) const { return bias[static_cast<size_t>(j) * res + i]; }
};

// Karis environment-BRDF integration over (n.v, roughness) cell centers,
// using the exact Smith term of eval_brdf.
inline BrdfLut compute_brdf_lut(int threads) {
    BrdfLut lut;
    size_t cells = static_cast<size_t>(kLutRes) * kLutRes;
    lut.scale.assign(cells, 0.0);
    lut.bias.assign(cells, 0.0);
    parallel_chunks(cells, 64, threads, [&](size_t, size_t b, size_t e) {
        for (size_t cell = b; cell < e; ++cell) {
            int i = static_cast<int>(cell % kLutRes);
            int j = static_cast<int>(cell / kLutRes);
            double n_v = (i + 0.5) / kLutRes;
            double rough = (j + 0.5) / kLutRes;
            double alpha_g = rough * rough;
            Vec3 v{std::sqrt(std::max(0.0, 1.0 - n_v * n_v)), 0.0, n_v};
            Rng rng(kSeedLut, cell);
            double a = 0.0, bsum = 0.0;
            for (int s = 0; s < kLutSampleGrid * kLutSampleGrid; ++s) {
                double u1 = (s % kLutSampleGrid + rng.uniform()) / kLutSampleGrid;
                double u2 = (s / kLutSampleGrid + rng.uniform()) / kLutSampleGrid;
                Vec3 h = detail::ggx_vndf_sample(v, alpha_g, u1, u2);
                Vec3 l = 2.0 * dot(v, h) * h - v;
                if (l.z <= 0.0) continue;
                double v_h = std::max(dot(v, h), 0.0);
                if (v_h <= 0.0) continue;
                double w = smith_g1(l.z, alpha_g);
                double fc = std::pow(1.0 - v_h, 5.0);
                a += (1.0 - fc) * w;
                bsum += fc * w;
            }
            lut.scale[cell] = a / (kLutSampleGrid * kLutSampleGrid);
            lut.bias[cell] = bsum / (kLutSampleGrid * kLutSampleGrid);
        }
    });
    return lut;
}

// Process-wide LUT; it depends on nothing but pinned constants.
inline const BrdfLut& shared_brdf_lut() {
    static const BrdfLut lut = compute_brdf_lut(0);
    return lut;
}

class SplitSum {
  public:
    // Builds the sampling operators for an environment of resolution env_res.
    explicit SplitSum(int env_res, int threads = 0)
        : env_res_(env_res), lut_(&shared_brdf_lut()) {
        if (env_res < 1) throw std::invalid_argument("split-sum env resolution must be >= 1");
        levels_ = 1;
        while ((env_res >> (levels_ - 1)) > 1) ++levels_;
        build_prefilter_ops(threads);
        build_irradiance_op(threads);
        prefiltered_.resize(levels_);
        for (int l = 0; l < levels_; ++l)
            prefiltered_[l] = Cubemap(std::max(1, env_res_ >> l));
        irradiance_ = Cubemap(env_res_);
    }

    int levels() const { return levels_; }
    double level_roughness(int l) const {
        return levels_ > 1 ? static_cast<double>(l) / (levels_ - 1) : 0.0;
    }

    // Re-evaluates all tables for the given environment values.
    void refresh(const Cubemap& env, int threads = 0) {
        if (env.res() != env_res_)
            throw std::invalid_argument("split-sum tables built for a different resolution");
        prefiltered_[0] = env;
        for (int l = 1; l < levels_; ++l)
            prefilter_ops_[l - 1].apply(env.texels(), prefiltered_[l].texels(), threads);
        irradiance_op_.apply(env.texels(), irradiance_.texels(), threads);
    }

    const Cubemap& prefiltered(int level) const { return prefiltered_[level]; }
    const Cubemap& irradiance() const { return irradiance_; }
    const BrdfLut& lut() const { return *lut_; }

    // (scale, bias) with bilinear interpolation between cell centers; clamped
    // (constant) extrapolation at the borders.
    void lut_lookup(double n_v, double rough, double& scale, double& bias,
                    double* d_scale_d_rough = nullptr, double* d_bias_d_rough = nullptr) const {
        auto coord = [&](double x, int& i0, double& f) {
            double c = x * kLutRes - 0.5;
            if (c <= 0.0) {
                i0 = 0;
                f = 0.0;
            } else if (c >= kLutRes - 1) {
                i0 = kLutRes - 2;
                f = 1.0;
            } else {
                i0 = static_cast<int>(c);
                f = c - i0;
            }
        };
        int i0, j0;
        double fi, fj;
        coord(n_v, i0, fi);
        coord(rough, j0, fj);
        auto blend = [&](const std::vector<double>& tab) {
            auto at = [&](int i, int j) { return tab[static_cast<size_t>(j) * kLutRes + i]; };
            double lo = (1.0 - fi) * at(i0, j0) + fi * at(i0 + 1, j0);
            double hi = (1.0 - fi) * at(i0, j0 + 1) + fi * at(i0 + 1, j0 + 1);
            return std::pair<double, double>{(1.0 - fj) * lo + fj * hi, hi - lo};
        };
        auto [s, ds] = blend(lut_->scale);
        auto [b, db] = blend(lut_->bias);
        scale = s;
        bias = b;
        bool interior = rough * kLutRes - 0.5 > 0.0 && rough * kLutRes - 0.5 < kLutRes - 1;
        if (d_scale_d_rough) *d_scale_d_rough = interior ? ds * kLutRes : 0.0;
        if (d_bias_d_rough) *d_bias_d_rough = interior ? db * kLutRes : 0.0;
    }

    // Split-sum outgoing radiance for a surface seen from wo (unit, away from
    // the surface). Zero when wo lies below the surface.
    Vec3 shade(const Vec3& n, const Vec3& wo, const Vec3& albedo, double rough) const {
        double n_v = dot(n, wo);
        if (n_v <= 0.0) return {};
        Vec3 diffuse = mul(albedo, irradiance_.sample(n));
        Vec3 refl = reflect_about(wo, n);
        int l0;
        double fl;
        mip_coord(rough, l0, fl);
        Vec3 pref = (1.0 - fl) * prefiltered_[l0].sample(refl) +
                    fl * prefiltered_[l0 + 1].sample(refl);
        double scale, bias;
        lut_lookup(n_v, rough, scale, bias);
        return diffuse + (kFresnelF0 * scale + bias) * pref;
    }

    // Adjoints of shade() into material gradients and table adjoints (to be
    // turned into env gradients by env_backward).
    struct TableAdjoint {
        std::vector<Vec3> irradiance;
        std::vector<std::vector<Vec3>> prefiltered;  // per level

        explicit TableAdjoint(const SplitSum& ss) {
            irradiance.assign(ss.irradiance_.texel_count(), Vec3{});
            prefiltered.resize(ss.levels_);
            for (int l = 0; l < ss.levels_; ++l)
                prefiltered[l].assign(ss.prefiltered_[l].texel_count(), Vec3{});
        }

        void add(const TableAdjoint& o) {
            for (size_t i = 0; i < irradiance.size(); ++i) irradiance[i] += o.irradiance[i];
            for (size_t l = 0; l < prefiltered.size(); ++l)
                for (size_t i = 0; i < prefiltered[l].size(); ++i)
                    prefiltered[l][i] += o.prefiltered[l][i];
        }
    };

    void shade_backward(const Vec3& n, const Vec3& wo, const Vec3& albedo, double rough,
                        const Vec3& d_out, Vec3& d_albedo, double& d_rough,
                        TableAdjoint& tables) const {
        double n_v = dot(n, wo);
        if (n_v <= 0.0) return;
        Vec3 irr = irradiance_.sample(n);
        d_albedo += mul(d_out, irr);
        size_t irr_idx = irradiance_.flat_index_of(n);
        tables.irradiance[irr_idx] += mul(d_out, albedo);

        Vec3 refl = reflect_about(wo, n);
        int l0;
        double fl;
        mip_coord(rough, l0, fl);
        size_t p0 = prefiltered_[l0].flat_index_of(refl);
        size_t p1 = prefiltered_[l0 + 1].flat_index_of(refl);
        Vec3 c0 = prefiltered_[l0].texels()[p0];
        Vec3 c1 = prefiltered_[l0 + 1].texels()[p1];
        Vec3 pref = (1.0 - fl) * c0 + fl * c1;
        double scale, bias, d_scale, d_bias;
        lut_lookup(n_v, rough, scale, bias, &d_scale, &d_bias);
        double env_brdf = kFresnelF0 * scale + bias;

        tables.prefiltered[l0][p0] += (1.0 - fl) * env_brdf * d_out;
        tables.prefiltered[l0 + 1][p1] += fl * env_brdf * d_out;

        double d_pref_dot = dot(d_out, c1 - c0);  // through the mip lerp
        double d_env_brdf = dot(d_out, pref);
        double mip_slope = rough > 0.0 && rough < 1.0 ? levels_ - 1.0 : 0.0;
        d_rough += d_pref_dot * env_brdf * mip_slope +
                   d_env_brdf * (kFresnelF0 * d_scale + d_bias);
    }

    // env_grad[texel*3 + ch] += transposed sampling operators applied to the
    // table adjoints. Exact because every table is linear in the environment.
    void env_backward(const TableAdjoint& tables, GradientTape& tape) const {
        std::vector<Vec3> d_env(static_cast<size_t>(Cubemap::kFaces) * env_res_ * env_res_,
                                Vec3{});
        for (size_t i = 0; i < tables.prefiltered[0].size(); ++i)
            d_env[i] += tables.prefiltered[0][i];  // level 0 is a copy
        for (int l = 1; l < levels_; ++l)
            prefilter_ops_[l - 1].apply_transpose_add(tables.prefiltered[l], d_env);
        irradiance_op_.apply_transpose_add(tables.irradiance, d_env);
        auto& buf = tape.grads(ParamClass::Env);
        for (size_t i = 0; i < d_env.size(); ++i)
            for (int ch = 0; ch < 3; ++ch) buf[i * 3 + ch] += d_env[i][ch];
    }

  private:
    void mip_coord(double rough, int& l0, double& frac) const {
        double c = std::clamp(rough, 0.0, 1.0) * (levels_ - 1);
        l0 = std::min(static_cast<int>(c), levels_ - 2);
        frac = c - l0;
    }

    void build_prefilter_ops(int threads) {
        prefilter_ops_.resize(static_cast<size_t>(levels_) - 1);
        Cubemap probe(env_res_);  // for locate() on the source resolution
        for (int l = 1; l < levels_; ++l) {
            int res = std::max(1, env_res_ >> l);
            Cubemap out_probe(res);
            double rough = level_roughness(l);
            double alpha_g = rough * rough;
            size_t rows = out_probe.texel_count();
            std::vector<std::map<uint32_t, double>> row_maps(rows);
            parallel_chunks(rows, 64, threads, [&](size_t, size_t b, size_t e) {
                for (size_t row = b; row < e; ++row) {
                    int face = static_cast<int>(row / (static_cast<size_t>(res) * res));
                    int rem = static_cast<int>(row % (static_cast<size_t>(res) * res));
                    Vec3 nrm = out_probe.texel_direction(face, rem % res, rem / res);
                    Vec3 b1, b2;
                    build_onb(nrm, b1, b2);
                    Rng rng(kSeedPrefilter, static_cast<uint64_t>(l), row);
                    std::map<uint32_t, double>& rmap = row_maps[row];
                    double weight_sum = 0.0;
                    std::vector<std::pair<uint32_t, double>> raw;
                    raw.reserve(kPrefilterSamples);
                    for (int s = 0; s < kPrefilterSamples; ++s) {
                        double u1 = rng.uniform();
                        double u2 = rng.uniform();
                        Vec3 hl = detail::ggx_half_sample(u1, u2, alpha_g);
                        Vec3 h = hl.x * b1 + hl.y * b2 + hl.z * nrm;
                        Vec3 ldir = 2.0 * dot(nrm, h) * h - nrm;  // v = n
                        double n_l = dot(nrm, ldir);
                        if (n_l <= 0.0) continue;
                        raw.emplace_back(static_cast<uint32_t>(probe.flat_index_of(ldir)), n_l);
                        weight_sum += n_l;
                    }
                    for (auto& [c, wgt] : raw)
                        if (weight_sum > 0.0) rmap[c] += wgt / weight_sum;
                }
            });
            prefilter_ops_[l - 1].assemble(std::move(row_maps));
        }
    }

    void build_irradiance_op(int threads) {
        Cubemap probe(env_res_);
        size_t rows = probe.texel_count();
        std::vector<std::map<uint32_t, double>> row_maps(rows);
        parallel_chunks(rows, 64, threads, [&](size_t, size_t b, size_t e) {
            for (size_t row = b; row < e; ++row) {
                int face = static_cast<int>(row / (static_cast<size_t>(env_res_) * env_res_));
                int rem = static_cast<int>(row % (static_cast<size_t>(env_res_) * env_res_));
                Vec3 nrm = probe.texel_direction(face, rem % env_res_, rem / env_res_);
                Rng rng(kSeedIrradiance, row);
                std::map<uint32_t, double>& rmap = row_maps[row];
                for (int s = 0; s < kIrradianceSamples; ++s) {
                    Vec3 d = rng.cosine_hemisphere(nrm);
                    rmap[static_cast<uint32_t>(probe.flat_index_of(d))] +=
                        1.0 / kIrradianceSamples;
                }
            }
        });
        irradiance_op_.assemble(std::move(row_maps));
    }

    int env_res_;
    int levels_;
    const BrdfLut* lut_;
    std::vector<detail::LinearOp> prefilter_ops_;  // levels 1..levels-1
    detail::LinearOp irradiance_op_;
    std::vector<Cubemap> prefiltered_;
    Cubemap irradiance_;
};

}  // namespace radsurf
