#pragma once

// Optimization driver: bias-corrected Adam over the parameter classes, three
// stage presets (init, inverse, relight), a per-iteration loss ledger logged
// as CSV, and binary checkpoints that restore parameters and moments exactly.
//
// Determinism contract: every random draw in an iteration is keyed by
// (seed, purpose, iteration, ...), all parallel reductions merge fixed-size
// chunks in index order, and CSV rows print with %.17g. Two runs with the
// same seed produce byte-identical logs regardless of thread count.

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "radsurf/grad.hpp"
#include "radsurf/image_io.hpp"
#include "radsurf/losses.hpp"
#include "radsurf/radiometry.hpp"
#include "radsurf/scene.hpp"
#include "radsurf/shading.hpp"

namespace radsurf {

// Raised when the optimization state stops being finite.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First and second moment buffers for one parameter class.
struct AdamState {
    std::vector<double> m, v;
    uint64_t step = 0;

    void reset(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

// One bias-corrected Adam update followed by the class's box projection.
inline void adam_step(ParamView view, const std::vector<double>& grad, AdamState& st,
                      const AdamConfig& cfg) {
    size_t n = view.size();
    if (grad.size() != n) throw std::invalid_argument("adam_step: gradient size mismatch");
    if (st.m.size() != n) st.reset(n);
    ++st.step;
    double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
    for (size_t i = 0; i < n; ++i) {
        double g = grad[i];
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
        double m_hat = st.m[i] / c1;
        double v_hat = st.v[i] / c2;
        view.set(i, view.project(view.get(i) - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps)));
    }
}

struct LearningRates {
    double sh = 0.0025;
    double albedo = 0.005;
    double roughness = 0.005;
    double opacity = 0.05;
    double env = 0.01;

    double of(ParamClass c) const {
        switch (c) {
            case ParamClass::Sh: return sh;
            case ParamClass::Albedo: return albedo;
            case ParamClass::Roughness: return roughness;
            case ParamClass::Opacity: return opacity;
            case ParamClass::Env: return env;
            default: throw std::invalid_argument("unknown parameter class");
        }
    }
};

enum class Stage { Init, Inverse, Relight };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Init: return "init";
        case Stage::Inverse: return "inverse";
        case Stage::Relight: return "relight";
    }
    return "?";
}

// Loss weights. Values reported in the ledger are unweighted; these scale the
// gradients and the logged total.
struct LossWeights {
    double rad = 0.2;
    double distortion = 1000.0;  // diagnostic only: no gradient at fixed geometry
    double normal_depth = 0.05;  // diagnostic only
    double normal_smooth = 0.02;
    double mask = 0.05;
    double albedo_smooth = 0.2;
    double rough_smooth = 0.1;
    double light_prior = 0.01;
};

struct StageConfig {
    Stage stage = Stage::Init;
    int iterations = 200;
    uint64_t seed = 1;
    int threads = 0;  // 0: all hardware threads
    LossWeights weights;
    RadLossConfig rad;
    LearningRates lr;
    std::array<bool, kParamClassCount> trainable{};
    int pbr_rays = 16;          // per-hit rays for the Monte Carlo recon render
    int checkpoint_every = 0;   // 0: only the final state
    std::string out_dir;        // empty: keep results in memory only
    bool log_stdout = false;
};

// Stage presets. Init trains everything against the split-sum shade; inverse
// re-estimates materials and light with full Monte Carlo transport; relight
// refits the stored radiance only, with the consistency term at full weight.
inline StageConfig default_stage_config(Stage s) {
    StageConfig c;
    c.stage = s;
    auto on = [&](ParamClass p) { c.trainable[static_cast<size_t>(p)] = true; };
    switch (s) {
        case Stage::Init:
            c.iterations = 400;
            on(ParamClass::Sh);
            on(ParamClass::Albedo);
            on(ParamClass::Roughness);
            on(ParamClass::Opacity);
            on(ParamClass::Env);
            break;
        case Stage::Inverse:
            c.iterations = 300;
            on(ParamClass::Sh);
            on(ParamClass::Albedo);
            on(ParamClass::Roughness);
            on(ParamClass::Env);
            break;
        case Stage::Relight:
            c.iterations = 400;
            c.weights = LossWeights{};
            c.weights.rad = 1.0;
            on(ParamClass::Sh);
            break;
    }
    return c;
}

// Material and light reset applied between the init and inverse stages.
inline void reinit_materials(Scene& scene, double albedo = 0.5, double roughness = 0.5,
                             double env_value = 0.5) {
    for (Surfel& s : scene.surfels) {
        s.albedo = {albedo, albedo, albedo};
        s.roughness = roughness;
    }
    for (Vec3& t : scene.env.texels()) t = {env_value, env_value, env_value};
}

// Per-iteration loss ledger. Components are unweighted; total applies the
// stage weights used for the gradient step.
struct LossBreakdown {
    double recon = 0, recon_pbr = 0, rad = 0, distortion = 0, normal_depth = 0,
           normal_smooth = 0, mask = 0, albedo_smooth = 0, rough_smooth = 0, light_prior = 0;
    double total = 0;

    void finalize(const LossWeights& w) {
        total = recon + recon_pbr + w.rad * rad + w.distortion * distortion +
                w.normal_depth * normal_depth + w.normal_smooth * normal_smooth +
                w.mask * mask + w.albedo_smooth * albedo_smooth +
                w.rough_smooth * rough_smooth + w.light_prior * light_prior;
    }
};

inline constexpr const char* kLossCsvHeader =
    "iter,recon,recon_pbr,rad,distortion,normal_depth,normal_smooth,mask,"
    "albedo_smooth,rough_smooth,light_prior,total";

inline std::string loss_csv_row(uint64_t iter, const LossBreakdown& b) {
    return strformat("%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                     static_cast<unsigned long long>(iter), b.recon, b.recon_pbr, b.rad,
                     b.distortion, b.normal_depth, b.normal_smooth, b.mask, b.albedo_smooth,
                     b.rough_smooth, b.light_prior, b.total);
}

struct OptimState {
    std::array<AdamState, kParamClassCount> adam;
};

namespace detail {

inline void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_doubles(std::istream& in, size_t expect) {
    uint64_t n = read_u64(in);
    if (n != expect) throw std::runtime_error("checkpoint: buffer size mismatch");
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'R', 'G', 'S', 'O', 'P', 'T', '1', '\0'};

// Binary checkpoint: step counters, Adam moments, and raw double parameters
// for every class. Parameters are stored here (not only in the scene files)
// because the PFM environment is float32 and would not round-trip exactly.
inline void save_checkpoint(const Scene& scene, const OptimState& st, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(strformat("cannot open %s for writing", path.c_str()));
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::write_u64(out, kParamClassCount);
    for (size_t c = 0; c < kParamClassCount; ++c) {
        ParamClass pc = static_cast<ParamClass>(c);
        size_t n = param_class_size(scene, pc);
        const AdamState& a = st.adam[c];
        detail::write_u64(out, a.step);
        std::vector<double> zeros;
        const std::vector<double>* m = &a.m;
        const std::vector<double>* v = &a.v;
        if (a.m.size() != n) {
            zeros.assign(n, 0.0);
            m = &zeros;
            v = &zeros;
        }
        detail::write_doubles(out, *m);
        detail::write_doubles(out, *v);
        ParamView view(const_cast<Scene&>(scene), pc);
        std::vector<double> params(n);
        for (size_t i = 0; i < n; ++i) params[i] = view.get(i);
        detail::write_doubles(out, params);
    }
    if (!out) throw std::runtime_error(strformat("failed writing %s", path.c_str()));
}

inline void load_checkpoint(Scene& scene, OptimState& st, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(strformat("cannot open %s", path.c_str()));
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
        throw std::runtime_error(strformat("%s: not a checkpoint file", path.c_str()));
    if (detail::read_u64(in) != kParamClassCount)
        throw std::runtime_error(strformat("%s: parameter class count mismatch", path.c_str()));
    for (size_t c = 0; c < kParamClassCount; ++c) {
        ParamClass pc = static_cast<ParamClass>(c);
        size_t n = param_class_size(scene, pc);
        AdamState& a = st.adam[c];
        a.step = detail::read_u64(in);
        a.m = detail::read_doubles(in, n);
        a.v = detail::read_doubles(in, n);
        std::vector<double> params = detail::read_doubles(in, n);
        ParamView view(scene, pc);
        for (size_t i = 0; i < n; ++i) view.set(i, params[i]);
        if (!in) throw std::runtime_error(strformat("%s: truncated checkpoint", path.c_str()));
    }
}

struct StageResult {
    std::vector<LossBreakdown> history;
    std::string log_csv;
};

// Runs one optimization stage. Training images come from cameras that carry a
// reference image (resolved against the scene's base directory). The relight
// stage needs no references: it only refits stored radiance to the new light.
inline StageResult run_stage(Scene& scene, OptimState& opt, const StageConfig& cfg) {
    int threads = clamp_threads(cfg.threads);
    Tracer tracer(scene);
    std::optional<SplitSum> ss;
    if (cfg.stage != Stage::Relight) ss.emplace(scene.env.res(), threads);

    std::vector<const Camera*> ref_cams;
    std::vector<Image> refs;
    for (const Camera& cam : scene.cameras) {
        if (cam.ref_image.empty()) continue;
        Image ref = read_pfm(scene.resolve(cam.ref_image));
        if (ref.width != cam.width || ref.height != cam.height)
            throw std::runtime_error(
                strformat("reference %s does not match camera size", cam.ref_image.c_str()));
        refs.push_back(std::move(ref));
        ref_cams.push_back(&cam);
    }
    bool image_losses = cfg.stage != Stage::Relight;
    if (image_losses && ref_cams.empty())
        throw std::runtime_error("stage needs cameras with reference images");

    if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

    const LossWeights& w = cfg.weights;
    GradientTape tape(scene);
    StageResult result;
    result.log_csv = std::string(kLossCsvHeader) + "\n";

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        tape.clear();
        LossBreakdown b;
        if (ss) ss->refresh(scene.env, threads);

        if (image_losses) {
            size_t pick = Rng(cfg.seed, 0xCA11, static_cast<uint64_t>(iter))
                              .uniform_index(ref_cams.size());
            const Camera& cam = *ref_cams[pick];
            const Image& ref = refs[pick];

            if (cfg.stage == Stage::Init) {
                std::vector<std::vector<TraceRecord>> records;
                RenderOutput out = tracer.render_image(cam, TraceMode::Radiance, threads,
                                                       &records);
                Image d_img(cam.width, cam.height);
                b.recon = recon_loss(out.color, ref, 1.0, &d_img).value;
                tracer.render_backward(cam, TraceMode::Radiance, d_img, nullptr, threads,
                                       tape);

                RenderOutput pbr = render_splitsum(tracer, *ss, cam, threads);
                Image d_pbr(cam.width, cam.height);
                b.recon_pbr = recon_loss(pbr.color, ref, 1.0, &d_pbr).value;
                SplitSum::TableAdjoint tables(*ss);
                render_splitsum_backward(tracer, *ss, cam, d_pbr, nullptr, threads, tape,
                                         tables);

                b.distortion = distortion_loss(records);
                RenderOutput depth = tracer.render_image(cam, TraceMode::Depth, threads);
                b.normal_depth = normal_depth_loss(scene, cam, depth.color, records);

                RenderOutput nrm = tracer.render_image(cam, TraceMode::Normal, threads);
                Image d_nrm(cam.width, cam.height);
                b.normal_smooth = edge_aware_smoothness(nrm.color, ref, w.normal_smooth,
                                                        &d_nrm);
                tracer.render_backward(cam, TraceMode::Normal, d_nrm, nullptr, threads, tape);

                b.mask = sparsity_loss(scene, w.mask, &tape);
                b.rad = radiometric_loss_splitsum(tracer, *ss, scene.cameras, cfg.rad,
                                                  cfg.seed, static_cast<uint64_t>(iter),
                                                  threads, &tape, &tables, w.rad);
                ss->env_backward(tables, tape);
            } else {
                uint64_t render_seed = Rng(cfg.seed, 0x7062, static_cast<uint64_t>(iter))
                                           .next64();
                RenderOutput out = render_pbr_mc(tracer, scene.env, cam, cfg.pbr_rays,
                                                 render_seed, IncidentTerm::Full, threads);
                Image d_img(cam.width, cam.height);
                b.recon_pbr = recon_loss(out.color, ref, 1.0, &d_img).value;
                render_pbr_mc_backward(tracer, scene.env, cam, cfg.pbr_rays, render_seed,
                                       IncidentTerm::Full, d_img, threads, tape);

                RenderOutput alb = tracer.render_image(cam, TraceMode::Albedo, threads);
                Image d_alb(cam.width, cam.height);
                b.albedo_smooth = edge_aware_smoothness(alb.color, ref, w.albedo_smooth,
                                                        &d_alb);
                tracer.render_backward(cam, TraceMode::Albedo, d_alb, nullptr, threads, tape);

                RenderOutput rgh = tracer.render_image(cam, TraceMode::Roughness, threads);
                Image d_rgh(cam.width, cam.height);
                b.rough_smooth = edge_aware_smoothness(rgh.color, ref, w.rough_smooth,
                                                       &d_rgh);
                tracer.render_backward(cam, TraceMode::Roughness, d_rgh, nullptr, threads,
                                       tape);

                RenderOutput irr = render_irradiance(tracer, *ss, cam, threads);
                Image d_irr(cam.width, cam.height);
                b.light_prior = light_prior_loss(irr.color, w.light_prior, &d_irr);
                SplitSum::TableAdjoint tables(*ss);
                render_irradiance_backward(tracer, *ss, cam, d_irr, nullptr, threads, tape,
                                           tables);
                ss->env_backward(tables, tape);

                b.rad = radiometric_loss(tracer, scene.env, scene.cameras, cfg.rad, cfg.seed,
                                         static_cast<uint64_t>(iter), threads, &tape, w.rad);
            }
        } else {
            b.rad = radiometric_loss(tracer, scene.env, scene.cameras, cfg.rad, cfg.seed,
                                     static_cast<uint64_t>(iter), threads, &tape, w.rad);
        }

        b.finalize(w);
        if (!std::isfinite(b.total))
            throw NumericalError(strformat("non-finite loss at %s iteration %d",
                                           stage_name(cfg.stage), iter));

        for (size_t c = 0; c < kParamClassCount; ++c) {
            if (!cfg.trainable[c]) continue;
            ParamClass pc = static_cast<ParamClass>(c);
            AdamConfig ac;
            ac.lr = cfg.lr.of(pc);
            adam_step(ParamView(scene, pc), tape.grads(pc), opt.adam[c], ac);
        }
        tracer.refresh_params();

        result.history.push_back(b);
        result.log_csv += loss_csv_row(static_cast<uint64_t>(iter), b) + "\n";
        if (cfg.log_stdout && (iter % 20 == 0 || iter + 1 == cfg.iterations))
            std::printf("[%s %4d/%d] total %.6g rad %.6g\n", stage_name(cfg.stage), iter,
                        cfg.iterations, b.total, b.rad);

        if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
            (iter + 1) % cfg.checkpoint_every == 0) {
            save_checkpoint(scene, opt,
                            (std::filesystem::path(cfg.out_dir) /
                             strformat("ckpt_%s_%05d.opt", stage_name(cfg.stage), iter + 1))
                                .string());
        }
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::path dir(cfg.out_dir);
        std::ofstream log(dir / strformat("log_%s.csv", stage_name(cfg.stage)));
        log << result.log_csv;
        save_checkpoint(scene, opt,
                        (dir / strformat("state_%s.opt", stage_name(cfg.stage))).string());
    }
    return result;
}

// Relighting: swap the environment and finetune only the stored radiance
// field under the consistency term at full weight.
inline StageResult relight_finetune(Scene& scene, const Cubemap& new_env, int iterations,
                                    uint64_t seed, int threads,
                                    const std::string& out_dir = std::string()) {
    scene.env = new_env;
    OptimState opt;
    StageConfig cfg = default_stage_config(Stage::Relight);
    cfg.iterations = iterations;
    cfg.seed = seed;
    cfg.threads = threads;
    cfg.out_dir = out_dir;
    return run_stage(scene, opt, cfg);
}

}  // namespace radsurf
