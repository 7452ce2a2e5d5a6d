// Command line front end: scene generation, training, relighting, rendering,
// and image comparison.
//
// Exit codes: 0 success, 1 usage error, 2 bad data (unreadable or invalid
// files), 3 numeric divergence during optimization.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <radsurf/radsurf.hpp>

namespace fs = std::filesystem;
using namespace radsurf;

namespace {

struct GenArgs {
    std::string preset = "two-patch";
    std::string out;
    int per_side = 0;  // 0: preset default
    int ref_spp = 512;
    int ref_depth = 4;
    int bake_dirs = 128;
    int bake_spp = 64;
    bool no_bake = false;
    uint64_t seed = 99;
    int threads = 0;
};

int run_gen(const GenArgs& a) {
    Preset preset;
    if (a.per_side > 0) {
        if (a.preset == "two-patch")
            preset = make_two_patch_preset(a.per_side);
        else if (a.preset == "box")
            preset = make_box_preset(a.per_side);
        else
            preset = make_preset(a.preset);
    } else {
        preset = make_preset(a.preset);
    }
    if (!a.no_bake && preset.name != "furnace") {
        std::printf("baking surfel radiance against the path-traced reference...\n");
        bake_radiance_sh(preset.scene, preset.linked(), preset.surfel_patch, a.bake_dirs,
                         a.bake_spp, a.ref_depth, a.seed ^ 0xba5e, a.threads);
    }
    std::printf("rendering %zu reference views at %d spp...\n", preset.scene.cameras.size(),
                a.ref_spp);
    write_preset(preset, a.out, a.ref_spp, a.ref_depth, a.seed, a.threads);
    write_cubemap_pfm((fs::path(a.out) / "env_relight.pfm").string(),
                      make_relight_env(preset.scene.env.res()));
    std::printf("wrote %s (%zu surfels, %zu cameras)\n",
                (fs::path(a.out) / "scene.json").string().c_str(),
                preset.scene.surfels.size(), preset.scene.cameras.size());
    return 0;
}

RunConfig load_config(const std::string& config_path, const std::vector<std::string>& sets) {
    RunConfig rc = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    for (const std::string& kv : sets) rc.apply_override(kv);
    return rc;
}

struct TrainArgs {
    std::string scene;
    std::string out;
    std::string config;
    std::string stages = "init,inverse";
    std::string resume;
    std::vector<std::string> sets;
};

int run_train(const TrainArgs& a) {
    RunConfig rc = load_config(a.config, a.sets);
    Scene scene = load_scene(a.scene);
    fs::create_directories(a.out);
    rc.write_resolved((fs::path(a.out) / "config_resolved.txt").string());

    OptimState opt;
    if (!a.resume.empty()) load_checkpoint(scene, opt, a.resume);

    std::vector<Stage> stages;
    {
        std::string list = a.stages;
        size_t pos = 0;
        while (pos <= list.size()) {
            size_t comma = list.find(',', pos);
            std::string tok = list.substr(pos, comma == std::string::npos ? std::string::npos
                                                                          : comma - pos);
            if (tok == "init")
                stages.push_back(Stage::Init);
            else if (tok == "inverse")
                stages.push_back(Stage::Inverse);
            else if (tok == "relight")
                stages.push_back(Stage::Relight);
            else if (!tok.empty())
                throw std::runtime_error(strformat("unknown stage '%s'", tok.c_str()));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    if (stages.empty()) throw std::runtime_error("no stages requested");

    for (size_t i = 0; i < stages.size(); ++i) {
        StageConfig cfg = stage_from_config(rc, stages[i]);
        cfg.out_dir = a.out;
        if (stages[i] == Stage::Inverse && (i == 0 || stages[i - 1] == Stage::Init)) {
            reinit_materials(scene);
            for (auto& st : opt.adam) st = AdamState{};
        }
        std::printf("== stage %s: %d iterations ==\n", stage_name(stages[i]), cfg.iterations);
        StageResult res = run_stage(scene, opt, cfg);
        std::printf("stage %s done, final total loss %.6g\n", stage_name(stages[i]),
                    res.history.empty() ? 0.0 : res.history.back().total);
    }

    save_scene(scene, (fs::path(a.out) / "scene.json").string());
    std::printf("wrote %s\n", (fs::path(a.out) / "scene.json").string().c_str());
    return 0;
}

struct RelightArgs {
    std::string scene;
    std::string env;
    std::string out;
    std::string config;
    std::vector<std::string> sets;
};

int run_relight(const RelightArgs& a) {
    RunConfig rc = load_config(a.config, a.sets);
    Scene scene = load_scene(a.scene);
    Cubemap new_env = read_cubemap_pfm(a.env);
    fs::create_directories(a.out);
    rc.write_resolved((fs::path(a.out) / "config_resolved.txt").string());

    StageConfig cfg = stage_from_config(rc, Stage::Relight);
    cfg.out_dir = a.out;
    scene.env = new_env;
    OptimState opt;
    StageResult res = run_stage(scene, opt, cfg);
    std::printf("relight done, final consistency loss %.6g\n",
                res.history.empty() ? 0.0 : res.history.back().rad);

    save_scene(scene, (fs::path(a.out) / "scene.json").string());
    std::printf("wrote %s\n", (fs::path(a.out) / "scene.json").string().c_str());
    return 0;
}

struct RenderArgs {
    std::string scene;
    std::string out;
    std::string mode = "surfel";
    int camera = 0;
    int rays = 64;
    uint64_t seed = 7;
    int threads = 0;
    bool indirect_only = false;
    bool png = false;
};

int run_render(const RenderArgs& a) {
    Scene scene = load_scene(a.scene);
    if (a.camera < 0 || static_cast<size_t>(a.camera) >= scene.cameras.size())
        throw std::runtime_error(strformat("camera %d out of range", a.camera));
    const Camera& cam = scene.cameras[static_cast<size_t>(a.camera)];
    Tracer tracer(scene);
    IncidentTerm term = a.indirect_only ? IncidentTerm::IndirectOnly : IncidentTerm::Full;

    RenderOutput out;
    if (a.mode == "surfel")
        out = tracer.render_image(cam, TraceMode::Radiance, a.threads);
    else if (a.mode == "normal")
        out = tracer.render_image(cam, TraceMode::Normal, a.threads);
    else if (a.mode == "albedo")
        out = tracer.render_image(cam, TraceMode::Albedo, a.threads);
    else if (a.mode == "rough")
        out = tracer.render_image(cam, TraceMode::Roughness, a.threads);
    else if (a.mode == "depth")
        out = tracer.render_image(cam, TraceMode::Depth, a.threads);
    else if (a.mode == "pbr-mc")
        out = render_pbr_mc(tracer, scene.env, cam, a.rays, a.seed, term, a.threads);
    else if (a.mode == "pbr-splitsum") {
        SplitSum ss(scene.env.res(), a.threads);
        ss.refresh(scene.env, a.threads);
        out = render_splitsum(tracer, ss, cam, a.threads);
    } else if (a.mode == "irradiance") {
        SplitSum ss(scene.env.res(), a.threads);
        ss.refresh(scene.env, a.threads);
        out = render_irradiance(tracer, ss, cam, a.threads);
    } else {
        throw std::runtime_error(strformat("unknown render mode '%s'", a.mode.c_str()));
    }

    write_pfm(a.out, out.color);
    if (a.png) {
        fs::path p(a.out);
        p.replace_extension(".png");
        write_png(p.string(), out.color);
    }
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string a, b;
    std::string metric = "psnr";
};

int run_eval(const EvalArgs& e) {
    Image a = read_pfm(e.a);
    Image b = read_pfm(e.b);
    double v = 0.0;
    if (e.metric == "psnr")
        v = psnr(a, b);
    else if (e.metric == "ssim")
        v = ssim_display(a, b);
    else if (e.metric == "mse")
        v = mse_display(a, b);
    else if (e.metric == "mae-normal")
        v = mean_normal_angle_deg(a, b);
    else
        throw std::runtime_error(strformat("unknown metric '%s'", e.metric.c_str()));
    std::printf("%s = %.8g\n", e.metric.c_str(), v);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable Gaussian surfel renderer and inverse rendering toolkit"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cg = app.add_subcommand("gen-scene", "Generate a benchmark scene with references");
    cg->add_option("--preset", gen.preset, "furnace, two-patch, or box");
    cg->add_option("--out", gen.out, "output directory")->required();
    cg->add_option("--per-side", gen.per_side, "surfel grid resolution per patch side");
    cg->add_option("--ref-spp", gen.ref_spp, "reference render samples per pixel");
    cg->add_option("--ref-depth", gen.ref_depth, "reference path depth");
    cg->add_option("--bake-dirs", gen.bake_dirs, "directions per surfel for the SH fit");
    cg->add_option("--bake-spp", gen.bake_spp, "paths per direction for the SH fit");
    cg->add_flag("--no-bake", gen.no_bake, "leave stored radiance at zero");
    cg->add_option("--seed", gen.seed, "random seed");
    cg->add_option("--threads", gen.threads, "worker threads (0 = all)");

    TrainArgs train;
    auto* ct = app.add_subcommand("train", "Optimize a scene against its reference views");
    ct->add_option("--scene", train.scene, "scene JSON")->required();
    ct->add_option("--out", train.out, "output directory")->required();
    ct->add_option("--config", train.config, "key = value config file");
    ct->add_option("--stages", train.stages, "comma list: init,inverse,relight");
    ct->add_option("--resume", train.resume, "checkpoint to resume from");
    ct->add_option("--set", train.sets, "config override key=value")->take_all();

    RelightArgs rel;
    auto* cr = app.add_subcommand("relight", "Refit stored radiance to a new environment");
    cr->add_option("--scene", rel.scene, "scene JSON")->required();
    cr->add_option("--env", rel.env, "new environment cubemap PFM")->required();
    cr->add_option("--out", rel.out, "output directory")->required();
    cr->add_option("--config", rel.config, "key = value config file");
    cr->add_option("--set", rel.sets, "config override key=value")->take_all();

    RenderArgs ren;
    auto* cn = app.add_subcommand("render", "Render a scene camera");
    cn->add_option("--scene", ren.scene, "scene JSON")->required();
    cn->add_option("--out", ren.out, "output PFM path")->required();
    cn->add_option("--mode", ren.mode,
                   "surfel, pbr-mc, pbr-splitsum, irradiance, normal, albedo, rough, depth");
    cn->add_option("--camera", ren.camera, "camera index");
    cn->add_option("--rays", ren.rays, "hemisphere rays per hit (pbr-mc)");
    cn->add_option("--seed", ren.seed, "random seed (pbr-mc)");
    cn->add_option("--threads", ren.threads, "worker threads (0 = all)");
    cn->add_flag("--indirect-only", ren.indirect_only, "drop direct environment light");
    cn->add_flag("--png", ren.png, "also write a tonemapped PNG");

    EvalArgs ev;
    auto* ce = app.add_subcommand("eval", "Compare two PFM images");
    ce->add_option("--a", ev.a, "first image")->required();
    ce->add_option("--b", ev.b, "second image")->required();
    ce->add_option("--metric", ev.metric, "psnr, ssim, mse, or mae-normal");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cg->parsed()) return run_gen(gen);
        if (ct->parsed()) return run_train(train);
        if (cr->parsed()) return run_relight(rel);
        if (cn->parsed()) return run_render(ren);
        if (ce->parsed()) return run_eval(ev);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
