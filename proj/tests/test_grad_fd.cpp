#include <catch2/catch_amalgamated.hpp>

#include <radsurf/config.hpp>
#include <radsurf/optim.hpp>
#include <radsurf/oracle.hpp>
#include <radsurf/rng.hpp>

using namespace radsurf;

namespace {

// Weights for a composite objective that exercises every gradient path the
// training stages use: both reconstruction flavors, all smoothness and prior
// terms, and both radiometric-consistency variants.
struct CompositeWeights {
    double normal_smooth = 0.02;
    double mask = 0.05;
    double albedo_smooth = 0.2;
    double rough_smooth = 0.1;
    double light_prior = 0.01;
    double rad_splitsum = 0.2;
    double rad_mc = 0.2;
};

struct Fixture {
    Scene scene;
    Image ref;
    Camera cam;
    CompositeWeights w;
    RadLossConfig rad;
    uint64_t seed = 21;
    uint64_t iter = 4;

    Fixture() {
        Rng rng(1);
        for (int i = 0; i < 5; ++i) {
            Surfel s;
            s.center = {0.5 * (i % 3) - 0.5, 0.35 * (i / 3) - 0.15, 1.0 + 0.25 * i};
            build_onb(normalize(Vec3{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), -1.0}),
                      s.tangent_u, s.tangent_v);
            s.scale_u = 0.45;
            s.scale_v = 0.55;
            s.opacity = rng.uniform(0.35, 0.75);
            s.albedo = {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
            s.roughness = rng.uniform(0.25, 0.85);
            for (double& c : s.sh) c = rng.uniform(-0.05, 0.05);
            s.sh[0] += 0.4;
            s.sh[kShBasisCount] += 0.4;
            s.sh[2 * kShBasisCount] += 0.4;
            scene.surfels.push_back(s);
        }
        scene.env = Cubemap(2);
        for (auto& t : scene.env.texels())
            t = {rng.uniform(0.1, 1.2), rng.uniform(0.1, 1.2), rng.uniform(0.1, 1.2)};
        cam = Camera::look_at({0.1, -0.2, -1.2}, {0, 0, 1}, {0, 1, 0}, 55.0, 16, 12);
        scene.cameras.push_back(cam);
        ref = Image(16, 12);
        for (auto& p : ref.pixels)
            p = {rng.uniform(0.0, 0.7), rng.uniform(0.0, 0.7), rng.uniform(0.0, 0.7)};
    }

    double eval(Tracer& tracer, SplitSum& ss) const {
        tracer.refresh_params();
        ss.refresh(scene.env, 1);
        double total = 0.0;
        RenderOutput lg = tracer.render_image(cam, TraceMode::Radiance, 1);
        total += recon_loss(lg.color, ref).value;
        RenderOutput pbr = render_splitsum(tracer, ss, cam, 1);
        total += recon_loss(pbr.color, ref).value;
        RenderOutput nrm = tracer.render_image(cam, TraceMode::Normal, 1);
        total += w.normal_smooth * edge_aware_smoothness(nrm.color, ref);
        total += w.mask * sparsity_loss(scene);
        RenderOutput alb = tracer.render_image(cam, TraceMode::Albedo, 1);
        total += w.albedo_smooth * edge_aware_smoothness(alb.color, ref);
        RenderOutput rgh = tracer.render_image(cam, TraceMode::Roughness, 1);
        total += w.rough_smooth * edge_aware_smoothness(rgh.color, ref);
        RenderOutput irr = render_irradiance(tracer, ss, cam, 1);
        total += w.light_prior * light_prior_loss(irr.color);
        total += w.rad_splitsum * radiometric_loss_splitsum(tracer, ss, scene.cameras, rad,
                                                            seed, iter, 1, nullptr, nullptr);
        total += w.rad_mc *
                 radiometric_loss(tracer, scene.env, scene.cameras, rad, seed, iter, 1, nullptr);
        return total;
    }

    void backward(Tracer& tracer, SplitSum& ss, GradientTape& tape) const {
        tracer.refresh_params();
        ss.refresh(scene.env, 1);
        SplitSum::TableAdjoint tables(ss);

        RenderOutput lg = tracer.render_image(cam, TraceMode::Radiance, 1);
        Image d_lg(cam.width, cam.height);
        recon_loss(lg.color, ref, 1.0, &d_lg);
        tracer.render_backward(cam, TraceMode::Radiance, d_lg, nullptr, 1, tape);

        RenderOutput pbr = render_splitsum(tracer, ss, cam, 1);
        Image d_pbr(cam.width, cam.height);
        recon_loss(pbr.color, ref, 1.0, &d_pbr);
        render_splitsum_backward(tracer, ss, cam, d_pbr, nullptr, 1, tape, tables);

        RenderOutput nrm = tracer.render_image(cam, TraceMode::Normal, 1);
        Image d_nrm(cam.width, cam.height);
        edge_aware_smoothness(nrm.color, ref, w.normal_smooth, &d_nrm);
        tracer.render_backward(cam, TraceMode::Normal, d_nrm, nullptr, 1, tape);

        sparsity_loss(scene, w.mask, &tape);

        RenderOutput alb = tracer.render_image(cam, TraceMode::Albedo, 1);
        Image d_alb(cam.width, cam.height);
        edge_aware_smoothness(alb.color, ref, w.albedo_smooth, &d_alb);
        tracer.render_backward(cam, TraceMode::Albedo, d_alb, nullptr, 1, tape);

        RenderOutput rgh = tracer.render_image(cam, TraceMode::Roughness, 1);
        Image d_rgh(cam.width, cam.height);
        edge_aware_smoothness(rgh.color, ref, w.rough_smooth, &d_rgh);
        tracer.render_backward(cam, TraceMode::Roughness, d_rgh, nullptr, 1, tape);

        RenderOutput irr = render_irradiance(tracer, ss, cam, 1);
        Image d_irr(cam.width, cam.height);
        light_prior_loss(irr.color, w.light_prior, &d_irr);
        render_irradiance_backward(tracer, ss, cam, d_irr, nullptr, 1, tape, tables);

        radiometric_loss_splitsum(tracer, ss, scene.cameras, rad, seed, iter, 1, &tape,
                                  &tables, w.rad_splitsum);
        ss.env_backward(tables, tape);

        radiometric_loss(tracer, scene.env, scene.cameras, rad, seed, iter, 1, &tape,
                         w.rad_mc);
    }
};

}  // namespace

TEST_CASE("composite objective gradients match central differences") {
    Fixture fx;
    fx.rad.n_g = 8;
    fx.rad.n_s = 6;
    Tracer tracer(fx.scene);
    SplitSum ss(fx.scene.env.res(), 1);

    GradientTape tape;
    tape.resize(fx.scene);
    fx.backward(tracer, ss, tape);

    struct Probe {
        ParamClass cls;
        double step;
    };
    const Probe probes[] = {
        {ParamClass::Sh, 1e-5},     {ParamClass::Albedo, 1e-5}, {ParamClass::Roughness, 1e-5},
        {ParamClass::Opacity, 1e-5}, {ParamClass::Env, 1e-4},
    };
    Rng rng(33);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const Probe& pr = probes[trial % 5];
        ParamView view(fx.scene, pr.cls);
        size_t idx = rng.uniform_index(view.size());
        double grad = tape.grads(pr.cls)[idx];
        double fd = oracle::finite_diff([&] { return fx.eval(tracer, ss); },
                                        [&] { return view.get(idx); },
                                        [&](double v) { view.set(idx, v); }, pr.step);
        if (std::abs(grad) <= 1e-6 && std::abs(fd) <= 1e-6) continue;
        INFO("class " << static_cast<int>(pr.cls) << " index " << idx << " grad " << grad
                      << " fd " << fd);
        CHECK(std::abs(grad - fd) / std::max({std::abs(grad), std::abs(fd), 1e-6}) < 1e-3);
        ++checked;
    }
    CHECK(checked >= 25);  // the sweep must actually exercise live gradients
}

TEST_CASE("gradient tape accumulates sparse entries by class and index") {
    Fixture fx;
    GradientTape tape;
    tape.resize(fx.scene);
    SparseGrad g;
    g.push_back({ParamClass::Albedo, 4, 0.5});
    g.push_back({ParamClass::Albedo, 4, 0.25});
    g.push_back({ParamClass::Opacity, 2, -1.0});
    tape.accumulate(g);
    CHECK(tape.grads(ParamClass::Albedo)[4] == 0.75);
    CHECK(tape.grads(ParamClass::Opacity)[2] == -1.0);
    tape.clear();
    CHECK(tape.grads(ParamClass::Albedo)[4] == 0.0);
}
