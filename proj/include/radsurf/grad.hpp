#pragma once

// Gradient bookkeeping. Backward passes emit sparse (class, index, value)
// entries; a GradientTape holds dense per-class accumulators aligned with the
// scene's flattened parameter layout. Accumulation order is fixed by the
// caller (chunk order), so totals are bit-reproducible for any thread count.

#include <array>
#include <cstdint>
#include <vector>

#include "radsurf/scene.hpp"

namespace radsurf {

enum class ParamClass : uint8_t { Sh = 0, Albedo, Roughness, Opacity, Env, kCount };

inline constexpr size_t kParamClassCount = static_cast<size_t>(ParamClass::kCount);

inline const char* param_class_name(ParamClass c) {
    switch (c) {
        case ParamClass::Sh: return "sh";
        case ParamClass::Albedo: return "albedo";
        case ParamClass::Roughness: return "roughness";
        case ParamClass::Opacity: return "opacity";
        case ParamClass::Env: return "env";
        default: return "?";
    }
}

// Flattened parameter indexing, one scalar per index.
//   sh:        surfel * 48 + (channel * 16 + basis)
//   albedo:    surfel * 3 + channel
//   roughness: surfel
//   opacity:   surfel
//   env:       (face * res + y) * res * 3 + x * 3 + channel
inline size_t sh_param_index(size_t surfel, int k) { return surfel * kShCoeffsPerSurfel + k; }
inline size_t albedo_param_index(size_t surfel, int ch) { return surfel * 3 + ch; }
inline size_t env_param_index(const Cubemap& cm, int face, int x, int y, int ch) {
    return cm.flat_index(face, x, y) * 3 + static_cast<size_t>(ch);
}

struct GradEntry {
    ParamClass cls;
    uint32_t index;
    double value;
};

using SparseGrad = std::vector<GradEntry>;

inline size_t param_class_size(const Scene& scene, ParamClass c) {
    size_t n = scene.surfels.size();
    switch (c) {
        case ParamClass::Sh: return n * kShCoeffsPerSurfel;
        case ParamClass::Albedo: return n * 3;
        case ParamClass::Roughness: return n;
        case ParamClass::Opacity: return n;
        case ParamClass::Env: return scene.env.texel_count() * 3;
        default: return 0;
    }
}

class GradientTape {
  public:
    GradientTape() = default;

    explicit GradientTape(const Scene& scene) { resize(scene); }

    // (Re)allocates zeroed buffers matching the scene's parameter layout.
    void resize(const Scene& scene) {
        for (size_t c = 0; c < kParamClassCount; ++c)
            buf_[c].assign(param_class_size(scene, static_cast<ParamClass>(c)), 0.0);
    }

    void clear() {
        for (auto& b : buf_) std::fill(b.begin(), b.end(), 0.0);
    }

    void accumulate(ParamClass c, size_t index, double v) {
        buf_[static_cast<size_t>(c)][index] += v;
    }

    void accumulate(const SparseGrad& entries) {
        for (const GradEntry& e : entries) accumulate(e.cls, e.index, e.value);
    }

    double get(ParamClass c, size_t index) const { return buf_[static_cast<size_t>(c)][index]; }

    std::vector<double>& grads(ParamClass c) { return buf_[static_cast<size_t>(c)]; }
    const std::vector<double>& grads(ParamClass c) const {
        return buf_[static_cast<size_t>(c)];
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& b : buf_)
            for (double v : b) m = std::max(m, std::fabs(v));
        return m;
    }

  private:
    std::array<std::vector<double>, kParamClassCount> buf_;
};

// Flat scalar access to one trainable class of a scene. The optimizer reads
// gradients from the tape and writes parameters through these views; nothing
// else mutates a loaded scene.
class ParamView {
  public:
    ParamView(Scene& scene, ParamClass cls) : scene_(&scene), cls_(cls) {
        size_ = param_class_size(scene, cls);
    }

    ParamClass cls() const { return cls_; }
    size_t size() const { return size_; }

    double get(size_t i) const {
        const Scene& s = *scene_;
        switch (cls_) {
            case ParamClass::Sh:
                return s.surfels[i / kShCoeffsPerSurfel].sh[i % kShCoeffsPerSurfel];
            case ParamClass::Albedo: return s.surfels[i / 3].albedo[static_cast<int>(i % 3)];
            case ParamClass::Roughness: return s.surfels[i].roughness;
            case ParamClass::Opacity: return s.surfels[i].opacity;
            case ParamClass::Env: return s.env.texels()[i / 3][static_cast<int>(i % 3)];
            default: return 0.0;
        }
    }

    void set(size_t i, double v) {
        Scene& s = *scene_;
        switch (cls_) {
            case ParamClass::Sh:
                s.surfels[i / kShCoeffsPerSurfel].sh[i % kShCoeffsPerSurfel] = v;
                break;
            case ParamClass::Albedo: s.surfels[i / 3].albedo[static_cast<int>(i % 3)] = v; break;
            case ParamClass::Roughness: s.surfels[i].roughness = v; break;
            case ParamClass::Opacity: s.surfels[i].opacity = v; break;
            case ParamClass::Env: s.env.texels()[i / 3][static_cast<int>(i % 3)] = v; break;
            default: break;
        }
    }

    // Feasible-set projection applied after every optimizer step.
    double project(double v) const {
        switch (cls_) {
            case ParamClass::Sh: return v;
            case ParamClass::Albedo: return std::clamp(v, 0.0, 1.0);
            case ParamClass::Roughness: return std::clamp(v, 0.0, 1.0);
            case ParamClass::Opacity: return std::clamp(v, 1e-4, 1.0 - 1e-4);
            case ParamClass::Env: return std::max(v, 0.0);
            default: return v;
        }
    }

  private:
    Scene* scene_;
    ParamClass cls_;
    size_t size_;
};

}  // namespace radsurf
