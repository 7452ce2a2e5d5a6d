#pragma once

// Flat key=value run configuration. Unknown keys are rejected so typos fail
// loudly, every consumer reads through typed getters, and the fully resolved
// set is written next to run outputs for reproducibility.

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "radsurf/core.hpp"
#include "radsurf/optim.hpp"

namespace radsurf {

class RunConfig {
  public:
    RunConfig() {
        for (const auto& [k, v] : registry()) values_[k] = v;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error(strformat("cannot open config %s", path.c_str()));
        RunConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::string t = trim(line);
            if (t.empty()) continue;
            size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(
                    strformat("%s:%d: expected key = value", path.c_str(), lineno));
            cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) {
        if (values_.find(key) == values_.end())
            throw std::runtime_error(strformat("unknown config key '%s'", key.c_str()));
        values_[key] = value;
    }

    // Accepts "key=value" as passed on a command line.
    void apply_override(const std::string& kv) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(strformat("override '%s' is not key=value", kv.c_str()));
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }

    const std::string& gets(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end())
            throw std::runtime_error(strformat("unknown config key '%s'", key.c_str()));
        return it->second;
    }

    long long geti(const std::string& key) const {
        return parse_int(key, gets(key));
    }

    uint64_t getu64(const std::string& key) const {
        const std::string& s = gets(key);
        try {
            // stoull accepts and wraps negative input; a sign is a user error.
            if (s.find_first_of("+-") != std::string::npos) throw std::invalid_argument(s);
            size_t pos = 0;
            uint64_t v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(
                strformat("config %s: '%s' is not an unsigned integer", key.c_str(), s.c_str()));
        }
    }

    double getd(const std::string& key) const {
        const std::string& s = gets(key);
        try {
            size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(
                strformat("config %s: '%s' is not a number", key.c_str(), s.c_str()));
        }
    }

    bool getb(const std::string& key) const {
        const std::string& s = gets(key);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw std::runtime_error(
            strformat("config %s: '%s' is not a boolean", key.c_str(), s.c_str()));
    }

    // Every key with its current value, in registry order.
    std::string resolved() const {
        std::string out;
        for (const auto& [k, v] : registry()) out += k + " = " + values_.at(k) + "\n";
        return out;
    }

    void write_resolved(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error(strformat("cannot open %s for writing", path.c_str()));
        out << resolved();
    }

  private:
    static long long parse_int(const std::string& key, const std::string& s) {
        try {
            size_t pos = 0;
            long long v = std::stoll(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(
                strformat("config %s: '%s' is not an integer", key.c_str(), s.c_str()));
        }
    }

    static std::string trim(const std::string& s) {
        size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static const std::vector<std::pair<std::string, std::string>>& registry() {
        static const std::vector<std::pair<std::string, std::string>> keys = {
            {"threads", "0"},
            {"seed", "1"},
            {"iters_init", "400"},
            {"iters_inverse", "300"},
            {"iters_relight", "400"},
            {"rad_n_g", "256"},
            {"rad_n_s", "64"},
            {"rad_camera_dirs", "true"},
            {"detach_lg", "false"},
            {"detach_lpbr", "false"},
            {"lambda_rad", "0.2"},
            {"lambda_rad_relight", "1.0"},
            {"lambda_dist", "1000"},
            {"lambda_normal", "0.05"},
            {"lambda_normal_smooth", "0.02"},
            {"lambda_mask", "0.05"},
            {"lambda_albedo_smooth", "0.2"},
            {"lambda_rough_smooth", "0.1"},
            {"lambda_light", "0.01"},
            {"lr_sh", "0.0025"},
            {"lr_albedo", "0.005"},
            {"lr_rough", "0.005"},
            {"lr_opacity", "0.05"},
            {"lr_env", "0.01"},
            {"pbr_rays", "16"},
            {"render_rays", "64"},
            {"checkpoint_every", "0"},
            {"log_stdout", "true"},
        };
        return keys;
    }

    std::map<std::string, std::string> values_;
};

// Materializes one stage's settings from the flat configuration.
inline StageConfig stage_from_config(const RunConfig& rc, Stage s) {
    StageConfig c = default_stage_config(s);
    switch (s) {
        case Stage::Init: c.iterations = static_cast<int>(rc.geti("iters_init")); break;
        case Stage::Inverse: c.iterations = static_cast<int>(rc.geti("iters_inverse")); break;
        case Stage::Relight: c.iterations = static_cast<int>(rc.geti("iters_relight")); break;
    }
    c.seed = rc.getu64("seed");
    c.threads = static_cast<int>(rc.geti("threads"));
    c.weights.rad = s == Stage::Relight ? rc.getd("lambda_rad_relight") : rc.getd("lambda_rad");
    c.weights.distortion = rc.getd("lambda_dist");
    c.weights.normal_depth = rc.getd("lambda_normal");
    c.weights.normal_smooth = rc.getd("lambda_normal_smooth");
    c.weights.mask = rc.getd("lambda_mask");
    c.weights.albedo_smooth = rc.getd("lambda_albedo_smooth");
    c.weights.rough_smooth = rc.getd("lambda_rough_smooth");
    c.weights.light_prior = rc.getd("lambda_light");
    c.rad.n_g = static_cast<int>(rc.geti("rad_n_g"));
    c.rad.n_s = static_cast<int>(rc.geti("rad_n_s"));
    c.rad.camera_dirs = rc.getb("rad_camera_dirs");
    c.rad.detach_lg = rc.getb("detach_lg");
    c.rad.detach_lpbr = rc.getb("detach_lpbr");
    c.lr.sh = rc.getd("lr_sh");
    c.lr.albedo = rc.getd("lr_albedo");
    c.lr.roughness = rc.getd("lr_rough");
    c.lr.opacity = rc.getd("lr_opacity");
    c.lr.env = rc.getd("lr_env");
    c.pbr_rays = static_cast<int>(rc.geti("pbr_rays"));
    c.checkpoint_every = static_cast<int>(rc.geti("checkpoint_every"));
    c.log_stdout = rc.getb("log_stdout");
    return c;
}

}  // namespace radsurf
