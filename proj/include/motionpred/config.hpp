#pragma once

// JSON run configuration. Keys mirror the field names of the parameter
// structs; unknown keys are rejected so typos surface as config errors.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionpred/correspondence.hpp"
#include "motionpred/error.hpp"
#include "motionpred/flow_search.hpp"
#include "motionpred/optical_flow.hpp"
#include "motionpred/predictors.hpp"
#include "motionpred/synthetic.hpp"
#include "motionpred/tracking.hpp"

namespace motionpred {

using nlohmann::json;

namespace cfg {

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void get(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline Vec3 vec3(const json& j, const std::string& where) {
    if (j.is_number()) {
        const double v = j.get<double>();
        return {v, v, v};
    }
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
    try {
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

template <class T>
std::vector<T> list(const json& j, const std::string& where) {
    try {
        auto v = j.get<std::vector<T>>();
        if (v.empty()) throw ConfigError(where + ": empty list");
        return v;
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

}  // namespace cfg

inline FlowParams parse_flow(const json& j, FlowParams p = {}) {
    const std::string w = "flow";
    cfg::check_keys(j, w, {"sigma_init", "sigma_sub", "sigma_lk", "n_layers", "n_iter", "lk_window_h", "tensor_epsilon"});
    cfg::get(j, "sigma_init", p.sigma_init, w);
    cfg::get(j, "sigma_sub", p.sigma_sub, w);
    cfg::get(j, "sigma_lk", p.sigma_lk, w);
    cfg::get(j, "n_layers", p.n_layers, w);
    cfg::get(j, "n_iter", p.n_iter, w);
    cfg::get(j, "lk_window_h", p.lk_window_h, w);
    cfg::get(j, "tensor_epsilon", p.tensor_epsilon, w);
    p.validate();
    return p;
}

inline RnnConfig parse_rnn(const json& j, RnnConfig c = {}) {
    const std::string w = "rnn";
    cfg::check_keys(j, w, {"L", "r", "q", "eta", "theta", "sigma_init_rnn", "seed", "n_runs"});
    cfg::get(j, "L", c.L, w);
    cfg::get(j, "r", c.r, w);
    cfg::get(j, "q", c.q, w);
    cfg::get(j, "eta", c.eta, w);
    cfg::get(j, "theta", c.theta, w);
    cfg::get(j, "sigma_init_rnn", c.sigma_init, w);
    cfg::get(j, "seed", c.seed, w);
    c.validate();
    return c;
}

inline SplitSpec parse_split(const json& j, SplitSpec s = {}) {
    const std::string w = "split";
    cfg::check_keys(j, w, {"n_train", "n_val", "n_test"});
    cfg::get(j, "n_train", s.n_train, w);
    cfg::get(j, "n_val", s.n_val, w);
    cfg::get(j, "n_test", s.n_test, w);
    require(s.n_train >= 1 && s.n_val >= 1 && s.n_test >= 1, "split sizes must each be >= 1");
    return s;
}

inline DriftSpec parse_drift(const json& j, DriftSpec d = {}) {
    const std::string w = "drift";
    cfg::check_keys(j, w, {"amplitude", "period", "sample_dt", "n_frames"});
    cfg::get(j, "amplitude", d.amplitude, w);
    cfg::get(j, "period", d.period, w);
    cfg::get(j, "sample_dt", d.sample_dt, w);
    cfg::get(j, "n_frames", d.n_frames, w);
    d.validate();
    return d;
}

inline NoiseSpec parse_noise(const json& j, NoiseSpec n = {}) {
    const std::string w = "noise";
    cfg::check_keys(j, w, {"enabled", "lambda", "seed", "dynamic_range", "clamp_lo", "clamp_hi"});
    cfg::get(j, "enabled", n.enabled, w);
    cfg::get(j, "lambda", n.lambda, w);
    cfg::get(j, "seed", n.seed, w);
    if (j.contains("dynamic_range") && !j["dynamic_range"].is_null()) {
        double r = 0;
        cfg::get(j, "dynamic_range", r, w);
        n.dynamic_range = r;
    }
    cfg::get(j, "clamp_lo", n.clamp_lo, w);
    cfg::get(j, "clamp_hi", n.clamp_hi, w);
    n.validate();
    return n;
}

inline WarpParams parse_warp(const json& j, WarpParams p = {}) {
    const std::string w = "warp";
    cfg::check_keys(j, w, {"sigma_w", "h", "fill_value"});
    cfg::get(j, "sigma_w", p.sigma_w, w);
    cfg::get(j, "h", p.h, w);
    cfg::get(j, "fill_value", p.fill_value, w);
    p.validate();
    return p;
}

inline FlowGrid parse_flow_grid(const json& j) {
    FlowGrid g;
    cfg::check_keys(j, "flow_grid", {"sigma_init", "sigma_sub", "sigma_lk", "n_layers", "n_iter"});
    if (j.contains("sigma_init")) g.sigma_init = cfg::list<double>(j["sigma_init"], "flow_grid.sigma_init");
    if (j.contains("sigma_sub")) g.sigma_sub = cfg::list<double>(j["sigma_sub"], "flow_grid.sigma_sub");
    if (j.contains("sigma_lk")) g.sigma_lk = cfg::list<double>(j["sigma_lk"], "flow_grid.sigma_lk");
    if (j.contains("n_layers")) g.n_layers = cfg::list<int>(j["n_layers"], "flow_grid.n_layers");
    if (j.contains("n_iter")) g.n_iter = cfg::list<int>(j["n_iter"], "flow_grid.n_iter");
    return g;
}

inline RnnGrid parse_rnn_grid(const json& j) {
    RnnGrid g;
    cfg::check_keys(j, "rnn_grid", {"theta", "eta", "sigma_init_rnn", "L", "q"});
    if (j.contains("theta")) g.theta = cfg::list<double>(j["theta"], "rnn_grid.theta");
    if (j.contains("eta")) g.eta = cfg::list<double>(j["eta"], "rnn_grid.eta");
    if (j.contains("sigma_init_rnn")) g.sigma_init = cfg::list<double>(j["sigma_init_rnn"], "rnn_grid.sigma_init_rnn");
    if (j.contains("L")) g.L = cfg::list<int>(j["L"], "rnn_grid.L");
    if (j.contains("q")) g.q = cfg::list<int>(j["q"], "rnn_grid.q");
    return g;
}

struct PhantomSpec {
    Dims dims{16, 16, 16};
    Spacing spacing{};
    std::vector<Blob> blobs;
    Vec3 motion{0.0, 0.0, 2.0};  ///< per-axis breathing amplitude, voxels
    double background = 100.0;
};

/// Default phantom: three blobs spread through the volume.
inline std::vector<Blob> default_blobs(const Dims& d) {
    auto at = [&](double fx, double fy, double fz) { return Vec3{fx * (d.nx - 1), fy * (d.ny - 1), fz * (d.nz - 1)}; };
    const double s = std::max(1.5, 0.12 * std::min({d.nx, d.ny, d.nz}));
    return {{at(0.35, 0.4, 0.45), {s, s, 1.3 * s}, 800.0},
            {at(0.65, 0.6, 0.5), {1.2 * s, s, s}, 600.0},
            {at(0.5, 0.3, 0.65), {s, 0.8 * s, s}, 500.0}};
}

inline PhantomSpec parse_phantom(const json& j) {
    PhantomSpec p;
    const std::string w = "phantom";
    cfg::check_keys(j, w, {"dims", "spacing", "blobs", "motion", "background"});
    if (j.contains("dims")) {
        const auto v = cfg::list<int>(j["dims"], "phantom.dims");
        if (v.size() != 3) throw ConfigError("phantom.dims: expected [nx, ny, nz]");
        p.dims = {v[0], v[1], v[2]};
    }
    require(p.dims.valid(), "phantom.dims must be positive");
    if (j.contains("spacing")) {
        const Vec3 s = cfg::vec3(j["spacing"], "phantom.spacing");
        p.spacing = {s.x, s.y, s.z};
    }
    require(p.spacing.sx > 0 && p.spacing.sy > 0 && p.spacing.sz > 0, "phantom.spacing must be positive");
    if (j.contains("motion")) p.motion = cfg::vec3(j["motion"], "phantom.motion");
    cfg::get(j, "background", p.background, w);
    if (j.contains("blobs")) {
        if (!j["blobs"].is_array()) throw ConfigError("phantom.blobs: expected a list");
        for (const auto& b : j["blobs"]) {
            cfg::check_keys(b, "phantom.blobs[]", {"center", "sigma", "amplitude"});
            Blob blob;
            if (!b.contains("center")) throw ConfigError("phantom.blobs[]: missing center");
            blob.center = cfg::vec3(b["center"], "phantom.blobs[].center");
            if (b.contains("sigma")) blob.sigma = cfg::vec3(b["sigma"], "phantom.blobs[].sigma");
            cfg::get(b, "amplitude", blob.amplitude, "phantom.blobs[]");
            require(blob.sigma.x > 0 && blob.sigma.y > 0 && blob.sigma.z > 0, "phantom blob sigma must be > 0");
            p.blobs.push_back(blob);
        }
    } else {
        p.blobs = default_blobs(p.dims);
    }
    return p;
}

struct RunConfig {
    std::uint64_t seed = 0;
    int threads = 0;  ///< 0 = MOTIONPRED_THREADS or hardware concurrency
    std::filesystem::path output_dir = "motionpred_out";
    std::vector<std::filesystem::path> base_volumes;  ///< 10 phase volumes; the phantom is used when empty
    PhantomSpec phantom;
    DriftSpec drift;
    NoiseSpec noise;
    FlowParams flow;
    std::vector<Vec3> markers;
    SplitSpec split;
    RnnConfig rnn;
    int n_runs = 10;
    int lms_L = 10;
    double lms_eta = 0.01;
    int linear_L = 10;
    WarpParams warp;
    Dtype volume_dtype = Dtype::f32;
    bool save_dvfs = true;

    int thread_count() const { return threads >= 1 ? threads : default_threads(); }
};

/// Parses a run config. Relative input paths resolve against `base_dir`;
/// every referenced input must exist.
inline RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir = {}) {
    RunConfig c;
    cfg::check_keys(j, "config", {"seed", "threads", "output_dir", "base_volumes", "phantom", "drift", "noise",
                                  "flow", "markers", "split", "rnn", "lms", "linear", "warp", "volume_dtype",
                                  "save_dvfs"});
    cfg::get(j, "seed", c.seed, "config");
    cfg::get(j, "threads", c.threads, "config");
    require(c.threads >= 0, "config.threads must be >= 0");
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("base_volumes")) {
        for (const auto& p : cfg::list<std::string>(j["base_volumes"], "config.base_volumes")) {
            std::filesystem::path path = p;
            if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
            if (!std::filesystem::exists(path)) throw ConfigError("input volume not found: " + path.string());
            c.base_volumes.push_back(path);
        }
        require(c.base_volumes.size() == 10, "config.base_volumes must list 10 phase volumes");
    }
    c.phantom = parse_phantom(j.contains("phantom") ? j["phantom"] : json::object());
    if (j.contains("drift")) c.drift = parse_drift(j["drift"]);
    if (j.contains("noise")) c.noise = parse_noise(j["noise"]);
    c.noise.seed = j.contains("noise") && j["noise"].contains("seed") ? c.noise.seed : derive_seed(c.seed, "noise");
    if (j.contains("flow")) c.flow = parse_flow(j["flow"]);
    if (j.contains("markers")) {
        if (!j["markers"].is_array() || j["markers"].empty()) throw ConfigError("config.markers: expected a non-empty list");
        for (const auto& m : j["markers"]) c.markers.push_back(cfg::vec3(m, "config.markers[]"));
    } else {
        const Dims& d = c.phantom.dims;
        for (const auto& b : c.phantom.blobs) c.markers.push_back(b.center);
        if (c.markers.empty()) c.markers.push_back({0.5 * (d.nx - 1), 0.5 * (d.ny - 1), 0.5 * (d.nz - 1)});
    }
    if (j.contains("split")) c.split = parse_split(j["split"]);
    if (j.contains("rnn")) {
        c.rnn = parse_rnn(j["rnn"]);
        cfg::get(j["rnn"], "n_runs", c.n_runs, "rnn");
    }
    require(c.n_runs >= 1, "rnn.n_runs must be >= 1");
    if (!(j.contains("rnn") && j["rnn"].contains("seed"))) c.rnn.seed = derive_seed(c.seed, "rnn");
    c.rnn.r = static_cast<int>(c.markers.size());
    if (j.contains("lms")) {
        cfg::check_keys(j["lms"], "lms", {"L", "eta"});
        cfg::get(j["lms"], "L", c.lms_L, "lms");
        cfg::get(j["lms"], "eta", c.lms_eta, "lms");
    }
    require(c.lms_L >= 1 && c.lms_eta >= 0.0, "lms: L must be >= 1 and eta >= 0");
    if (j.contains("linear")) {
        cfg::check_keys(j["linear"], "linear", {"L"});
        cfg::get(j["linear"], "L", c.linear_L, "linear");
    }
    require(c.linear_L >= 1, "linear.L must be >= 1");
    if (j.contains("warp")) c.warp = parse_warp(j["warp"]);
    if (j.contains("volume_dtype")) {
        const auto s = j["volume_dtype"].get<std::string>();
        if (s == "f32") c.volume_dtype = Dtype::f32;
        else if (s == "f64") c.volume_dtype = Dtype::f64;
        else if (s == "u16") c.volume_dtype = Dtype::u16;
        else throw ConfigError("config.volume_dtype: expected u16, f32 or f64");
    }
    cfg::get(j, "save_dvfs", c.save_dvfs, "config");
    c.split.validate(c.drift.n_frames);
    return c;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_json_file(path), path.parent_path());
}

}  // namespace motionpred
