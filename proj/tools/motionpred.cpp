// motionpred command-line front end. Every pipeline stage is a subcommand;
// `pipeline` runs them all from one JSON config.
//
// Exit status: 0 success, 1 config error, 2 numerical failure, 3 I/O error.
// MOTIONPRED_OUTPUT_DIR overrides the output directory and
// MOTIONPRED_THREADS the worker count.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "motionpred/config.hpp"
#include "motionpred/correspondence.hpp"
#include "motionpred/csv_io.hpp"
#include "motionpred/evaluation.hpp"
#include "motionpred/flow_search.hpp"
#include "motionpred/optical_flow.hpp"
#include "motionpred/pipeline.hpp"
#include "motionpred/predictors.hpp"
#include "motionpred/synthetic.hpp"
#include "motionpred/tracking.hpp"
#include "motionpred/volume_io.hpp"

namespace fs = std::filesystem;
using namespace motionpred;

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

int env_threads(int fallback) {
    if (auto v = env("MOTIONPRED_THREADS")) {
        try {
            const int n = std::stoi(*v);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
        throw ConfigError("MOTIONPRED_THREADS must be a positive integer, got '" + *v + "'");
    }
    return fallback >= 1 ? fallback : default_threads();
}

/// Relative output paths land under MOTIONPRED_OUTPUT_DIR when it is set.
fs::path out_path(const fs::path& p) {
    if (p.is_absolute()) return p;
    if (auto dir = env("MOTIONPRED_OUTPUT_DIR")) return fs::path(*dir) / p;
    return p;
}

nlohmann::json section(const std::string& config_path, const char* key) {
    if (config_path.empty()) return nlohmann::json::object();
    const auto j = read_json_file(config_path);
    if (!j.contains(key)) return nlohmann::json::object();
    return j[key];
}

RunConfig run_config(const std::string& path) {
    if (path.empty()) return parse_run_config(nlohmann::json::object());
    return load_run_config(path);
}

/// Volume headers named on the command line, or every *.json in a directory (sorted).
std::vector<fs::path> expand_inputs(const std::vector<std::string>& items) {
    std::vector<fs::path> out;
    for (const auto& s : items) {
        const fs::path p = s;
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p))
                if (e.path().extension() == ".json") found.push_back(e.path());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            if (!fs::exists(p)) throw ConfigError("input not found: " + p.string());
            out.push_back(p);
        }
    }
    if (out.empty()) throw ConfigError("no input volumes given");
    return out;
}

std::vector<Volume3> load_volumes(const std::vector<std::string>& items) {
    std::vector<Volume3> v;
    for (const auto& p : expand_inputs(items)) v.push_back(load_volume(p));
    return v;
}

void say(const std::string& s) { std::cout << s << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volumetric motion registration, tracking, prediction and image synthesis"};
    app.require_subcommand(1);

    std::string config;
    auto add_config = [&](CLI::App* sc, bool required = false) {
        auto* o = sc->add_option("-c,--config", config, "JSON run config");
        if (required) o->required();
        o->check(CLI::ExistingFile);
    };

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic breathing sequence");
    add_config(synth);
    std::string out_dir;
    synth->add_option("-o,--output-dir", out_dir, "Directory for frame_NNNN.json volumes");

    // register
    auto* reg = app.add_subcommand("register", "Register a moving volume to a fixed one");
    std::string fixed, moving, out;
    reg->add_option("--fixed", fixed, "Reference volume")->required()->check(CLI::ExistingFile);
    reg->add_option("--moving", moving, "Moving volume")->required()->check(CLI::ExistingFile);
    reg->add_option("-o,--out", out, "Output displacement field header")->required();
    add_config(reg);

    // gridsearch-flow
    auto* gsf = app.add_subcommand("gridsearch-flow", "Exhaustive registration parameter search");
    std::vector<std::string> frames;
    std::string grid;
    gsf->add_option("--frames", frames, "Sequence volumes or a directory of them")->required();
    gsf->add_option("--grid", grid, "JSON grid (lists per parameter)")->check(CLI::ExistingFile);
    gsf->add_option("-o,--out", out, "CSV table")->required();
    add_config(gsf);

    // track
    auto* track = app.add_subcommand("track", "Sample displacement fields at the marker points");
    std::vector<std::string> dvf_inputs;
    track->add_option("--dvfs", dvf_inputs, "Displacement fields or a directory of them")->required();
    track->add_option("-o,--out", out, "Trajectory CSV")->required();
    add_config(track, true);

    // predict
    auto* pred = app.add_subcommand("predict", "Predict marker positions one sample ahead");
    std::string traj, method = "rnn";
    pred->add_option("--trajectories", traj, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    pred->add_option("--method", method, "rnn, lms, linear or none")
        ->check(CLI::IsMember({"rnn", "lms", "linear", "none"}));
    pred->add_option("-o,--out", out, "Predictions CSV")->required();
    add_config(pred);

    // gridsearch-rnn
    auto* gsr = app.add_subcommand("gridsearch-rnn", "Exhaustive RNN hyperparameter search on the validation split");
    int n_runs = -1;
    gsr->add_option("--trajectories", traj, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    gsr->add_option("--grid", grid, "JSON grid (lists per parameter)")->check(CLI::ExistingFile);
    gsr->add_option("--runs", n_runs, "Seeded runs per tuple (default: config rnn.n_runs)");
    gsr->add_option("-o,--out", out, "CSV table")->required();
    add_config(gsr);

    // warp
    auto* warp = app.add_subcommand("warp", "Forward-warp a volume by a displacement field");
    std::string src, dvf;
    warp->add_option("--src", src, "Source volume")->required()->check(CLI::ExistingFile);
    warp->add_option("--dvf", dvf, "Displacement field")->required()->check(CLI::ExistingFile);
    warp->add_option("-o,--out", out, "Output volume header")->required();
    add_config(warp);

    // predict-image
    auto* pim = app.add_subcommand("predict-image", "Synthesize predicted volumes from predicted marker positions");
    std::string model, predictions;
    pim->add_option("--src", src, "Reference volume")->required()->check(CLI::ExistingFile);
    pim->add_option("--model", model, "Correspondence model header")->required()->check(CLI::ExistingFile);
    pim->add_option("--predictions", predictions, "Predictions CSV")->required()->check(CLI::ExistingFile);
    pim->add_option("-o,--output-dir", out_dir, "Directory for predicted_NNNN.json volumes")->required();
    add_config(pim);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Compare predictors on the test split");
    std::vector<std::string> predicted_vols, truth_vols;
    ev->add_option("--trajectories", traj, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--predicted", predicted_vols, "Predicted volumes for image evaluation");
    ev->add_option("--truth", truth_vols, "True volumes matching --predicted");
    ev->add_option("-o,--output-dir", out_dir, "Directory for metrics.json and metrics.csv")->required();
    add_config(ev);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Run every stage from one config");
    add_config(pipe, true);
    pipe->add_option("-o,--output-dir", out_dir, "Output directory (overrides config and environment)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) {
            RunConfig c = run_config(config);
            const fs::path dir = out_path(out_dir.empty() ? "frames" : out_dir);
            std::vector<Volume3> base;
            if (c.base_volumes.empty()) {
                base = make_breathing_phases(c.phantom.dims, c.phantom.blobs, c.phantom.motion, c.phantom.background);
                for (auto& b : base) b.set_spacing(c.phantom.spacing);
            } else {
                for (const auto& p : c.base_volumes) base.push_back(load_volume(p));
            }
            const auto seq = extend_sequence(base, c.drift, c.noise);
            for (std::size_t k = 0; k < seq.size(); ++k)
                save_volume(seq[k], dir / frame_name("frame", static_cast<int>(k + 1)), c.volume_dtype);
            say("wrote " + std::to_string(seq.size()) + " frames to " + dir.string());
        } else if (reg->parsed()) {
            const FlowParams p = parse_flow(section(config, "flow"));
            const auto u = lk_register(load_volume(fixed), load_volume(moving), p);
            if (!u.all_finite()) throw NumericalFailure(0, "non-finite displacement field");
            save_vector_field(u, out_path(out));
        } else if (gsf->parsed()) {
            const FlowParams base = parse_flow(section(config, "flow"));
            const FlowGrid g = grid.empty() ? FlowGrid{} : parse_flow_grid(read_json_file(grid));
            const auto seq = load_volumes(frames);
            const int threads = env_threads(config.empty() ? 0 : run_config(config).threads);
            const GridTable t = flow_grid_search(seq, g, {}, base, threads);
            write_grid_table(t, out_path(out), "e_dvf", false);
            if (auto best = t.argmin()) {
                std::string line = "best e_dvf " + std::to_string(*t.rows[*best].value) + " at";
                for (std::size_t i = 0; i < t.names.size(); ++i)
                    line += " " + t.names[i] + "=" + std::to_string(t.rows[*best].params[i]);
                say(line);
            }
        } else if (track->parsed()) {
            const RunConfig c = run_config(config);
            std::vector<VectorField3> fields;
            Spacing spacing;
            for (const auto& p : expand_inputs(dvf_inputs)) {
                fields.push_back(load_vector_field(p));
                spacing = load_components(p).header.spacing;
            }
            const auto ts = extract_trajectories(fields, c.markers, spacing);
            write_trajectories(ts, out_path(out));
        } else if (pred->parsed()) {
            const RunConfig c = run_config(config);
            const TrajectorySet ts = read_trajectories(traj);
            PredictionResult res;
            if (method == "rnn") {
                RnnConfig rc = c.rnn;
                rc.r = ts.r;
                rc.seed = run_seed(c.rnn.seed, 0);
                res = run_online(ts, rc, c.split);
            } else if (method == "lms") {
                res = lms_run(ts, c.lms_L, c.lms_eta, c.split);
            } else if (method == "linear") {
                res = linear_predict(ts, c.linear_L, c.split);
                if (res.rank_deficient) std::cerr << "warning: linear predictor design is rank deficient\n";
            } else {
                res = no_prediction(ts);
            }
            write_predictions(ts.series, res.pred, out_path(out), res.first_row);
        } else if (gsr->parsed()) {
            const RunConfig c = run_config(config);
            const RnnGrid g = grid.empty() ? RnnGrid{} : parse_rnn_grid(read_json_file(grid));
            const TrajectorySet ts = read_trajectories(traj);
            const int runs = n_runs >= 1 ? n_runs : c.n_runs;
            const GridTable t = rnn_grid_search(ts, g, c.split, c.rnn, runs, env_threads(c.threads));
            write_grid_table(t, out_path(out), "mae_mm", true);
            if (auto best = t.argmin()) say("best validation mae_mm " + std::to_string(*t.rows[*best].value));
        } else if (warp->parsed()) {
            const WarpParams wp = parse_warp(section(config, "warp"));
            save_volume(nw_forward_warp(load_volume(src), load_vector_field(dvf), wp), out_path(out));
        } else if (pim->parsed()) {
            const WarpParams wp = parse_warp(section(config, "warp"));
            const Volume3 ref = load_volume(src);
            const CorrespondenceModel m = load_correspondence(model);
            const PredictionTable pt = read_predictions(predictions);
            require(pt.pred.cols() == 3 * m.r, "predictions have " + std::to_string(pt.pred.cols() / 3) +
                                                   " markers but the model has " + std::to_string(m.r));
            const fs::path dir = out_path(out_dir);
            for (std::size_t i = 0; i < pt.t_index.size(); ++i)
                save_volume(predict_image(ref, m, pt.pred.row(static_cast<Eigen::Index>(i)).transpose(), wp),
                            dir / frame_name("predicted", pt.t_index[i]));
            say("wrote " + std::to_string(pt.t_index.size()) + " volumes to " + dir.string());
        } else if (ev->parsed()) {
            const RunConfig c = run_config(config);
            const TrajectorySet ts = read_trajectories(traj);
            ComparisonConfig cc;
            cc.rnn = c.rnn;
            cc.n_runs = c.n_runs;
            cc.lms_L = c.lms_L;
            cc.lms_eta = c.lms_eta;
            cc.linear_L = c.linear_L;
            auto rows = compare_predictors(ts, cc, c.split, env_threads(c.threads));
            if (!predicted_vols.empty() || !truth_vols.empty()) {
                const auto a = load_volumes(predicted_vols);
                const auto b = load_volumes(truth_vols);
                require(a.size() == b.size(), "--predicted and --truth must list the same number of volumes");
                double s = 0;
                for (std::size_t i = 0; i < a.size(); ++i) s += cross_correlation(a[i], b[i]);
                rows.front().cross_corr = s / static_cast<double>(a.size());
            }
            const fs::path dir = out_path(out_dir);
            write_report_json(rows, dir / "metrics.json");
            write_report_csv(rows, dir / "metrics.csv");
            for (const auto& r : rows)
                say(r.name + (r.valid ? "  e_max " + std::to_string(r.e_max) + "  e_rms " + std::to_string(r.e_rms) +
                                            "  jitter " + std::to_string(r.jitter)
                                      : "  invalid (all runs failed)"));
        } else if (pipe->parsed()) {
            RunConfig c = load_run_config(config);
            if (auto dir = env("MOTIONPRED_OUTPUT_DIR")) c.output_dir = *dir;
            if (!out_dir.empty()) c.output_dir = out_dir;
            c.threads = env_threads(c.threads);
            const auto res = run_pipeline(c);
            say("e_dvf " + std::to_string(res.e_dvf));
            for (const auto& r : res.metrics)
                if (r.valid) say(r.name + "  e_rms " + std::to_string(r.e_rms) + "  e_max " + std::to_string(r.e_max));
            if (res.metrics.front().cross_corr) say("mean cross-correlation " + std::to_string(*res.metrics.front().cross_corr));
            say("manifest " + res.manifest.string());
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case ErrorKind::config: return 1;
            case ErrorKind::numerical: return 2;
            case ErrorKind::io: return 3;
        }
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
