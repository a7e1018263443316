#pragma once

// End-to-end chain: synth -> register -> track -> predict -> predict-image
// -> evaluate, with a content-hash manifest of everything written.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "motionpred/config.hpp"
#include "motionpred/correspondence.hpp"
#include "motionpred/csv_io.hpp"
#include "motionpred/evaluation.hpp"
#include "motionpred/optical_flow.hpp"
#include "motionpred/predictors.hpp"
#include "motionpred/synthetic.hpp"
#include "motionpred/tracking.hpp"
#include "motionpred/volume_io.hpp"

namespace motionpred {

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot hash " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw IoError("sha256 init failed");
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return hex.str();
}

/// Failure inside a named stage; keeps the original error kind for the exit code.
class StageError : public Error {
public:
    StageError(const std::string& stage, const Error& cause)
        : Error(cause.kind(), "stage '" + stage + "' failed: " + cause.what()), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct StageRecord {
    std::string name;
    std::vector<std::filesystem::path> files;  ///< relative to the output directory
    double seconds = 0;
};

struct PipelineResult {
    std::vector<StageRecord> stages;
    std::filesystem::path manifest;
    std::vector<MetricsReport> metrics;
    std::vector<double> cross_corr;  ///< per test frame
    double e_dvf = 0;
};

inline std::string frame_name(const std::string& stem, int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%04d.json", k);
    return stem + buf;
}

/// Header path plus its payload files, relative to `root`.
inline std::vector<std::filesystem::path> grid_files(const std::filesystem::path& root, const std::filesystem::path& rel) {
    std::vector<std::filesystem::path> out{rel};
    const auto g = nlohmann::json::parse(std::ifstream(root / rel));
    for (const auto& p : g.at("payloads")) out.push_back(rel.parent_path() / p.get<std::string>());
    return out;
}

inline PipelineResult run_pipeline(const RunConfig& c) {
    namespace fs = std::filesystem;
    const fs::path root = c.output_dir;
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create output directory " + root.string() + ": " + ec.message());
    const int threads = c.thread_count();
    PipelineResult res;

    auto stage = [&](const std::string& name, const std::function<void(StageRecord&)>& body) {
        StageRecord rec;
        rec.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(rec);
        } catch (const Error& e) {
            throw StageError(name, e);
        } catch (const std::exception& e) {
            throw StageError(name, IoError(e.what()));
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.stages.push_back(std::move(rec));
    };
    auto add_grid = [&](StageRecord& rec, const fs::path& rel) {
        for (auto& f : grid_files(root, rel)) rec.files.push_back(f);
    };
    // Frames are handed on exactly as stored so stage subcommands reproduce the chain.
    auto stored = [&](Volume3 v) {
        if (c.volume_dtype == Dtype::f32)
            for (double& x : v.data()) x = static_cast<double>(static_cast<float>(x));
        else if (c.volume_dtype == Dtype::u16)
            for (double& x : v.data()) x = std::clamp(std::round(x), 0.0, 65535.0);
        return v;
    };

    std::vector<Volume3> frames;
    stage("synth", [&](StageRecord& rec) {
        std::vector<Volume3> base;
        if (c.base_volumes.empty()) {
            base = make_breathing_phases(c.phantom.dims, c.phantom.blobs, c.phantom.motion, c.phantom.background);
            for (auto& b : base) b.set_spacing(c.phantom.spacing);
        } else {
            for (const auto& p : c.base_volumes) base.push_back(load_volume(p));
        }
        frames = extend_sequence(base, c.drift, c.noise);
        for (std::size_t k = 0; k < frames.size(); ++k) {
            frames[k] = stored(std::move(frames[k]));
            const fs::path rel = fs::path("frames") / frame_name("frame", static_cast<int>(k + 1));
            save_volume(frames[k], root / rel, c.volume_dtype);
            add_grid(rec, rel);
        }
    });

    std::vector<VectorField3> dvfs;
    stage("register", [&](StageRecord& rec) {
        dvfs = register_sequence(frames, c.flow, threads);
        for (const auto& f : dvfs)
            if (!f.all_finite()) throw NumericalFailure(0, "non-finite displacement field");
        std::vector<VectorField3> tail(dvfs.begin() + 1, dvfs.end());
        res.e_dvf = frames.size() >= 2 ? registration_error(frames, tail) : 0.0;
        if (c.save_dvfs)
            for (std::size_t k = 0; k < dvfs.size(); ++k) {
                const fs::path rel = fs::path("dvf") / frame_name("dvf", static_cast<int>(k + 1));
                save_vector_field(dvfs[k], root / rel, Dtype::f32);
                add_grid(rec, rel);
            }
        auto out = detail::open_out(root / "registration.json");
        out << nlohmann::json{{"e_dvf", res.e_dvf}, {"n_frames", frames.size()}}.dump(2) << '\n';
        rec.files.push_back("registration.json");
    });

    TrajectorySet ts;
    stage("track", [&](StageRecord& rec) {
        ts = extract_trajectories(dvfs, c.markers, frames.front().spacing());
        write_trajectories(ts, root / "trajectories.csv");
        rec.files.push_back("trajectories.csv");
    });

    PredictionResult rnn;
    stage("predict", [&](StageRecord& rec) {
        RnnConfig rc = c.rnn;
        rc.r = ts.r;
        rc.seed = run_seed(c.rnn.seed, 0);
        rnn = run_online(ts, rc, c.split);
        write_predictions(ts.series, rnn.pred, root / "predictions.csv", rnn.first_row);
        rec.files.push_back("predictions.csv");
    });

    std::vector<Volume3> predicted;
    stage("predict-image", [&](StageRecord& rec) {
        CorrespondenceFitter fit(frames.front().dims(), ts.r);
        for (int n = 0; n < c.split.n_train; ++n) fit.add(dvfs[static_cast<std::size_t>(n)], ts.series.row(n).transpose());
        const CorrespondenceModel model = fit.finish();
        save_correspondence(model, root / "correspondence.json");
        add_grid(rec, "correspondence.json");
        predicted.resize(static_cast<std::size_t>(c.split.n_test));
        parallel_for(predicted.size(), threads, [&](std::size_t i) {
            const int k = c.split.test_begin() + static_cast<int>(i);
            predicted[i] = stored(predict_image(frames.front(), model, rnn.pred.row(k).transpose(), c.warp));
        });
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            const fs::path rel = fs::path("predicted") / frame_name("predicted", c.split.test_begin() + static_cast<int>(i) + 1);
            save_volume(predicted[i], root / rel, c.volume_dtype);
            add_grid(rec, rel);
        }
    });

    stage("evaluate", [&](StageRecord& rec) {
        ComparisonConfig cc;
        cc.rnn = c.rnn;
        cc.n_runs = c.n_runs;
        cc.lms_L = c.lms_L;
        cc.lms_eta = c.lms_eta;
        cc.linear_L = c.linear_L;
        res.metrics = compare_predictors(ts, cc, c.split, threads);
        auto out = detail::open_out(root / "image_eval.csv");
        out << "t_index,cross_corr\n";
        double sum = 0;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            const int k = c.split.test_begin() + static_cast<int>(i);
            const double cc_k = cross_correlation(predicted[i], frames[static_cast<std::size_t>(k)]);
            res.cross_corr.push_back(cc_k);
            sum += cc_k;
            out << k + 1 << ',' << cc_k << '\n';
        }
        out.close();
        res.metrics.front().cross_corr = sum / static_cast<double>(predicted.size());
        write_report_json(res.metrics, root / "metrics.json", false);
        write_report_csv(res.metrics, root / "metrics.csv", false);
        for (const char* f : {"metrics.json", "metrics.csv", "image_eval.csv"}) rec.files.push_back(f);
    });

    // Timings vary run to run, so they live outside the hashed artifacts.
    nlohmann::json timing = nlohmann::json::object();
    for (const auto& s : res.stages) timing["stage_seconds"][s.name] = s.seconds;
    for (const auto& m : res.metrics) timing["step_ms"][m.name] = m.step_ms;
    {
        auto out = detail::open_out(root / "timing.json");
        out << timing.dump(2) << '\n';
    }

    nlohmann::json manifest;
    manifest["seed"] = c.seed;
    manifest["stages"] = nlohmann::json::array();
    for (const auto& s : res.stages) {
        nlohmann::json files = nlohmann::json::array();
        for (const auto& f : s.files)
            files.push_back({{"path", f.generic_string()}, {"sha256", sha256_file(root / f)},
                             {"bytes", fs::file_size(root / f)}});
        manifest["stages"].push_back({{"name", s.name}, {"files", files}});
    }
    manifest["unhashed"] = {"timing.json"};
    res.manifest = root / "manifest.json";
    auto out = detail::open_out(res.manifest);
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + res.manifest.string());
    return res;
}

}  // namespace motionpred
