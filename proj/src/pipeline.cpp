#include "weakloc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <utility>

#include "weakloc/common.hpp"
#include "weakloc/eval.hpp"
#include "weakloc/random.hpp"

#include <json.hpp>

namespace weakloc {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

/// Shared protocol body; `levels_for_fit[i]` is the supervision level of the
/// i-th fit video in canonical order.
PipelineResult run_with_levels(const PipelineConfig& config,
                               const std::vector<SupervisionLevel>& levels_for_fit) {
    SynthConfig train_cfg = config.synth;
    train_cfg.seed = config.seed;
    train_cfg.num_videos = config.train_videos;
    train_cfg.video_prefix = "train";
    SynthConfig test_cfg = train_cfg;
    test_cfg.num_videos = config.test_videos;
    test_cfg.video_prefix = "test";

    SynthResult train = generate(train_cfg);
    SynthResult test = generate(test_cfg);

    const int n_videos = static_cast<int>(train.dataset.videos().size());
    const int n_cal = calibration_count(n_videos, config.calibrate_frac);
    const int n_fit = n_videos - n_cal;
    Dataset fit = train.dataset.subset(0, n_fit);
    Dataset calib = train.dataset.subset(n_fit, n_cal);
    const std::int64_t fit_rows = fit.num_rows();
    Eigen::MatrixXd fit_features = train.features.topRows(fit_rows);
    Eigen::MatrixXd calib_features =
        train.features.bottomRows(train.features.rows() - fit_rows);

    std::unordered_map<std::string, SupervisionLevel> level_by_video;
    for (int i = 0; i < n_fit; ++i) {
        level_by_video.emplace(fit.videos()[static_cast<std::size_t>(i)].video_id,
                               levels_for_fit[static_cast<std::size_t>(i)]);
    }
    std::unordered_map<std::string, std::vector<AnnotationRecord>> by_level;
    for (const auto& [name, records] : train.annotations) by_level.emplace(name, records);
    std::vector<VideoConstraintSet> sets = mix_levels(fit, level_by_video, by_level);

    SolverConfig solver_cfg;
    solver_cfg.iterations = config.iterations;
    solver_cfg.lambda = config.lambda;
    solver_cfg.seed = config.seed;
    solver_cfg.gap_tolerance = config.gap_tolerance;
    solver_cfg.log_every = std::max<std::int64_t>(1, config.iterations / 200);

    RidgeCache cache(std::move(fit_features), config.lambda);
    BcfwSolver solver(std::move(sets), cache, fit.num_label_columns(), solver_cfg);
    SolveResult solved = solver.solve();

    PipelineResult out;
    out.trace = std::move(solved.trace);
    out.h_initial = solved.h_initial;
    out.h_final = solved.h_final;
    out.final_gap = solved.final_gap;
    out.converged = solved.converged;

    out.thresholds =
        calibrate_thresholds(calib, calib_features, solved.classifier, config.inference);
    out.detections = infer_detections(test.dataset, test.features, solved.classifier,
                                      out.thresholds, config.inference);
    out.report =
        video_map(out.detections, test.dataset, config.iou_thresholds, config.mode);
    return out;
}

}  // namespace

int calibration_count(int num_videos, double frac) {
    const int n_cal = static_cast<int>(std::llround(frac * static_cast<double>(num_videos)));
    if (n_cal < 1) {
        throw DataError("calibration split is empty; raise calibrate_frac or add videos");
    }
    if (n_cal >= num_videos) {
        throw DataError("calibration split would swallow every training video");
    }
    return n_cal;
}

PipelineResult run_e2e(const PipelineConfig& config) {
    const int n_cal = calibration_count(config.train_videos, config.calibrate_frac);
    const std::vector<SupervisionLevel> levels(
        static_cast<std::size_t>(config.train_videos - n_cal), config.level);
    return run_with_levels(config, levels);
}

PipelineResult run_mixed(const PipelineConfig& config, const SupervisionLevel& weak,
                         const SupervisionLevel& strong, double fraction) {
    if (fraction < 0.0 || fraction > 1.0) {
        throw DataError("mixing fraction must lie in [0, 1]");
    }
    const int n_cal = calibration_count(config.train_videos, config.calibrate_frac);
    const int n_fit = config.train_videos - n_cal;

    // Seeded shuffle of fit-video indices; fractions share it, so larger
    // strong sets contain smaller ones.
    std::vector<int> order(static_cast<std::size_t>(n_fit));
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(config.seed, "mix-shuffle");
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = next_index(rng, i);
        std::swap(order[i - 1], order[j]);
    }
    const int n_strong =
        static_cast<int>(std::llround(fraction * static_cast<double>(n_fit)));

    std::vector<SupervisionLevel> levels(static_cast<std::size_t>(n_fit), weak);
    for (int i = 0; i < n_strong; ++i) {
        levels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = strong;
    }
    return run_with_levels(config, levels);
}

std::vector<std::pair<std::string, std::string>> config_echo(const PipelineConfig& config) {
    std::vector<std::pair<std::string, std::string>> echo;
    echo.emplace_back("level", config.level.name());
    echo.emplace_back("lambda", format_double(config.lambda));
    echo.emplace_back("iterations", std::to_string(config.iterations));
    echo.emplace_back("seed", std::to_string(config.seed));
    echo.emplace_back("train_videos", std::to_string(config.train_videos));
    echo.emplace_back("test_videos", std::to_string(config.test_videos));
    echo.emplace_back("calibrate_frac", format_double(config.calibrate_frac));
    echo.emplace_back("mode", std::string(iou_mode_name(config.mode)));
    echo.emplace_back("noise", format_double(config.synth.feature_noise));
    echo.emplace_back("separation", format_double(config.synth.class_separation));
    return echo;
}

void write_pipeline_outputs(const std::string& out_dir, const PipelineResult& result,
                            const PipelineConfig& config) {
    std::filesystem::create_directories(out_dir);
    const auto under = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };
    save_report(under("report.json"), result.report, config_echo(config));
    save_trace_csv(under("trace.csv"), result.trace);
    save_detections(under("detections.jsonl"), result.detections);

    nlohmann::ordered_json thresholds;
    thresholds["theta"] = result.thresholds.theta;
    std::ofstream f(under("thresholds.json"), std::ios::trunc);
    if (!f) throw DataError("cannot open " + under("thresholds.json") + " for writing");
    f << thresholds.dump(2) << '\n';
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& config,
                    std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_seconds) {
    nlohmann::ordered_json j;
    j["command"] = command;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = std::move(cfg);
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = wall_seconds;
    j["version"] = kArtifactVersion;

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw DataError("cannot open " + tmp + " for writing");
        f << j.dump(2) << '\n';
        if (!f) throw DataError("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace weakloc
