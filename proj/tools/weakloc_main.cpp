// Command-line driver: synthesize benchmarks, build constraints, run the
// solver, infer detections, evaluate, and chain everything end to end.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "weakloc/common.hpp"
#include "weakloc/constraints.hpp"
#include "weakloc/dataio.hpp"
#include "weakloc/eval.hpp"
#include "weakloc/inference.hpp"
#include "weakloc/pipeline.hpp"
#include "weakloc/solver.hpp"
#include "weakloc/synth.hpp"

namespace {

using namespace weakloc;

std::string join_args(int argc, char** argv) {
    std::string out;
    for (int i = 0; i < argc; ++i) {
        if (i) out += ' ';
        out += argv[i];
    }
    return out;
}

std::string under(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

/// Wall-clock helper for manifests.
class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Dataset to_dataset(TrackData&& data) {
    return Dataset(std::move(data.videos), std::move(data.tracks), std::move(data.instances),
                   data.num_action_classes);
}

/// Eigen row slices used for calibration splits.
std::pair<Dataset, Eigen::MatrixXd> calibration_tail(const Dataset& train,
                                                     const Eigen::MatrixXd& features,
                                                     double frac) {
    const int n = static_cast<int>(train.videos().size());
    const int n_cal = calibration_count(n, frac);
    Dataset calib = train.subset(n - n_cal, n_cal);
    const std::int64_t first_row = train.video_rows(n - n_cal).first;
    Eigen::MatrixXd rows = features.bottomRows(features.rows() - first_row);
    return {std::move(calib), std::move(rows)};
}

struct SynthFlags {
    SynthConfig cfg;
    std::string out_dir;

    void attach(CLI::App* app, bool with_prefix, bool with_seed = true) {
        if (with_seed) app->add_option("--seed", cfg.seed, "root RNG seed");
        app->add_option("--videos", cfg.num_videos, "videos to generate");
        app->add_option("--classes", cfg.num_action_classes, "action classes");
        app->add_option("--dim", cfg.feature_dim, "feature dimension");
        app->add_option("--tracks-per-video", cfg.tracks_per_video, "person tracks per video");
        app->add_option("--frames", cfg.frames_per_video, "frames per video");
        app->add_option("--instances", cfg.instances_per_video, "action instances per video");
        app->add_option("--separation", cfg.class_separation, "class center separation");
        app->add_option("--noise", cfg.feature_noise, "feature noise sigma");
        app->add_option("--jitter", cfg.box_jitter, "box jitter amplitude in pixels");
        app->add_option("--distractor-frac", cfg.distractor_fraction,
                        "fraction of non-actor tracks placed far from the action");
        app->add_option("--keyframes", cfg.keyframes_per_instance, "keyframes per instance");
        if (with_prefix) app->add_option("--prefix", cfg.video_prefix, "video id prefix");
    }
};

int cmd_synth(const SynthFlags& flags, const std::string& command) {
    Stopwatch timer;
    std::filesystem::create_directories(flags.out_dir);
    SynthResult result = generate(flags.cfg);

    std::vector<std::string> outputs;
    const std::string tracks_path = under(flags.out_dir, "tracks.jsonl");
    save_tracks(tracks_path, result.dataset);
    outputs.push_back(tracks_path);
    const std::string features_path = under(flags.out_dir, "features.dfc");
    save_features(features_path, result.features);
    outputs.push_back(features_path);
    for (const auto& [name, records] : result.annotations) {
        const std::string path = under(flags.out_dir, "annotations-" + name + ".jsonl");
        save_annotations(path, records);
        outputs.push_back(path);
    }

    std::vector<std::pair<std::string, std::string>> echo{
        {"videos", std::to_string(flags.cfg.num_videos)},
        {"classes", std::to_string(flags.cfg.num_action_classes)},
        {"dim", std::to_string(flags.cfg.feature_dim)},
        {"tracks_per_video", std::to_string(flags.cfg.tracks_per_video)},
        {"frames", std::to_string(flags.cfg.frames_per_video)},
        {"instances", std::to_string(flags.cfg.instances_per_video)},
        {"separation", fmt(flags.cfg.class_separation)},
        {"noise", fmt(flags.cfg.feature_noise)},
        {"jitter", fmt(flags.cfg.box_jitter)},
        {"distractor_frac", fmt(flags.cfg.distractor_fraction)},
        {"keyframes", std::to_string(flags.cfg.keyframes_per_instance)},
        {"prefix", flags.cfg.video_prefix}};
    write_manifest(under(flags.out_dir, "manifest.json"), command, echo, flags.cfg.seed, {},
                   outputs, timer.seconds());
    return 0;
}

struct BuildFlags {
    std::string tracks, annotations, level, out_dir;
    double box_scale = 1.0;
};

int cmd_build_constraints(const BuildFlags& flags, const std::string& command) {
    Stopwatch timer;
    std::filesystem::create_directories(flags.out_dir);
    const SupervisionLevel level = SupervisionLevel::parse(flags.level);
    Dataset ds = to_dataset(load_tracks(flags.tracks, flags.box_scale));
    const std::vector<AnnotationRecord> records = load_annotations(flags.annotations);
    const std::vector<VideoConstraintSet> sets = build_constraints(ds, level, records);

    const std::string out = under(flags.out_dir, "constraints.jsonl");
    save_constraints(out, sets);
    write_manifest(under(flags.out_dir, "manifest.json"), command,
                   {{"level", level.name()}, {"box_scale", fmt(flags.box_scale)}}, 0,
                   {flags.tracks, flags.annotations}, {out}, timer.seconds());
    return 0;
}

struct SolveFlags {
    std::string features, tracks, annotations, level, out_dir;
    double lambda = 1e-4;
    std::int64_t iterations = 30000;
    std::uint64_t seed = 0;
    double box_scale = 1.0;
    double gap_tolerance = 1e-3;
    std::int64_t log_every = 0;  // 0 = iterations / 200
};

int cmd_solve(const SolveFlags& flags, const std::string& command) {
    Stopwatch timer;
    std::filesystem::create_directories(flags.out_dir);
    const SupervisionLevel level = SupervisionLevel::parse(flags.level);
    Dataset ds = to_dataset(load_tracks(flags.tracks, flags.box_scale));
    const std::vector<AnnotationRecord> records = load_annotations(flags.annotations);
    std::vector<VideoConstraintSet> sets = build_constraints(ds, level, records);
    Eigen::MatrixXd features = load_features(flags.features);
    if (features.rows() != ds.num_rows()) {
        throw DataError("feature rows (" + std::to_string(features.rows()) +
                        ") do not match dataset tracklets (" + std::to_string(ds.num_rows()) +
                        ")");
    }

    SolverConfig cfg;
    cfg.iterations = flags.iterations;
    cfg.lambda = flags.lambda;
    cfg.seed = flags.seed;
    cfg.gap_tolerance = flags.gap_tolerance;
    cfg.log_every = flags.log_every > 0
                        ? flags.log_every
                        : std::max<std::int64_t>(1, flags.iterations / 200);

    RidgeCache cache(std::move(features), flags.lambda);
    BcfwSolver solver(std::move(sets), cache, ds.num_label_columns(), cfg);
    SolveResult result = solver.solve();

    const std::string y_path = under(flags.out_dir, "assignment.dmx");
    const std::string w_path = under(flags.out_dir, "weights.dmx");
    const std::string trace_path = under(flags.out_dir, "trace.csv");
    save_matrix(y_path, result.Y);
    save_matrix(w_path, result.classifier.weights);
    save_trace_csv(trace_path, result.trace);

    write_manifest(under(flags.out_dir, "manifest.json"), command,
                   {{"level", level.name()},
                    {"lambda", fmt(flags.lambda)},
                    {"iterations", std::to_string(flags.iterations)},
                    {"gap_tolerance", fmt(flags.gap_tolerance)},
                    {"h_initial", fmt(result.h_initial)},
                    {"h_final", fmt(result.h_final)},
                    {"final_gap", fmt(result.final_gap)},
                    {"converged", result.converged ? "true" : "false"}},
                   flags.seed, {flags.features, flags.tracks, flags.annotations},
                   {y_path, w_path, trace_path}, timer.seconds());
    return 0;
}

struct InferFlags {
    std::string tracks, features, weights, train_tracks, train_features, out_dir;
    double calibrate_frac = 0.1;
    double box_scale = 1.0;
    double lambda = 1e-4;
};

int cmd_infer(const InferFlags& flags, const std::string& command) {
    Stopwatch timer;
    std::filesystem::create_directories(flags.out_dir);
    Dataset test = to_dataset(load_tracks(flags.tracks, flags.box_scale));
    Eigen::MatrixXd test_features = load_features(flags.features);
    if (test_features.rows() != test.num_rows()) {
        throw DataError("test feature rows do not match test tracklets");
    }
    Classifier clf{load_matrix(flags.weights), flags.lambda};

    Dataset train = to_dataset(load_tracks(flags.train_tracks, flags.box_scale));
    Eigen::MatrixXd train_features = load_features(flags.train_features);
    if (train_features.rows() != train.num_rows()) {
        throw DataError("training feature rows do not match training tracklets");
    }
    auto [calib, calib_features] =
        calibration_tail(train, train_features, flags.calibrate_frac);

    const InferenceConfig cfg;
    const ThresholdSet thresholds = calibrate_thresholds(calib, calib_features, clf, cfg);
    const std::vector<DetectionRecord> detections =
        infer_detections(test, test_features, clf, thresholds, cfg);

    const std::string det_path = under(flags.out_dir, "detections.jsonl");
    save_detections(det_path, detections);
    nlohmann::ordered_json tj;
    tj["theta"] = thresholds.theta;
    {
        std::ofstream f(under(flags.out_dir, "thresholds.json"), std::ios::trunc);
        if (!f) throw DataError("cannot open thresholds.json for writing");
        f << tj.dump(2) << '\n';
    }

    write_manifest(under(flags.out_dir, "manifest.json"), command,
                   {{"calibrate_frac", fmt(flags.calibrate_frac)},
                    {"box_scale", fmt(flags.box_scale)}},
                   0,
                   {flags.tracks, flags.features, flags.weights, flags.train_tracks,
                    flags.train_features},
                   {det_path, under(flags.out_dir, "thresholds.json")}, timer.seconds());
    return 0;
}

struct EvalFlags {
    std::string detections, tracks, out_dir;
    std::vector<double> iou = {0.2, 0.5};
    std::string mode = "full";
    double box_scale = 1.0;
};

int cmd_eval(const EvalFlags& flags, const std::string& command) {
    Stopwatch timer;
    std::filesystem::create_directories(flags.out_dir);
    Dataset ds = to_dataset(load_tracks(flags.tracks, flags.box_scale));
    const std::vector<DetectionRecord> detections = load_detections(flags.detections);
    const IouMode mode = parse_iou_mode(flags.mode);
    const EvalReport report = video_map(detections, ds, flags.iou, mode);

    std::string iou_list;
    for (std::size_t i = 0; i < flags.iou.size(); ++i) {
        if (i) iou_list += ',';
        iou_list += fmt(flags.iou[i]);
    }
    const std::string report_path = under(flags.out_dir, "report.json");
    save_report(report_path, report, {{"iou", iou_list}, {"mode", flags.mode}});
    write_manifest(under(flags.out_dir, "manifest.json"), command,
                   {{"iou", iou_list}, {"mode", flags.mode}}, 0,
                   {flags.detections, flags.tracks}, {report_path}, timer.seconds());
    return 0;
}

struct E2eFlags {
    SynthFlags synth;  // out_dir unused
    std::string level = "full";
    std::string out_dir;
    double lambda = 1e-4;
    std::int64_t iterations = 30000;
    std::uint64_t seed = 0;
    double calibrate_frac = 0.1;
    std::vector<double> iou = {0.2, 0.5};
    std::string mode = "full";
    int train_videos = 40;
    int test_videos = 12;
    double gap_tolerance = 1e-3;

    PipelineConfig pipeline() const {
        PipelineConfig cfg;
        cfg.synth = synth.cfg;
        cfg.train_videos = train_videos;
        cfg.test_videos = test_videos;
        cfg.level = SupervisionLevel::parse(level);
        cfg.lambda = lambda;
        cfg.iterations = iterations;
        cfg.seed = seed;
        cfg.calibrate_frac = calibrate_frac;
        cfg.iou_thresholds = iou;
        cfg.mode = parse_iou_mode(mode);
        cfg.gap_tolerance = gap_tolerance;
        return cfg;
    }
};

void attach_e2e(CLI::App* sub, E2eFlags* flags, bool with_level) {
    flags->synth.attach(sub, /*with_prefix=*/false, /*with_seed=*/false);
    sub->add_option("--seed", flags->seed, "root seed");
    if (with_level) sub->add_option("--level", flags->level, "supervision level");
    sub->add_option("--out-dir", flags->out_dir, "output directory")->required();
    sub->add_option("--lambda", flags->lambda, "ridge regularizer");
    sub->add_option("--iterations", flags->iterations, "solver iteration budget");
    sub->add_option("--calibrate-frac", flags->calibrate_frac,
                    "training tail held out for threshold calibration");
    sub->add_option("--iou", flags->iou, "evaluation IoU thresholds")->delimiter(',');
    sub->add_option("--mode", flags->mode, "ST-IoU mode: full or keyframe");
    sub->add_option("--train-videos", flags->train_videos, "training videos");
    sub->add_option("--test-videos", flags->test_videos, "test videos");
    sub->add_option("--gap-tolerance", flags->gap_tolerance, "relative duality gap target");
}

int cmd_e2e(const E2eFlags& flags, const std::string& command) {
    Stopwatch timer;
    const PipelineConfig cfg = flags.pipeline();
    const PipelineResult result = run_e2e(cfg);
    write_pipeline_outputs(flags.out_dir, result, cfg);
    write_manifest(under(flags.out_dir, "manifest.json"), command, config_echo(cfg), flags.seed,
                   {},
                   {under(flags.out_dir, "report.json"), under(flags.out_dir, "trace.csv"),
                    under(flags.out_dir, "detections.jsonl"),
                    under(flags.out_dir, "thresholds.json")},
                   timer.seconds());
    return 0;
}

struct MixFlags {
    E2eFlags e2e;
    std::vector<std::string> levels;  // weak,strong
    std::vector<double> fractions = {0.0, 0.25, 0.5, 0.75, 1.0};
};

int cmd_mix_curve(const MixFlags& flags, const std::string& command) {
    Stopwatch timer;
    if (flags.levels.size() != 2) {
        throw DataError("--levels needs exactly two names: weak,strong");
    }
    const SupervisionLevel weak = SupervisionLevel::parse(flags.levels[0]);
    const SupervisionLevel strong = SupervisionLevel::parse(flags.levels[1]);

    PipelineConfig cfg = flags.e2e.pipeline();
    cfg.level = strong;  // echoed level: the strong annotations being rationed

    std::filesystem::create_directories(flags.e2e.out_dir);
    std::string csv = "fraction";
    for (double t : cfg.iou_thresholds) csv += ",map@" + fmt(t);
    csv += '\n';

    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < flags.fractions.size(); ++i) {
        const double fraction = flags.fractions[i];
        const PipelineResult result = run_mixed(cfg, weak, strong, fraction);
        char name[32];
        std::snprintf(name, sizeof name, "fraction-%02zu", i);
        const std::string sub_dir = under(flags.e2e.out_dir, name);
        write_pipeline_outputs(sub_dir, result, cfg);
        outputs.push_back(sub_dir);

        csv += fmt(fraction);
        for (double m : result.report.map) csv += ',' + fmt(m);
        csv += '\n';
    }

    const std::string csv_path = under(flags.e2e.out_dir, "mix_curve.csv");
    {
        std::ofstream f(csv_path, std::ios::trunc);
        if (!f) throw DataError("cannot open " + csv_path + " for writing");
        f << csv;
    }
    outputs.push_back(csv_path);

    auto echo = config_echo(cfg);
    echo.emplace_back("weak", weak.name());
    echo.emplace_back("strong", strong.name());
    write_manifest(under(flags.e2e.out_dir, "manifest.json"), command, echo, flags.e2e.seed, {},
                   outputs, timer.seconds());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"weakly supervised spatio-temporal action localization"};
    app.require_subcommand(1);

    SynthFlags synth_flags;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic benchmark");
    synth_flags.attach(synth_cmd, /*with_prefix=*/true);
    synth_cmd->add_option("--out-dir", synth_flags.out_dir, "output directory")->required();

    BuildFlags build_flags;
    CLI::App* build_cmd =
        app.add_subcommand("build-constraints", "compile annotations into label constraints");
    build_cmd->add_option("--tracks", build_flags.tracks, "tracks JSONL")->required();
    build_cmd->add_option("--annotations", build_flags.annotations, "annotation JSONL")
        ->required();
    build_cmd->add_option("--level", build_flags.level, "supervision level")->required();
    build_cmd->add_option("--box-scale", build_flags.box_scale, "scale track boxes on load");
    build_cmd->add_option("--out-dir", build_flags.out_dir, "output directory")->required();

    SolveFlags solve_flags;
    CLI::App* solve_cmd = app.add_subcommand("solve", "run the block-coordinate solver");
    solve_cmd->add_option("--features", solve_flags.features, "feature file")->required();
    solve_cmd->add_option("--tracks", solve_flags.tracks, "tracks JSONL")->required();
    solve_cmd->add_option("--annotations", solve_flags.annotations, "annotation JSONL")
        ->required();
    solve_cmd->add_option("--level", solve_flags.level, "supervision level")->required();
    solve_cmd->add_option("--lambda", solve_flags.lambda, "ridge regularizer");
    solve_cmd->add_option("--iterations", solve_flags.iterations, "iteration budget");
    solve_cmd->add_option("--seed", solve_flags.seed, "sampler seed");
    solve_cmd->add_option("--box-scale", solve_flags.box_scale, "scale track boxes on load");
    solve_cmd->add_option("--gap-tolerance", solve_flags.gap_tolerance,
                          "relative duality gap target");
    solve_cmd->add_option("--log-every", solve_flags.log_every,
                          "trace cadence (0 = iterations/200)");
    solve_cmd->add_option("--out-dir", solve_flags.out_dir, "output directory")->required();

    InferFlags infer_flags;
    CLI::App* infer_cmd = app.add_subcommand("infer", "calibrate thresholds and detect");
    infer_cmd->add_option("--tracks", infer_flags.tracks, "test tracks JSONL")->required();
    infer_cmd->add_option("--features", infer_flags.features, "test feature file")->required();
    infer_cmd->add_option("--weights", infer_flags.weights, "classifier weights (dmx)")
        ->required();
    infer_cmd->add_option("--train-tracks", infer_flags.train_tracks, "training tracks JSONL")
        ->required();
    infer_cmd->add_option("--train-features", infer_flags.train_features,
                          "training feature file")
        ->required();
    infer_cmd->add_option("--calibrate-frac", infer_flags.calibrate_frac,
                          "training tail used for calibration");
    infer_cmd->add_option("--box-scale", infer_flags.box_scale, "scale track boxes on load");
    infer_cmd->add_option("--out-dir", infer_flags.out_dir, "output directory")->required();

    EvalFlags eval_flags;
    CLI::App* eval_cmd = app.add_subcommand("eval", "score detections against ground truth");
    eval_cmd->add_option("--detections", eval_flags.detections, "detections JSONL")->required();
    eval_cmd->add_option("--tracks", eval_flags.tracks, "ground-truth tracks JSONL")->required();
    eval_cmd->add_option("--iou", eval_flags.iou, "IoU thresholds")->delimiter(',');
    eval_cmd->add_option("--mode", eval_flags.mode, "ST-IoU mode: full or keyframe");
    eval_cmd->add_option("--box-scale", eval_flags.box_scale, "scale track boxes on load");
    eval_cmd->add_option("--out-dir", eval_flags.out_dir, "output directory")->required();

    E2eFlags e2e_flags;
    CLI::App* e2e_cmd = app.add_subcommand("e2e", "synthesize, solve, infer and evaluate");
    attach_e2e(e2e_cmd, &e2e_flags, /*with_level=*/true);

    MixFlags mix_flags;
    CLI::App* mix_cmd =
        app.add_subcommand("mix-curve", "supervision mixing curve over strong fractions");
    attach_e2e(mix_cmd, &mix_flags.e2e, /*with_level=*/false);
    mix_cmd->add_option("--levels", mix_flags.levels, "weak,strong level names")
        ->required()
        ->delimiter(',');
    mix_cmd->add_option("--fractions", mix_flags.fractions, "strong-video fractions")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    }

    const std::string command = join_args(argc, argv);
    try {
        if (synth_cmd->parsed()) return cmd_synth(synth_flags, command);
        if (build_cmd->parsed()) return cmd_build_constraints(build_flags, command);
        if (solve_cmd->parsed()) return cmd_solve(solve_flags, command);
        if (infer_cmd->parsed()) return cmd_infer(infer_flags, command);
        if (eval_cmd->parsed()) return cmd_eval(eval_flags, command);
        if (e2e_cmd->parsed()) return cmd_e2e(e2e_flags, command);
        if (mix_cmd->parsed()) return cmd_mix_curve(mix_flags, command);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
