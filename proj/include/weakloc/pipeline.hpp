#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "weakloc/constraints.hpp"
#include "weakloc/dataio.hpp"
#include "weakloc/inference.hpp"
#include "weakloc/solver.hpp"
#include "weakloc/synth.hpp"

namespace weakloc {

/// End-to-end benchmark protocol: synthesize train/test sets, fit on the
/// training videos minus a calibration tail, calibrate thresholds there,
/// detect on the test set and score against its ground truth.
struct PipelineConfig {
    SynthConfig synth;  // num_videos is overridden by the counts below
    int train_videos = 40;
    int test_videos = 12;
    SupervisionLevel level;
    double lambda = 1e-4;
    std::int64_t iterations = 30000;
    std::uint64_t seed = 0;
    /// Tail share of training videos (by id order) held out for threshold
    /// calibration; those videos do not enter the solve.
    double calibrate_frac = 0.1;
    std::vector<double> iou_thresholds = {0.2, 0.5};
    IouMode mode = IouMode::Full;
    InferenceConfig inference;
    double gap_tolerance = 1e-3;
};

struct PipelineResult {
    EvalReport report;
    std::vector<TraceRow> trace;
    std::vector<DetectionRecord> detections;
    ThresholdSet thresholds;
    double h_initial = 0.0;
    double h_final = 0.0;
    double final_gap = 0.0;
    bool converged = false;
};

/// Number of trailing videos reserved for calibration; errors when the split
/// would leave either side empty.
int calibration_count(int num_videos, double frac);

/// Runs the full protocol with one supervision level on every fit video.
PipelineResult run_e2e(const PipelineConfig& config);

/// Mixing protocol: a seeded shuffle of the fit videos receives `strong`
/// supervision on its first round(fraction * count) videos and `weak` on the
/// rest. The shuffle depends only on the seed, so strong sets are nested
/// across fractions.
PipelineResult run_mixed(const PipelineConfig& config, const SupervisionLevel& weak,
                         const SupervisionLevel& strong, double fraction);

/// Writes report.json, trace.csv and detections.jsonl under out_dir. The
/// files carry no timing, so reruns with equal inputs are byte-identical.
void write_pipeline_outputs(const std::string& out_dir, const PipelineResult& result,
                            const PipelineConfig& config);

/// Key/value config echo embedded into reports and manifests.
std::vector<std::pair<std::string, std::string>> config_echo(const PipelineConfig& config);

/// Atomically writes a run manifest (command, config echo, seed, paths,
/// wall-clock seconds, artifact version) as JSON.
void write_manifest(const std::string& path, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& config,
                    std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_seconds);

}  // namespace weakloc
