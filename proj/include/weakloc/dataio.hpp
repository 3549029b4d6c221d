#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "weakloc/constraints.hpp"
#include "weakloc/detections.hpp"
#include "weakloc/model.hpp"
#include "weakloc/supervision.hpp"

namespace weakloc {

/// Tracklet feature matrix, one f32 row per tracklet.
/// Layout: "DFC1" magic, u32 version (= 1), u64 rows, u64 dim, then
/// rows*dim little-endian f32 values in row-major order. File length is
/// validated against the header before any allocation.
Eigen::MatrixXd load_features(const std::string& path);
void save_features(const std::string& path, const Eigen::MatrixXd& features);

/// Dense f64 matrix (assignments, classifier weights). Layout mirrors the
/// feature format: "DMX1" magic, u32 version, u64 rows, u64 cols, f64 LE
/// row-major payload.
Eigen::MatrixXd load_matrix(const std::string& path);
void save_matrix(const std::string& path, const Eigen::MatrixXd& m);

struct TrackData {
    std::vector<VideoRecord> videos;
    std::vector<Track> tracks;
    std::vector<ActionInstance> instances;
    int num_action_classes = 0;
};

/// JSON-lines track file: one object per line, discriminated by "type"
/// ("video", "track", "instance"). Unknown fields are ignored so files can
/// carry extra metadata. `box_scale` rescales candidate track boxes about
/// their centers at load time; ground-truth instance boxes are kept as-is.
TrackData load_tracks(const std::string& path, double box_scale = 1.0);
void save_tracks(const std::string& path, const Dataset& dataset);

std::vector<AnnotationRecord> load_annotations(const std::string& path);
void save_annotations(const std::string& path, std::span<const AnnotationRecord> records);

std::vector<DetectionRecord> load_detections(const std::string& path);
void save_detections(const std::string& path, std::span<const DetectionRecord> records);

std::vector<VideoConstraintSet> load_constraints(const std::string& path);
void save_constraints(const std::string& path, std::span<const VideoConstraintSet> sets);

/// Evaluation report: single JSON document with deterministic key order.
struct ClassReport {
    int class_id = 0;
    std::int64_t num_instances = 0;
    std::vector<double> ap;  // one per threshold
};

struct EvalReport {
    std::string mode;  // "full" or "keyframe"
    std::vector<double> thresholds;
    std::vector<ClassReport> per_class;
    std::vector<double> map;  // one per threshold
};

void save_report(const std::string& path, const EvalReport& report,
                 const std::vector<std::pair<std::string, std::string>>& config);

/// Solver trace CSV: header then one row per logged step, numbers printed
/// with %.17g so reruns are byte-identical.
struct TraceRow {
    std::int64_t iteration = 0;
    std::string video_id;
    double h = 0.0;
    double total_gap = 0.0;
    double gamma = 0.0;
};

void save_trace_csv(const std::string& path, std::span<const TraceRow> rows);

}  // namespace weakloc
