#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "weakloc/detections.hpp"
#include "weakloc/eval.hpp"
#include "weakloc/model.hpp"
#include "weakloc/objective.hpp"

namespace weakloc {

/// Per-class score thresholds; index by class id, slot 0 unused.
struct ThresholdSet {
    std::vector<double> theta;

    double for_class(int class_id) const { return theta.at(static_cast<std::size_t>(class_id)); }
};

struct InferenceConfig {
    int median_window = 25;
    double nms_threshold = 0.2;
    int quantile_grid = 101;
    double calibration_iou = 0.5;
    IouMode calibration_mode = IouMode::Full;
};

/// Frame-level class scores for one track: T x K matrix, column 0 is the
/// background class. Each detection reuses its tracklet's descriptor row
/// unless the detection carries a descriptor_index into `detection_features`.
Eigen::MatrixXd score_track(const Dataset& dataset, std::size_t track_index,
                            const Eigen::MatrixXd& features, const Classifier& classifier,
                            const Eigen::MatrixXd* detection_features = nullptr);

/// Centered median filter; the window shrinks symmetrically near the borders
/// so the output always has the input's length. Window must be odd.
std::vector<double> median_filter(std::span<const double> series, int window);

struct Subtrack {
    FrameInterval interval;  // relative to the series origin
    double score = 0.0;
};

/// Maximal runs of strictly-above-threshold scores; each run is scored by the
/// mean of the series over the run.
std::vector<Subtrack> extract_subtracks(std::span<const double> series, double threshold);

/// Greedy class-wise non-maximum suppression, scoped per video. A detection is
/// removed iff its ST-IoU with a kept higher-scoring detection of the same
/// class and video strictly exceeds the threshold. Output keeps input order.
std::vector<DetectionRecord> nms(std::span<const DetectionRecord> detections, double threshold);

/// Detections for every (track, action class) of `dataset`: smooth the class
/// score series, cut maximal runs above theta_k, copy the track's own boxes,
/// then NMS per video.
std::vector<DetectionRecord> infer_detections(const Dataset& dataset,
                                              const Eigen::MatrixXd& features,
                                              const Classifier& classifier,
                                              const ThresholdSet& thresholds,
                                              const InferenceConfig& config = {});

/// Picks theta_k per class by scanning quantiles of the pooled smoothed class
/// scores on a held-out split and keeping the quantile with the best
/// per-class video-AP; AP ties go to the threshold whose true-positive
/// matches have the largest summed IoU. Classes absent from the split fall
/// back to the median quantile.
ThresholdSet calibrate_thresholds(const Dataset& calibration, const Eigen::MatrixXd& features,
                                  const Classifier& classifier, const InferenceConfig& config = {});

}  // namespace weakloc
