#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "weakloc/dataio.hpp"
#include "weakloc/detections.hpp"
#include "weakloc/model.hpp"

namespace weakloc {

/// How a detection and an instance overlap: full ST-IoU over the common
/// frames, or the sparse variant scored at annotated keyframes only.
enum class IouMode { Full, Keyframe };

IouMode parse_iou_mode(const std::string& name);
std::string iou_mode_name(IouMode mode);

struct DetectionMatch {
    bool tp = false;
    int instance_index = -1;  // index into ground_truth.instances(), -1 for FP
    double iou = 0.0;         // overlap with the matched instance, 0 for FP
};

struct MatchResult {
    std::vector<DetectionMatch> matches;            // parallel to the detection list
    std::vector<std::int64_t> instances_per_class;  // indexed by class id, [0] unused
};

/// Greedy matching in descending score order (ties keep input order): a
/// detection is a true positive iff some not-yet-matched instance of the
/// same class in the same video reaches the IoU threshold; it takes the
/// highest-IoU one. Repeat detections of a matched instance count as false
/// positives.
MatchResult match(std::span<const DetectionRecord> detections, const Dataset& ground_truth,
                  double iou_threshold, IouMode mode);

/// All-point interpolated AP for one class: area under the envelope of the
/// precision-recall curve. The class must have ground-truth instances.
double average_precision(std::span<const DetectionRecord> detections, const MatchResult& result,
                         int class_id);

/// Per-class AP and mAP per threshold, over classes with >= 1 instance.
EvalReport video_map(std::span<const DetectionRecord> detections, const Dataset& ground_truth,
                     std::span<const double> thresholds, IouMode mode);

}  // namespace weakloc
