#include "weakloc/eval.hpp"

#include <algorithm>
#include <numeric>

#include "weakloc/common.hpp"

namespace weakloc {

namespace {

/// Detection indices in evaluation order: score descending, input order on
/// ties.
std::vector<int> rank_order(std::span<const DetectionRecord> detections) {
    std::vector<int> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return detections[static_cast<std::size_t>(a)].score >
               detections[static_cast<std::size_t>(b)].score;
    });
    return order;
}

double overlap(const DetectionRecord& det, const ActionInstance& inst, IouMode mode) {
    if (mode == IouMode::Keyframe) {
        return st_iou_keyframe(det.segment_view(), inst);
    }
    return st_iou(det.segment_view(), inst.segment_view());
}

}  // namespace

IouMode parse_iou_mode(const std::string& name) {
    if (name == "full") return IouMode::Full;
    if (name == "keyframe") return IouMode::Keyframe;
    throw DataError("unknown IoU mode \"" + name + "\" (expected full or keyframe)");
}

std::string iou_mode_name(IouMode mode) {
    return mode == IouMode::Full ? "full" : "keyframe";
}

MatchResult match(std::span<const DetectionRecord> detections, const Dataset& ground_truth,
                  double iou_threshold, IouMode mode) {
    MatchResult result;
    result.matches.assign(detections.size(), {});
    result.instances_per_class.assign(
        static_cast<std::size_t>(ground_truth.num_action_classes()) + 1, 0);
    for (const ActionInstance& inst : ground_truth.instances()) {
        ++result.instances_per_class[static_cast<std::size_t>(inst.class_id)];
        if (mode == IouMode::Keyframe && inst.keyframes.empty()) {
            throw DataError("instance " + std::to_string(inst.instance_id) + " in video " +
                            inst.video_id + " has no keyframes; keyframe mode needs them");
        }
    }
    if (mode == IouMode::Full) {
        for (const ActionInstance& inst : ground_truth.instances()) {
            if (!inst.has_full_boxes()) {
                throw DataError("instance " + std::to_string(inst.instance_id) + " in video " +
                                inst.video_id + " has no per-frame boxes; full mode needs them");
            }
        }
    }

    std::vector<char> taken(ground_truth.instances().size(), 0);
    for (int di : rank_order(detections)) {
        const DetectionRecord& det = detections[static_cast<std::size_t>(di)];
        if (det.class_id < 1 || det.class_id > ground_truth.num_action_classes()) {
            throw DataError("detection carries unknown class id " +
                            std::to_string(det.class_id));
        }
        int vi = ground_truth.video_index(det.video_id);
        int best = -1;
        double best_iou = 0.0;
        for (int ii : ground_truth.video_instances(vi)) {
            const ActionInstance& inst = ground_truth.instances()[static_cast<std::size_t>(ii)];
            if (inst.class_id != det.class_id || taken[static_cast<std::size_t>(ii)]) continue;
            double iou = overlap(det, inst, mode);
            if (iou >= iou_threshold && iou > best_iou) {
                best = ii;
                best_iou = iou;
            }
        }
        // Threshold exactly 0 would make best_iou's > comparison skip
        // zero-overlap instances; treat those as unmatched anyway.
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = 1;
            result.matches[static_cast<std::size_t>(di)] = DetectionMatch{true, best, best_iou};
        }
    }
    return result;
}

double average_precision(std::span<const DetectionRecord> detections, const MatchResult& result,
                         int class_id) {
    if (class_id < 1 || class_id >= static_cast<int>(result.instances_per_class.size())) {
        throw DataError("average_precision: class id out of range");
    }
    std::int64_t num_instances = result.instances_per_class[static_cast<std::size_t>(class_id)];
    if (num_instances == 0) {
        throw DataError("average_precision undefined for class " + std::to_string(class_id) +
                        " with no instances");
    }
    std::vector<char> tp_ranked;
    for (int di : rank_order(detections)) {
        if (detections[static_cast<std::size_t>(di)].class_id != class_id) continue;
        tp_ranked.push_back(result.matches[static_cast<std::size_t>(di)].tp ? 1 : 0);
    }
    // Precision envelope from the right; each TP contributes one recall
    // step of height 1/num_instances at the enveloped precision.
    const std::size_t n = tp_ranked.size();
    std::vector<double> precision(n);
    std::int64_t tp = 0;
    for (std::size_t j = 0; j < n; ++j) {
        tp += tp_ranked[j];
        precision[j] = static_cast<double>(tp) / static_cast<double>(j + 1);
    }
    double envelope = 0.0;
    double ap = 0.0;
    for (std::size_t j = n; j-- > 0;) {
        envelope = std::max(envelope, precision[j]);
        if (tp_ranked[j]) ap += envelope;
    }
    return ap / static_cast<double>(num_instances);
}

EvalReport video_map(std::span<const DetectionRecord> detections, const Dataset& ground_truth,
                     std::span<const double> thresholds, IouMode mode) {
    if (ground_truth.instances().empty()) {
        throw DataError("evaluation needs at least one ground-truth instance");
    }
    EvalReport report;
    report.mode = iou_mode_name(mode);
    report.thresholds.assign(thresholds.begin(), thresholds.end());

    std::vector<MatchResult> results;
    results.reserve(thresholds.size());
    for (double thr : thresholds) {
        results.push_back(match(detections, ground_truth, thr, mode));
    }
    const MatchResult& counts = results.front();
    report.map.assign(thresholds.size(), 0.0);
    std::int64_t scored_classes = 0;
    for (int cls = 1; cls <= ground_truth.num_action_classes(); ++cls) {
        std::int64_t n = counts.instances_per_class[static_cast<std::size_t>(cls)];
        if (n == 0) continue;
        ++scored_classes;
        ClassReport cr;
        cr.class_id = cls;
        cr.num_instances = n;
        for (std::size_t t = 0; t < results.size(); ++t) {
            double ap = average_precision(detections, results[t], cls);
            cr.ap.push_back(ap);
            report.map[t] += ap;
        }
        report.per_class.push_back(std::move(cr));
    }
    for (double& m : report.map) m /= static_cast<double>(scored_classes);
    return report;
}

}  // namespace weakloc
