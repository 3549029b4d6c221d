#include "weakloc/inference.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>

#include "weakloc/common.hpp"

namespace weakloc {

namespace {

/// Tracklet rows belonging to one track, in tracklet order. Rows of a track
/// are contiguous within the video's row range.
std::vector<std::int64_t> track_rows(const Dataset& ds, std::size_t track_index) {
    const Track& track = ds.tracks()[track_index];
    const int vi = ds.video_index(track.video_id);
    const auto [begin, end] = ds.video_rows(vi);
    std::vector<std::int64_t> rows;
    for (std::int64_t r = begin; r < end; ++r) {
        if (ds.tracklets()[static_cast<std::size_t>(r)].track_index ==
            static_cast<std::int64_t>(track_index)) {
            rows.push_back(r);
        }
    }
    return rows;
}

}  // namespace

Eigen::MatrixXd score_track(const Dataset& dataset, std::size_t track_index,
                            const Eigen::MatrixXd& features, const Classifier& classifier,
                            const Eigen::MatrixXd* detection_features) {
    if (track_index >= dataset.tracks().size()) {
        throw std::out_of_range("score_track: track index out of range");
    }
    const Track& track = dataset.tracks()[track_index];
    const int T = track.length();
    const auto K = classifier.weights.cols();
    if (detection_features != nullptr && detection_features->cols() != classifier.weights.rows()) {
        throw DataError("per-detection feature dimension does not match the classifier");
    }

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(T, K);
    for (std::int64_t row : track_rows(dataset, track_index)) {
        const Tracklet& t = dataset.tracklets()[static_cast<std::size_t>(row)];
        if (features.cols() != classifier.weights.rows()) {
            throw std::invalid_argument("score_track: feature dimension mismatch");
        }
        const Eigen::VectorXd tracklet_scores =
            classifier.weights.transpose() * features.row(row).transpose();
        for (int f = t.span.begin; f < t.span.end; ++f) {
            const int i = f - track.start_frame();
            const Detection& det = track.detections[static_cast<std::size_t>(i)];
            if (det.descriptor_index) {
                if (detection_features == nullptr) {
                    throw DataError("detection in track \"" + track.track_id +
                                    "\" carries a descriptor index but no per-detection "
                                    "features were supplied");
                }
                const std::int64_t di = *det.descriptor_index;
                if (di < 0 || di >= detection_features->rows()) {
                    throw DataError("descriptor index " + std::to_string(di) +
                                    " out of range for track \"" + track.track_id + "\"");
                }
                scores.row(i) = (classifier.weights.transpose() *
                                 detection_features->row(di).transpose())
                                    .transpose();
            } else {
                scores.row(i) = tracklet_scores.transpose();
            }
        }
    }
    return scores;
}

std::vector<double> median_filter(std::span<const double> series, int window) {
    if (window < 1 || window % 2 == 0) {
        throw std::invalid_argument("median_filter: window must be odd and positive");
    }
    const std::int64_t n = static_cast<std::int64_t>(series.size());
    std::vector<double> out(series.size());
    std::vector<double> scratch;
    scratch.reserve(static_cast<std::size_t>(window));
    const std::int64_t radius = window / 2;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::int64_t r = std::min({radius, i, n - 1 - i});
        scratch.assign(series.begin() + (i - r), series.begin() + (i + r + 1));
        auto mid = scratch.begin() + r;
        std::nth_element(scratch.begin(), mid, scratch.end());
        out[static_cast<std::size_t>(i)] = *mid;
    }
    return out;
}

std::vector<Subtrack> extract_subtracks(std::span<const double> series, double threshold) {
    std::vector<Subtrack> runs;
    const std::int64_t n = static_cast<std::int64_t>(series.size());
    std::int64_t i = 0;
    while (i < n) {
        if (!(series[static_cast<std::size_t>(i)] > threshold)) {
            ++i;
            continue;
        }
        std::int64_t j = i;
        double sum = 0.0;
        while (j < n && series[static_cast<std::size_t>(j)] > threshold) {
            sum += series[static_cast<std::size_t>(j)];
            ++j;
        }
        runs.push_back({FrameInterval{static_cast<int>(i), static_cast<int>(j)},
                        sum / static_cast<double>(j - i)});
        i = j;
    }
    return runs;
}

std::vector<DetectionRecord> nms(std::span<const DetectionRecord> detections, double threshold) {
    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return detections[a].score > detections[b].score;
    });

    std::vector<char> keep(detections.size(), 0);
    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        const DetectionRecord& d = detections[idx];
        bool suppressed = false;
        for (std::size_t other : kept) {
            const DetectionRecord& k = detections[other];
            if (k.video_id != d.video_id || k.class_id != d.class_id) continue;
            if (st_iou(k.segment_view(), d.segment_view()) > threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            keep[idx] = 1;
            kept.push_back(idx);
        }
    }

    std::vector<DetectionRecord> out;
    out.reserve(kept.size());
    for (std::size_t i = 0; i < detections.size(); ++i) {
        if (keep[i]) out.push_back(detections[i]);
    }
    return out;
}

namespace {

/// Runs of `series` above `threshold` turned into full detection records,
/// with boxes copied from the track itself.
void append_track_detections(const Track& track, std::span<const double> series, int class_id,
                             double threshold, std::vector<DetectionRecord>* out) {
    for (const Subtrack& run : extract_subtracks(series, threshold)) {
        DetectionRecord rec;
        rec.video_id = track.video_id;
        rec.class_id = class_id;
        rec.interval = FrameInterval{track.start_frame() + run.interval.begin,
                                     track.start_frame() + run.interval.end};
        rec.score = run.score;
        rec.boxes.reserve(static_cast<std::size_t>(run.interval.length()));
        for (int i = run.interval.begin; i < run.interval.end; ++i) {
            rec.boxes.push_back(track.detections[static_cast<std::size_t>(i)].box);
        }
        out->push_back(std::move(rec));
    }
}

}  // namespace

std::vector<DetectionRecord> infer_detections(const Dataset& dataset,
                                              const Eigen::MatrixXd& features,
                                              const Classifier& classifier,
                                              const ThresholdSet& thresholds,
                                              const InferenceConfig& config) {
    const int num_classes = dataset.num_action_classes();
    if (static_cast<int>(thresholds.theta.size()) != num_classes + 1) {
        throw DataError("threshold set does not cover every action class");
    }

    std::vector<DetectionRecord> all;
    for (int vi = 0; vi < static_cast<int>(dataset.videos().size()); ++vi) {
        std::vector<DetectionRecord> video_dets;
        for (int ti : dataset.video_tracks(vi)) {
            const Track& track = dataset.tracks()[static_cast<std::size_t>(ti)];
            const Eigen::MatrixXd scores =
                score_track(dataset, static_cast<std::size_t>(ti), features, classifier);
            for (int k = 1; k <= num_classes; ++k) {
                const Eigen::VectorXd column = scores.col(k);
                const std::vector<double> smoothed = median_filter(
                    std::span<const double>(column.data(), static_cast<std::size_t>(column.size())),
                    config.median_window);
                append_track_detections(track, smoothed, k, thresholds.for_class(k), &video_dets);
            }
        }
        std::vector<DetectionRecord> kept = nms(video_dets, config.nms_threshold);
        all.insert(all.end(), std::make_move_iterator(kept.begin()),
                   std::make_move_iterator(kept.end()));
    }
    return all;
}

ThresholdSet calibrate_thresholds(const Dataset& calibration, const Eigen::MatrixXd& features,
                                  const Classifier& classifier, const InferenceConfig& config) {
    if (calibration.videos().empty()) throw DataError("empty calibration split");
    if (config.quantile_grid < 2) {
        throw std::invalid_argument("calibrate_thresholds: quantile grid needs at least 2 points");
    }
    const int num_classes = calibration.num_action_classes();

    // Smooth every track's class-score series once; candidates only re-cut runs.
    struct TrackScores {
        std::size_t track_index;
        std::vector<std::vector<double>> smoothed;  // per class, length T
    };
    std::vector<TrackScores> cache;
    for (std::size_t ti = 0; ti < calibration.tracks().size(); ++ti) {
        const Eigen::MatrixXd scores = score_track(calibration, ti, features, classifier);
        TrackScores entry;
        entry.track_index = ti;
        entry.smoothed.resize(static_cast<std::size_t>(num_classes) + 1);
        for (int k = 1; k <= num_classes; ++k) {
            const Eigen::VectorXd column = scores.col(k);
            entry.smoothed[static_cast<std::size_t>(k)] = median_filter(
                std::span<const double>(column.data(), static_cast<std::size_t>(column.size())),
                config.median_window);
        }
        cache.push_back(std::move(entry));
    }
    if (cache.empty()) throw DataError("calibration split has no tracks");

    // Class instance counts decide which classes can actually be validated.
    std::vector<std::int64_t> instance_count(static_cast<std::size_t>(num_classes) + 1, 0);
    for (const ActionInstance& inst : calibration.instances()) {
        ++instance_count[static_cast<std::size_t>(inst.class_id)];
    }

    const auto detections_at = [&](int k, double theta) {
        std::vector<DetectionRecord> dets;
        for (const TrackScores& entry : cache) {
            const Track& track = calibration.tracks()[entry.track_index];
            append_track_detections(track, entry.smoothed[static_cast<std::size_t>(k)], k, theta,
                                    &dets);
        }
        return nms(dets, config.nms_threshold);
    };

    ThresholdSet out;
    out.theta.assign(static_cast<std::size_t>(num_classes) + 1, 0.0);
    for (int k = 1; k <= num_classes; ++k) {
        std::vector<double> pooled;
        for (const TrackScores& entry : cache) {
            const auto& s = entry.smoothed[static_cast<std::size_t>(k)];
            pooled.insert(pooled.end(), s.begin(), s.end());
        }
        std::sort(pooled.begin(), pooled.end());
        const std::size_t n = pooled.size();
        const auto quantile = [&](double q) {
            const auto idx = static_cast<std::size_t>(q * static_cast<double>(n - 1));
            return pooled[idx];
        };

        if (instance_count[static_cast<std::size_t>(k)] == 0) {
            out.theta[static_cast<std::size_t>(k)] = quantile(0.5);
            continue;
        }

        double best_theta = quantile(0.0);
        double best_ap = -1.0;
        double best_tightness = -1.0;
        for (int g = 0; g < config.quantile_grid; ++g) {
            const double q = static_cast<double>(g) / static_cast<double>(config.quantile_grid - 1);
            const double theta = quantile(q);
            const std::vector<DetectionRecord> dets = detections_at(k, theta);
            const MatchResult matched =
                match(dets, calibration, config.calibration_iou, config.calibration_mode);
            const double ap = average_precision(dets, matched, k);
            // Ranked AP ignores trailing false positives, so whole ranges of
            // theta tie at the best AP. Break ties by the summed IoU of the
            // true-positive matches: it peaks where the cut runs hug the
            // instances instead of bloating into background (low theta) or
            // fragmenting (high theta), both of which leave the AP unchanged
            // here but hurt on held-out videos.
            double tightness = 0.0;
            for (const DetectionMatch& m : matched.matches) {
                if (m.tp) tightness += m.iou;
            }
            if (ap > best_ap || (ap == best_ap && tightness > best_tightness)) {
                best_ap = ap;
                best_tightness = tightness;
                best_theta = theta;
            }
        }
        out.theta[static_cast<std::size_t>(k)] = best_theta;
    }
    return out;
}

}  // namespace weakloc
