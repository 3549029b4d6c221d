#include "weakloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include "weakloc/common.hpp"
#include "weakloc/random.hpp"

namespace weakloc {

namespace {

constexpr double kCanvasW = 320.0;
constexpr double kCanvasH = 240.0;
constexpr double kBoxSide = 48.0;
// Instance centers stay right of this margin; distractors live left of it,
// so a distractor box can never overlap ground truth.
constexpr double kActionMarginX = 90.0;
constexpr double kBystanderOffset = 60.0;

std::string video_name(const std::string& prefix, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "-%04d", index);
    return prefix + buf;
}

std::string track_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%02d", index);
    return std::string(buf);
}

BoundingBox box_around(double cx, double cy) {
    const double h = kBoxSide / 2.0;
    return BoundingBox{cx - h, cy - h, cx + h, cy + h};
}

struct InstanceDraft {
    FrameInterval interval;
    int class_id = 0;
    double cx = 0.0;
    double cy = 0.0;
    int point = 0;                // temporal annotation point
    std::vector<int> keyframes;   // ascending frames inside the interval
};

/// Mean per-frame IoU between a track's boxes over `span` and an instance's
/// ground-truth boxes; frames outside the instance contribute 0.
double mean_iou(const Track& track, FrameInterval span, const InstanceDraft& inst) {
    double sum = 0.0;
    const BoundingBox gt = box_around(inst.cx, inst.cy);
    for (int f = span.begin; f < span.end; ++f) {
        if (inst.interval.contains(f)) sum += spatial_iou(track.box_at(f), gt);
    }
    return sum / static_cast<double>(span.length());
}

void check_config(const SynthConfig& c) {
    const auto fail = [](const std::string& what) {
        throw DataError("inconsistent synth config: " + what);
    };
    if (c.num_videos < 1 || c.num_action_classes < 1 || c.feature_dim < 1 ||
        c.tracks_per_video < 1 || c.frames_per_video < 1 || c.instances_per_video < 1 ||
        c.keyframes_per_instance < 1) {
        fail("all counts must be at least 1");
    }
    if (c.class_separation < 0.0 || c.feature_noise < 0.0) fail("separation and noise must be >= 0");
    if (c.feature_dim < c.num_action_classes + 1) {
        fail("feature_dim must be at least num_action_classes + 1 to place the class centers");
    }
    if (c.box_jitter < 0.0 || c.box_jitter > 12.0) {
        fail("box_jitter must lie in [0, 12] to keep track/ground-truth IoU above the 0.3 gate");
    }
    if (c.distractor_fraction < 0.0 || c.distractor_fraction > 1.0) {
        fail("distractor_fraction must lie in [0, 1]");
    }
    if (c.tracks_per_video > 99) fail("at most 99 tracks per video");
    const int units = c.frames_per_video / kTimeUnitFrames;
    if (units / c.instances_per_video < 6) {
        fail("videos too short: need at least 6 time units per instance");
    }
    if (c.keyframes_per_instance > 4 * kTimeUnitFrames) {
        fail("keyframes_per_instance exceeds the minimum instance length");
    }
}

}  // namespace

Eigen::MatrixXd class_centers(int num_action_classes, int feature_dim, double separation) {
    // Orthogonal axis placement scaled by 1.5: pairwise center distance is
    // 1.5 * sqrt(2) * separation, above the guaranteed minimum, and the
    // one-vs-rest margin along each axis is 1.5 * separation. The extra
    // headroom keeps supervised scores clear of the per-tracklet noise floor
    // at the benchmark's separation-to-noise ratio.
    Eigen::MatrixXd centers =
        Eigen::MatrixXd::Zero(num_action_classes + 1, feature_dim);
    for (int k = 0; k <= num_action_classes; ++k) centers(k, k) = 1.5 * separation;
    return centers;
}

SynthResult generate(const SynthConfig& config) {
    check_config(config);

    const int unit = kTimeUnitFrames;
    const int K = config.num_action_classes;
    const int num_distractors = static_cast<int>(
        config.distractor_fraction * static_cast<double>(config.tracks_per_video - 1));

    std::vector<VideoRecord> videos;
    std::vector<Track> tracks;
    std::vector<ActionInstance> instances;
    std::map<std::string, std::vector<AnnotationRecord>> annotations;
    std::vector<std::vector<InstanceDraft>> drafts_per_video;

    for (int vi = 0; vi < config.num_videos; ++vi) {
        const std::string video_id = video_name(config.video_prefix, vi);
        auto layout = make_rng(config.seed, video_id + "/layout");
        auto boxes_rng = make_rng(config.seed, video_id + "/boxes");

        const int T = config.frames_per_video;
        const int units = T / unit;
        const int units_per_chunk = units / config.instances_per_video;

        // Instance layout: one instance per equal chunk of the video, with at
        // least one free unit on each side so background tracklets exist.
        std::vector<InstanceDraft> drafts;
        for (int j = 0; j < config.instances_per_video; ++j) {
            const int chunk_begin = j * units_per_chunk;
            const int max_len = std::min(8, units_per_chunk - 2);
            const int len_units =
                4 + static_cast<int>(next_index(layout, static_cast<std::uint64_t>(max_len - 3)));
            const int slack = units_per_chunk - 2 - len_units;
            const int start_unit =
                chunk_begin + 1 +
                static_cast<int>(next_index(layout, static_cast<std::uint64_t>(slack + 1)));

            InstanceDraft d;
            d.interval = FrameInterval{start_unit * unit, (start_unit + len_units) * unit};
            d.class_id = ((vi + j) % K) + 1;
            d.cx = kActionMarginX + next_unit(layout) * (kCanvasW - kBoxSide / 2.0 - 4.0 - kActionMarginX);
            d.cy = kBoxSide / 2.0 + 4.0 +
                   next_unit(layout) * (kCanvasH - kBoxSide - 8.0);
            d.point = d.interval.begin +
                      static_cast<int>(next_index(
                          layout, static_cast<std::uint64_t>(d.interval.length())));

            // Distinct keyframes, uniform among the instance's frames.
            std::vector<int> frames(static_cast<std::size_t>(d.interval.length()));
            std::iota(frames.begin(), frames.end(), d.interval.begin);
            for (int s = 0; s < config.keyframes_per_instance; ++s) {
                const auto pick =
                    s + static_cast<int>(next_index(
                            layout, static_cast<std::uint64_t>(frames.size()) - s));
                std::swap(frames[static_cast<std::size_t>(s)], frames[static_cast<std::size_t>(pick)]);
            }
            d.keyframes.assign(frames.begin(), frames.begin() + config.keyframes_per_instance);
            std::sort(d.keyframes.begin(), d.keyframes.end());
            drafts.push_back(std::move(d));
        }

        // Shots: three unit-aligned pieces with a jittered middle.
        const int b1 = std::clamp(units / 3 + static_cast<int>(next_index(layout, 3)) - 1, 1,
                                  units - 2);
        const int b2 = std::clamp(2 * units / 3 + static_cast<int>(next_index(layout, 3)) - 1,
                                  b1 + 1, units - 1);
        VideoRecord video;
        video.video_id = video_id;
        video.num_frames = T;
        video.shots = {FrameInterval{0, b1 * unit}, FrameInterval{b1 * unit, b2 * unit},
                       FrameInterval{b2 * unit, T}};
        videos.push_back(video);

        // Tracks: track 0 follows the action, the first num_distractors of
        // the rest sit in the distractor strip, the remainder shadow the
        // actor at a fixed non-overlapping offset.
        for (int t = 0; t < config.tracks_per_video; ++t) {
            Track track;
            track.video_id = video_id;
            track.track_id = track_name(t);
            track.detections.reserve(static_cast<std::size_t>(T));
            const bool is_distractor = t >= 1 && t <= num_distractors;
            for (int f = 0; f < T; ++f) {
                // Reference center: the temporally nearest instance.
                double cx = drafts.front().cx;
                double cy = drafts.front().cy;
                int best_dist = std::numeric_limits<int>::max();
                for (const InstanceDraft& d : drafts) {
                    int dist = 0;
                    if (f < d.interval.begin) dist = d.interval.begin - f;
                    else if (f >= d.interval.end) dist = f - (d.interval.end - 1);
                    if (dist < best_dist) {
                        best_dist = dist;
                        cx = d.cx;
                        cy = d.cy;
                    }
                }
                if (is_distractor) {
                    cx = kBoxSide / 2.0;
                    cy = kCanvasH / 2.0;
                } else if (t != 0) {
                    cx += (t % 2 == 0) ? kBystanderOffset : -kBystanderOffset;
                }
                const double jx = (2.0 * next_unit(boxes_rng) - 1.0) * config.box_jitter;
                const double jy = (2.0 * next_unit(boxes_rng) - 1.0) * config.box_jitter;
                track.detections.push_back(Detection{f, box_around(cx + jx, cy + jy), std::nullopt});
            }
            tracks.push_back(std::move(track));
        }

        for (int j = 0; j < config.instances_per_video; ++j) {
            const InstanceDraft& d = drafts[static_cast<std::size_t>(j)];
            ActionInstance inst;
            inst.video_id = video_id;
            inst.instance_id = j;
            inst.class_id = d.class_id;
            inst.interval = d.interval;
            const BoundingBox gt = box_around(d.cx, d.cy);
            for (int frame : d.keyframes) inst.keyframes.push_back(Keyframe{frame, gt});
            inst.boxes.assign(static_cast<std::size_t>(d.interval.length()), gt);
            instances.push_back(std::move(inst));
        }
        drafts_per_video.push_back(std::move(drafts));
    }

    SynthResult result;
    result.dataset = Dataset(std::move(videos), std::move(tracks), std::move(instances), K);
    const Dataset& ds = result.dataset;

    // Annotations are projections of the ground truth above. Built after the
    // dataset so record order follows canonical video order.
    for (int vi = 0; vi < static_cast<int>(ds.videos().size()); ++vi) {
        const VideoRecord& video = ds.videos()[static_cast<std::size_t>(vi)];
        const auto& drafts = drafts_per_video[static_cast<std::size_t>(vi)];

        std::vector<int> present;
        for (const InstanceDraft& d : drafts) present.push_back(d.class_id);
        std::sort(present.begin(), present.end());
        present.erase(std::unique(present.begin(), present.end()), present.end());

        AnnotationRecord vl;
        vl.level = SupervisionTag::VideoLevel;
        vl.video_id = video.video_id;
        vl.classes = present;
        annotations["video-level"].push_back(std::move(vl));

        for (const FrameInterval& shot : video.shots) {
            AnnotationRecord sl;
            sl.level = SupervisionTag::ShotLevel;
            sl.video_id = video.video_id;
            sl.shot = shot;
            std::vector<int> classes;
            for (const InstanceDraft& d : drafts) {
                if (overlaps(d.interval, shot)) classes.push_back(d.class_id);
            }
            std::sort(classes.begin(), classes.end());
            classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
            sl.classes = std::move(classes);
            annotations["shot-level"].push_back(std::move(sl));
        }

        for (int j = 0; j < static_cast<int>(drafts.size()); ++j) {
            const InstanceDraft& d = drafts[static_cast<std::size_t>(j)];
            const BoundingBox gt = box_around(d.cx, d.cy);

            AnnotationRecord base;
            base.video_id = video.video_id;
            base.instance_id = j;
            base.class_id = d.class_id;

            AnnotationRecord tp = base;
            tp.level = SupervisionTag::TemporalPoint;
            tp.point = d.point;
            annotations["temporal-point"].push_back(std::move(tp));

            AnnotationRecord ob = base;
            ob.level = SupervisionTag::OneBB;
            ob.point = d.point;
            ob.box = gt;
            annotations["one-bb"].push_back(std::move(ob));

            AnnotationRecord tm = base;
            tm.level = SupervisionTag::Temporal;
            tm.interval = d.interval;
            annotations["temporal"].push_back(std::move(tm));

            for (int k = 1; k <= config.keyframes_per_instance; ++k) {
                AnnotationRecord kb = base;
                kb.level = SupervisionTag::TemporalKBB;
                kb.interval = d.interval;
                for (int s = 0; s < k; ++s) {
                    kb.keyframes.push_back(Keyframe{d.keyframes[static_cast<std::size_t>(s)], gt});
                }
                annotations["temporal-" + std::to_string(k) + "bb"].push_back(std::move(kb));
            }

            AnnotationRecord sp = base;
            sp.level = SupervisionTag::SpatialPoints;
            sp.interval = d.interval;
            for (int f = d.interval.begin; f < d.interval.end; ++f) {
                sp.points.push_back(SpatialPoint{f, d.cx, d.cy});
            }
            annotations["spatial-points"].push_back(std::move(sp));

            AnnotationRecord fl = base;
            fl.level = SupervisionTag::Full;
            fl.interval = d.interval;
            fl.boxes.assign(static_cast<std::size_t>(d.interval.length()), gt);
            annotations["full"].push_back(std::move(fl));
        }
    }
    result.annotations = std::move(annotations);

    // Features: center of the geometric label plus isotropic noise, drawn in
    // row order from a per-video stream.
    const Eigen::MatrixXd centers =
        class_centers(K, config.feature_dim, config.class_separation);
    result.features.resize(ds.num_rows(), config.feature_dim);
    for (int vi = 0; vi < static_cast<int>(ds.videos().size()); ++vi) {
        const VideoRecord& video = ds.videos()[static_cast<std::size_t>(vi)];
        const auto& drafts = drafts_per_video[static_cast<std::size_t>(vi)];
        auto noise = make_rng(config.seed, video.video_id + "/features");
        const auto [row_begin, row_end] = ds.video_rows(vi);
        for (std::int64_t r = row_begin; r < row_end; ++r) {
            const Tracklet& t = ds.tracklets()[static_cast<std::size_t>(r)];
            const Track& track = ds.tracklet_track(t);
            int label = 0;
            double best = 0.3;  // same gate the constraint builders use
            for (const InstanceDraft& d : drafts) {
                const double iou = mean_iou(track, t.span, d);
                if (iou > best) {
                    best = iou;
                    label = d.class_id;
                }
            }
            for (int c = 0; c < config.feature_dim; ++c) {
                result.features(r, c) =
                    centers(label, c) + config.feature_noise * next_normal(noise);
            }
        }
    }
    return result;
}

}  // namespace weakloc
