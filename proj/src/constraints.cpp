#include "weakloc/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>

#include "weakloc/common.hpp"

namespace weakloc {

namespace {

std::string row_class_str(std::int64_t row, int cls) {
    return "(row " + std::to_string(row) + ", class " + std::to_string(cls) + ")";
}

/// Sorted per-video view over one level's annotation records.
struct VideoAnnotations {
    std::vector<const AnnotationRecord*> records;
    std::vector<int> present;  // sorted unique action classes
};

int record_begin(const AnnotationRecord& r) {
    switch (r.level) {
        case SupervisionTag::ShotLevel: return r.shot.begin;
        case SupervisionTag::TemporalPoint:
        case SupervisionTag::OneBB: return r.point;
        default: return r.interval.begin;
    }
}

bool record_before(const AnnotationRecord* a, const AnnotationRecord* b) {
    if (record_begin(*a) != record_begin(*b)) return record_begin(*a) < record_begin(*b);
    if (a->interval.end != b->interval.end) return a->interval.end < b->interval.end;
    if (a->class_id != b->class_id) return a->class_id < b->class_id;
    return a->instance_id < b->instance_id;
}

VideoAnnotations collect(const Dataset& ds, int vi, const SupervisionLevel& level,
                         std::span<const AnnotationRecord> annotations) {
    const VideoRecord& video = ds.video(vi);
    VideoAnnotations out;
    std::set<int> present;
    for (const AnnotationRecord& r : annotations) {
        if (r.video_id != video.video_id) continue;
        if (r.level != level.tag) {
            throw DataError("annotation level " + std::string(tag_name(r.level)) +
                            " does not match requested level " + level.name() + " in video " +
                            video.video_id);
        }
        if (r.level == SupervisionTag::VideoLevel || r.level == SupervisionTag::ShotLevel) {
            for (int c : r.classes) present.insert(c);
        } else {
            present.insert(r.class_id);
        }
        out.records.push_back(&r);
    }
    for (int c : present) {
        if (c < 1 || c > ds.num_action_classes()) {
            throw DataError("class id " + std::to_string(c) + " out of range in video " +
                            video.video_id);
        }
    }
    std::sort(out.records.begin(), out.records.end(), record_before);
    out.present.assign(present.begin(), present.end());
    return out;
}

/// Forbids every absent action class on every row of the video. Background
/// (class 0) is never forbidden.
void add_absent_fixed_zero(VideoConstraintSet& set, const std::vector<int>& present,
                           int num_action_classes) {
    std::vector<bool> is_present(static_cast<std::size_t>(num_action_classes) + 1, false);
    for (int c : present) is_present[static_cast<std::size_t>(c)] = true;
    for (std::int64_t row = set.row_begin; row < set.row_end; ++row) {
        for (int c = 1; c <= num_action_classes; ++c) {
            if (!is_present[static_cast<std::size_t>(c)]) set.fixed_zero.emplace_back(row, c);
        }
    }
}

FrameInterval clipped_window(int point, int window, int num_frames) {
    FrameInterval w{point - window / 2, point - window / 2 + window};
    return intersect(w, FrameInterval{0, num_frames});
}

void add_unit_bags(VideoConstraintSet& set, const Dataset& ds, int vi, FrameInterval range,
                   int unit, int class_id, const std::string& owner) {
    for (FrameInterval u : subdivide_span(range, unit)) {
        Bag bag;
        bag.class_id = class_id;
        bag.rows = ds.rows_overlapping(vi, u);
        if (bag.rows.empty()) {
            throw DataError("empty bag for " + owner + " in video " + ds.video(vi).video_id +
                            " (unit [" + std::to_string(u.begin) + ", " + std::to_string(u.end) +
                            "))");
        }
        set.bags.push_back(std::move(bag));
    }
}

void check_interval(const AnnotationRecord& r, const VideoRecord& video) {
    if (r.interval.empty() || r.interval.begin < 0 || r.interval.end > video.num_frames) {
        throw DataError("instance " + std::to_string(r.instance_id) + " interval [" +
                        std::to_string(r.interval.begin) + ", " + std::to_string(r.interval.end) +
                        ") out of bounds in video " + video.video_id);
    }
}

/// Records one hard assignment; the builders never disagree on a row, so a
/// second differing class means an annotation inconsistency.
void fix_row(std::map<std::int64_t, int>& fixed, std::int64_t row, int cls,
             const std::string& video_id) {
    auto [it, inserted] = fixed.emplace(row, cls);
    if (!inserted && it->second != cls) {
        throw DataError("conflicting hard assignments " + row_class_str(row, it->second) +
                        " vs " + row_class_str(row, cls) + " in video " + video_id);
    }
}

/// Mean spatial IoU between a tracklet and an instance's box sequence over
/// the tracklet's span; frames outside the instance count as IoU 0.
double tracklet_instance_iou(const Track& track, const Tracklet& t, const AnnotationRecord& r) {
    double sum = 0.0;
    for (int f = t.span.begin; f < t.span.end; ++f) {
        if (r.interval.contains(f)) {
            sum += spatial_iou(track.box_at(f),
                               r.boxes[static_cast<std::size_t>(f - r.interval.begin)]);
        }
    }
    return sum / static_cast<double>(t.span.length());
}

/// Candidate ranking shared by the keyframe and box matchers: higher score
/// wins, then the earlier annotation, then the lower instance id.
struct ScoredMatch {
    double score = -std::numeric_limits<double>::infinity();
    const AnnotationRecord* record = nullptr;

    bool beats(const ScoredMatch& other) const {
        if (record == nullptr) return false;
        if (other.record == nullptr) return true;
        if (score != other.score) return score > other.score;
        if (record_begin(*record) != record_begin(*other.record)) {
            return record_begin(*record) < record_begin(*other.record);
        }
        return record->instance_id < other.record->instance_id;
    }
};

bool span_inside(FrameInterval inner, FrameInterval outer) {
    return inner.begin >= outer.begin && inner.end <= outer.end;
}

/// Keyframe gate shared by OneBB and TemporalKBB. `score_of` returns the
/// track/record match score or nullopt when the track does not cover the
/// record's keyframes; `fix_region_of` is where a matched assignment
/// applies (the candidate window for OneBB, the instance interval for KBB).
template <typename ScoreFn, typename RegionFn>
void apply_keyframe_gate(const Dataset& ds, int vi, const VideoAnnotations& ann, double gate,
                         std::map<std::int64_t, int>& fixed, ScoreFn&& score_of,
                         RegionFn&& fix_region_of) {
    const std::string& video_id = ds.video(vi).video_id;
    for (int ti : ds.video_tracks(vi)) {
        const Track& track = ds.tracks()[static_cast<std::size_t>(ti)];
        std::vector<std::pair<double, const AnnotationRecord*>> scored;
        for (const AnnotationRecord* r : ann.records) {
            if (auto s = score_of(track, *r)) scored.emplace_back(*s, r);
        }
        if (scored.empty()) continue;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& [s, r] : scored) best = std::max(best, s);
        auto [rb, re] = ds.video_rows(vi);
        if (best < gate) {
            // The track covers annotated keyframes but never matches any
            // instance: it is someone else, so all its tracklets are
            // background.
            for (std::int64_t row = rb; row < re; ++row) {
                if (ds.tracklets()[static_cast<std::size_t>(row)].track_index == ti) {
                    fix_row(fixed, row, 0, video_id);
                }
            }
            continue;
        }
        for (std::int64_t row = rb; row < re; ++row) {
            const Tracklet& t = ds.tracklets()[static_cast<std::size_t>(row)];
            if (t.track_index != ti) continue;
            ScoredMatch chosen;
            for (const auto& [s, r] : scored) {
                if (s < gate || !span_inside(t.span, fix_region_of(*r))) continue;
                ScoredMatch m{s, r};
                if (m.beats(chosen)) chosen = m;
            }
            if (chosen.record != nullptr) {
                fix_row(fixed, t.row, chosen.record->class_id, video_id);
            }
        }
    }
}

void emit_fixed(VideoConstraintSet& set, const std::map<std::int64_t, int>& fixed) {
    for (const auto& [row, cls] : fixed) set.fixed_one.emplace_back(row, cls);
}

// ---- per-level builders ----

void build_video_level(VideoConstraintSet& set, const Dataset& ds,
                       const VideoAnnotations& ann) {
    std::vector<std::int64_t> all_rows(static_cast<std::size_t>(set.num_rows()));
    std::iota(all_rows.begin(), all_rows.end(), set.row_begin);
    for (int c : ann.present) {
        set.bags.push_back(Bag{c, all_rows});
    }
    add_absent_fixed_zero(set, ann.present, ds.num_action_classes());
}

void build_shot_level(VideoConstraintSet& set, const Dataset& ds, int vi,
                      const VideoAnnotations& ann) {
    const VideoRecord& video = ds.video(vi);
    // Per-row allowed classes: background plus every class of a shot the
    // tracklet overlaps.
    std::vector<std::set<int>> allowed(static_cast<std::size_t>(set.num_rows()));
    for (const AnnotationRecord* r : ann.records) {
        if (r->shot.empty() || r->shot.begin < 0 || r->shot.end > video.num_frames) {
            throw DataError("shot [" + std::to_string(r->shot.begin) + ", " +
                            std::to_string(r->shot.end) + ") out of bounds in video " +
                            video.video_id);
        }
        std::vector<std::int64_t> rows = ds.rows_overlapping(vi, r->shot);
        std::vector<int> classes = r->classes;
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        for (int c : classes) {
            if (rows.empty()) {
                throw DataError("empty bag for shot [" + std::to_string(r->shot.begin) + ", " +
                                std::to_string(r->shot.end) + ") class " + std::to_string(c) +
                                " in video " + video.video_id);
            }
            set.bags.push_back(Bag{c, rows});
        }
        for (std::int64_t row : rows) {
            auto& a = allowed[static_cast<std::size_t>(row - set.row_begin)];
            a.insert(classes.begin(), classes.end());
        }
    }
    for (std::int64_t row = set.row_begin; row < set.row_end; ++row) {
        const auto& a = allowed[static_cast<std::size_t>(row - set.row_begin)];
        for (int c = 1; c <= ds.num_action_classes(); ++c) {
            if (!a.contains(c)) set.fixed_zero.emplace_back(row, c);
        }
    }
}

void build_temporal_point(VideoConstraintSet& set, const Dataset& ds, int vi,
                          const SupervisionLevel& level, const VideoAnnotations& ann) {
    const VideoRecord& video = ds.video(vi);
    for (const AnnotationRecord* r : ann.records) {
        if (r->point < 0 || r->point >= video.num_frames) {
            throw DataError("time point " + std::to_string(r->point) +
                            " out of bounds in video " + video.video_id);
        }
        FrameInterval window = clipped_window(r->point, level.window, video.num_frames);
        add_unit_bags(set, ds, vi, window, level.unit, r->class_id,
                      "instance " + std::to_string(r->instance_id));
    }
    add_absent_fixed_zero(set, ann.present, ds.num_action_classes());
}

void build_one_bb(VideoConstraintSet& set, const Dataset& ds, int vi,
                  const SupervisionLevel& level, const VideoAnnotations& ann) {
    const VideoRecord& video = ds.video(vi);
    build_temporal_point(set, ds, vi, level, ann);
    std::map<std::int64_t, int> fixed;
    apply_keyframe_gate(
        ds, vi, ann, level.iou_gate, fixed,
        [&](const Track& track, const AnnotationRecord& r) -> std::optional<double> {
            if (!track.covers(r.point)) return std::nullopt;
            return spatial_iou(track.box_at(r.point), r.box);
        },
        [&](const AnnotationRecord& r) {
            return clipped_window(r.point, level.window, video.num_frames);
        });
    emit_fixed(set, fixed);
}

void build_temporal(VideoConstraintSet& set, const Dataset& ds, int vi,
                    const SupervisionLevel& level, const VideoAnnotations& ann,
                    std::map<std::int64_t, int>& fixed) {
    const VideoRecord& video = ds.video(vi);
    for (const AnnotationRecord* r : ann.records) check_interval(*r, video);
    for (std::int64_t row = set.row_begin; row < set.row_end; ++row) {
        const Tracklet& t = ds.tracklets()[static_cast<std::size_t>(row)];
        bool outside_all = true;
        for (const AnnotationRecord* r : ann.records) {
            if (overlaps(t.span, r->interval)) {
                outside_all = false;
                break;
            }
        }
        if (outside_all) fix_row(fixed, t.row, 0, video.video_id);
    }
    for (const AnnotationRecord* r : ann.records) {
        add_unit_bags(set, ds, vi, r->interval, level.unit, r->class_id,
                      "instance " + std::to_string(r->instance_id));
    }
    add_absent_fixed_zero(set, ann.present, ds.num_action_classes());
}

void build_temporal_kbb(VideoConstraintSet& set, const Dataset& ds, int vi,
                        const SupervisionLevel& level, const VideoAnnotations& ann) {
    std::map<std::int64_t, int> fixed;
    build_temporal(set, ds, vi, level, ann, fixed);
    for (const AnnotationRecord* r : ann.records) {
        if (r->keyframes.empty()) {
            throw DataError("instance " + std::to_string(r->instance_id) + " in video " +
                            ds.video(vi).video_id + " has no keyframes");
        }
    }
    apply_keyframe_gate(
        ds, vi, ann, level.iou_gate, fixed,
        [&](const Track& track, const AnnotationRecord& r) -> std::optional<double> {
            double score = std::numeric_limits<double>::infinity();
            for (const Keyframe& kf : r.keyframes) {
                if (!track.covers(kf.frame)) return std::nullopt;
                score = std::min(score, spatial_iou(track.box_at(kf.frame), kf.box));
            }
            return score;
        },
        [&](const AnnotationRecord& r) { return r.interval; });
    emit_fixed(set, fixed);
}

void build_full(VideoConstraintSet& set, const Dataset& ds, int vi,
                const VideoAnnotations& ann, double gate) {
    const VideoRecord& video = ds.video(vi);
    for (const AnnotationRecord* r : ann.records) {
        check_interval(*r, video);
        if (static_cast<int>(r->boxes.size()) != r->interval.length()) {
            throw DataError("instance " + std::to_string(r->instance_id) + " in video " +
                            video.video_id + " needs one box per frame of its interval");
        }
    }
    for (std::int64_t row = set.row_begin; row < set.row_end; ++row) {
        const Tracklet& t = ds.tracklets()[static_cast<std::size_t>(row)];
        const Track& track = ds.tracklet_track(t);
        ScoredMatch chosen;
        for (const AnnotationRecord* r : ann.records) {
            ScoredMatch m{tracklet_instance_iou(track, t, *r), r};
            if (m.beats(chosen)) chosen = m;
        }
        int cls = (chosen.record != nullptr && chosen.score >= gate) ? chosen.record->class_id : 0;
        set.fixed_one.emplace_back(t.row, cls);
    }
}

void build_spatial_points(VideoConstraintSet& set, const Dataset& ds, int vi,
                          const VideoAnnotations& ann) {
    const VideoRecord& video = ds.video(vi);
    for (const AnnotationRecord* r : ann.records) {
        check_interval(*r, video);
        if (r->points.empty()) {
            throw DataError("instance " + std::to_string(r->instance_id) + " in video " +
                            video.video_id + " has no spatial points");
        }
        for (const SpatialPoint& p : r->points) {
            if (!r->interval.contains(p.frame)) {
                throw DataError("spatial point at frame " + std::to_string(p.frame) +
                                " outside instance " + std::to_string(r->instance_id) +
                                " in video " + video.video_id);
            }
        }
    }
    for (std::int64_t row = set.row_begin; row < set.row_end; ++row) {
        const Tracklet& t = ds.tracklets()[static_cast<std::size_t>(row)];
        const Track& track = ds.tracklet_track(t);
        ScoredMatch chosen;  // score is negated distance so beats() still ranks
        for (const AnnotationRecord* r : ann.records) {
            double sum = 0.0;
            int hits = 0;
            bool all_inside = true;
            for (const SpatialPoint& p : r->points) {
                if (!t.span.contains(p.frame)) continue;
                const BoundingBox& box = track.box_at(p.frame);
                if (!box.contains(p.x, p.y)) {
                    all_inside = false;
                    break;
                }
                sum += std::hypot(p.x - box.center_x(), p.y - box.center_y());
                ++hits;
            }
            if (!all_inside || hits == 0) continue;
            ScoredMatch m{-sum / hits, r};
            if (m.beats(chosen)) chosen = m;
        }
        set.fixed_one.emplace_back(t.row, chosen.record != nullptr ? chosen.record->class_id : 0);
    }
}

VideoConstraintSet build_for_video(const Dataset& ds, int vi, const SupervisionLevel& level,
                                   std::span<const AnnotationRecord> annotations) {
    VideoConstraintSet set;
    set.video_id = ds.video(vi).video_id;
    set.level_name = level.name();
    auto [rb, re] = ds.video_rows(vi);
    set.row_begin = rb;
    set.row_end = re;
    VideoAnnotations ann = collect(ds, vi, level, annotations);
    switch (level.tag) {
        case SupervisionTag::VideoLevel:
            build_video_level(set, ds, ann);
            break;
        case SupervisionTag::ShotLevel:
            build_shot_level(set, ds, vi, ann);
            break;
        case SupervisionTag::TemporalPoint:
            build_temporal_point(set, ds, vi, level, ann);
            break;
        case SupervisionTag::OneBB:
            build_one_bb(set, ds, vi, level, ann);
            break;
        case SupervisionTag::Temporal: {
            std::map<std::int64_t, int> fixed;
            build_temporal(set, ds, vi, level, ann, fixed);
            emit_fixed(set, fixed);
            break;
        }
        case SupervisionTag::TemporalKBB:
            build_temporal_kbb(set, ds, vi, level, ann);
            break;
        case SupervisionTag::SpatialPoints:
            build_spatial_points(set, ds, vi, ann);
            break;
        case SupervisionTag::Full:
            build_full(set, ds, vi, ann, level.iou_gate);
            break;
    }
    std::sort(set.fixed_one.begin(), set.fixed_one.end());
    std::sort(set.fixed_zero.begin(), set.fixed_zero.end());
    return set;
}

}  // namespace

std::vector<VideoConstraintSet> build_constraints(const Dataset& dataset,
                                                  const SupervisionLevel& level,
                                                  std::span<const AnnotationRecord> annotations) {
    for (const AnnotationRecord& r : annotations) {
        dataset.video_index(r.video_id);  // throws on unknown video
    }
    std::vector<VideoConstraintSet> sets;
    sets.reserve(dataset.videos().size());
    for (int vi = 0; vi < static_cast<int>(dataset.videos().size()); ++vi) {
        sets.push_back(build_for_video(dataset, vi, level, annotations));
    }
    return sets;
}

std::vector<VideoConstraintSet> mix_levels(
    const Dataset& dataset,
    const std::unordered_map<std::string, SupervisionLevel>& level_by_video,
    const std::unordered_map<std::string, std::vector<AnnotationRecord>>& annotations_by_level) {
    std::vector<VideoConstraintSet> sets;
    sets.reserve(dataset.videos().size());
    for (int vi = 0; vi < static_cast<int>(dataset.videos().size()); ++vi) {
        const std::string& video_id = dataset.video(vi).video_id;
        auto lvl = level_by_video.find(video_id);
        if (lvl == level_by_video.end()) {
            throw DataError("no supervision level mapped for video " + video_id);
        }
        auto ann = annotations_by_level.find(lvl->second.name());
        if (ann == annotations_by_level.end()) {
            throw DataError("no annotations available for level " + lvl->second.name() +
                            " (video " + video_id + ")");
        }
        std::vector<AnnotationRecord> mine;
        for (const AnnotationRecord& r : ann->second) {
            if (r.video_id == video_id) mine.push_back(r);
        }
        sets.push_back(build_for_video(dataset, vi, lvl->second, mine));
    }
    return sets;
}

std::vector<std::string> validate(const VideoConstraintSet& set, int num_label_columns) {
    std::vector<std::string> out;
    auto in_video = [&](std::int64_t row) { return row >= set.row_begin && row < set.row_end; };
    auto class_ok = [&](int c) { return c >= 0 && c < num_label_columns; };

    std::set<std::pair<std::int64_t, int>> ones(set.fixed_one.begin(), set.fixed_one.end());
    std::set<std::int64_t> one_rows;
    for (const auto& [row, cls] : set.fixed_one) {
        if (!in_video(row)) out.push_back("fixed_one row out of video: " + row_class_str(row, cls));
        if (!class_ok(cls)) out.push_back("fixed_one class out of range: " + row_class_str(row, cls));
        if (!one_rows.insert(row).second) {
            out.push_back("row " + std::to_string(row) + " has multiple fixed_one entries");
        }
    }
    std::map<std::int64_t, int> zero_count;
    for (const auto& [row, cls] : set.fixed_zero) {
        if (!in_video(row)) out.push_back("fixed_zero row out of video: " + row_class_str(row, cls));
        if (!class_ok(cls)) out.push_back("fixed_zero class out of range: " + row_class_str(row, cls));
        if (cls == 0) out.push_back("fixed_zero forbids background at row " + std::to_string(row));
        if (ones.contains({row, cls})) {
            out.push_back("fixed_one and fixed_zero overlap at " + row_class_str(row, cls));
        }
        ++zero_count[row];
    }
    for (const auto& [row, count] : zero_count) {
        if (count >= num_label_columns) {
            out.push_back("fixed_zero covers every class at row " + std::to_string(row));
        }
    }
    std::set<std::pair<std::int64_t, int>> zeros(set.fixed_zero.begin(), set.fixed_zero.end());
    std::map<std::int64_t, int> pinned(set.fixed_one.begin(), set.fixed_one.end());
    for (std::size_t bi = 0; bi < set.bags.size(); ++bi) {
        const Bag& bag = set.bags[bi];
        std::string tag = "bag " + std::to_string(bi) + " (class " +
                          std::to_string(bag.class_id) + ")";
        if (bag.class_id <= 0 || bag.class_id >= num_label_columns) {
            out.push_back(tag + " has invalid class");
            continue;
        }
        if (bag.rows.empty()) {
            out.push_back(tag + " is empty");
            continue;
        }
        bool satisfiable = false;
        for (std::int64_t row : bag.rows) {
            if (!in_video(row)) {
                out.push_back(tag + " references foreign row " + std::to_string(row));
                continue;
            }
            auto it = pinned.find(row);
            bool blocked = (it != pinned.end() && it->second != bag.class_id) ||
                           zeros.contains({row, bag.class_id});
            if (!blocked) satisfiable = true;
        }
        if (!satisfiable) out.push_back(tag + " is unsatisfiable");
    }
    return out;
}

bool is_feasible_integer(const VideoConstraintSet& set, std::span<const int> classes) {
    if (static_cast<std::int64_t>(classes.size()) != set.num_rows()) {
        throw DataError("assignment length does not match video row count");
    }
    auto cls_at = [&](std::int64_t row) {
        return classes[static_cast<std::size_t>(row - set.row_begin)];
    };
    for (const auto& [row, cls] : set.fixed_one) {
        if (cls_at(row) != cls) return false;
    }
    for (const auto& [row, cls] : set.fixed_zero) {
        if (cls_at(row) == cls) return false;
    }
    for (const Bag& bag : set.bags) {
        bool hit = false;
        for (std::int64_t row : bag.rows) {
            if (cls_at(row) == bag.class_id) {
                hit = true;
                break;
            }
        }
        if (!hit) return false;
    }
    return true;
}

bool is_feasible_integer(const VideoConstraintSet& set, const Eigen::MatrixXd& Y_video) {
    if (Y_video.rows() != set.num_rows()) {
        throw DataError("assignment matrix row count does not match video");
    }
    std::vector<int> classes(static_cast<std::size_t>(Y_video.rows()));
    for (Eigen::Index i = 0; i < Y_video.rows(); ++i) {
        Eigen::Index argmax = 0;
        Y_video.row(i).maxCoeff(&argmax);
        classes[static_cast<std::size_t>(i)] = static_cast<int>(argmax);
    }
    return is_feasible_integer(set, classes);
}

}  // namespace weakloc
