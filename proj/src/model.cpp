#include "weakloc/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "weakloc/common.hpp"

namespace weakloc {

BoxedSegment Track::segment(FrameInterval sub) const {
    const std::size_t offset = static_cast<std::size_t>(sub.begin - start_frame());
    BoxedSegment seg;
    seg.span = sub;
    seg.boxes.resize(static_cast<std::size_t>(sub.length()));
    for (int i = 0; i < sub.length(); ++i)
        seg.boxes[static_cast<std::size_t>(i)] = detections[offset + static_cast<std::size_t>(i)].box;
    return seg;
}

std::vector<FrameInterval> subdivide_span(FrameInterval span, int unit) {
    if (unit < 1) throw std::invalid_argument("subdivide_span: unit must be >= 1");
    std::vector<FrameInterval> out;
    for (int b = span.begin; b < span.end; b += unit)
        out.push_back(FrameInterval{b, std::min(b + unit, span.end)});
    return out;
}

std::vector<Tracklet> subdivide_track(const Track& track, int unit) {
    std::vector<Tracklet> out;
    int ordinal = 0;
    for (FrameInterval s : subdivide_span(track.span(), unit)) {
        Tracklet t;
        t.tracklet_index = ordinal++;
        t.span = s;
        out.push_back(t);
    }
    return out;
}

double st_iou_keyframe(const BoxedSegmentView& candidate, const ActionInstance& instance) {
    if (instance.keyframes.empty())
        throw DataError("st_iou_keyframe: instance " + instance.video_id + "/" +
                        std::to_string(instance.instance_id) + " has no keyframes");
    const double tiou = temporal_iou(candidate.span, instance.interval);
    if (tiou == 0.0) return 0.0;
    double sum = 0.0;
    for (const Keyframe& kf : instance.keyframes) {
        if (candidate.span.contains(kf.frame))
            sum += spatial_iou(candidate.box_at(kf.frame), kf.box);
    }
    return tiou * sum / static_cast<double>(instance.keyframes.size());
}

Dataset::Dataset(std::vector<VideoRecord> videos, std::vector<Track> tracks,
                 std::vector<ActionInstance> instances, int num_action_classes)
    : videos_(std::move(videos)),
      tracks_(std::move(tracks)),
      instances_(std::move(instances)),
      num_action_classes_(num_action_classes) {
    if (videos_.empty()) throw DataError("dataset: no video records");
    if (num_action_classes_ < 1) throw DataError("dataset: action class count must be >= 1");
    build_index();
}

void Dataset::build_index() {
    std::sort(videos_.begin(), videos_.end(),
              [](const VideoRecord& a, const VideoRecord& b) { return a.video_id < b.video_id; });
    video_by_id_.clear();
    for (std::size_t i = 0; i < videos_.size(); ++i) {
        const VideoRecord& v = videos_[i];
        if (v.num_frames < 1)
            throw DataError("dataset: video " + v.video_id + " has no frames");
        if (!video_by_id_.emplace(v.video_id, static_cast<int>(i)).second)
            throw DataError("dataset: duplicate video id " + v.video_id);
    }

    for (const Track& t : tracks_) {
        if (!video_by_id_.count(t.video_id))
            throw DataError("dataset: track " + t.track_id + " references unknown video " + t.video_id);
        if (t.detections.empty())
            throw DataError("dataset: track " + t.track_id + " is empty");
        for (std::size_t i = 1; i < t.detections.size(); ++i) {
            if (t.detections[i].frame != t.detections[i - 1].frame + 1)
                throw DataError("dataset: track " + t.track_id + " in " + t.video_id +
                                " has non-consecutive frames");
        }
        const int nf = videos_[static_cast<std::size_t>(video_by_id_.at(t.video_id))].num_frames;
        if (t.start_frame() < 0 || t.span().end > nf)
            throw DataError("dataset: track " + t.track_id + " exceeds video " + t.video_id);
    }
    std::sort(tracks_.begin(), tracks_.end(), [this](const Track& a, const Track& b) {
        const int va = video_by_id_.at(a.video_id);
        const int vb = video_by_id_.at(b.video_id);
        if (va != vb) return va < vb;
        return a.track_id < b.track_id;
    });

    for (const ActionInstance& inst : instances_) {
        if (!video_by_id_.count(inst.video_id))
            throw DataError("dataset: instance references unknown video " + inst.video_id);
        if (inst.class_id < 1 || inst.class_id > num_action_classes_)
            throw DataError("dataset: instance class out of range in " + inst.video_id);
        if (inst.interval.empty())
            throw DataError("dataset: empty instance interval in " + inst.video_id);
        const int nf = videos_[static_cast<std::size_t>(video_by_id_.at(inst.video_id))].num_frames;
        if (inst.interval.begin < 0 || inst.interval.end > nf)
            throw DataError("dataset: instance interval exceeds video " + inst.video_id);
        for (const Keyframe& kf : inst.keyframes) {
            if (!inst.interval.contains(kf.frame))
                throw DataError("dataset: keyframe outside instance interval in " + inst.video_id);
        }
        if (inst.has_full_boxes() &&
            inst.boxes.size() != static_cast<std::size_t>(inst.interval.length()))
            throw DataError("dataset: instance box sequence length mismatch in " + inst.video_id);
    }
    std::sort(instances_.begin(), instances_.end(),
              [this](const ActionInstance& a, const ActionInstance& b) {
                  const int va = video_by_id_.at(a.video_id);
                  const int vb = video_by_id_.at(b.video_id);
                  if (va != vb) return va < vb;
                  if (a.interval.begin != b.interval.begin) return a.interval.begin < b.interval.begin;
                  if (a.interval.end != b.interval.end) return a.interval.end < b.interval.end;
                  if (a.class_id != b.class_id) return a.class_id < b.class_id;
                  return a.instance_id < b.instance_id;
              });

    tracks_by_video_.assign(videos_.size(), {});
    instances_by_video_.assign(videos_.size(), {});
    rows_by_video_.assign(videos_.size(), {0, 0});
    tracklets_.clear();

    for (std::size_t ti = 0; ti < tracks_.size(); ++ti)
        tracks_by_video_[static_cast<std::size_t>(video_by_id_.at(tracks_[ti].video_id))]
            .push_back(static_cast<int>(ti));
    for (std::size_t ii = 0; ii < instances_.size(); ++ii) {
        auto& list = instances_by_video_[static_cast<std::size_t>(
            video_by_id_.at(instances_[ii].video_id))];
        // Re-number instance ids canonically within each video.
        instances_[ii].instance_id = static_cast<int>(list.size());
        list.push_back(static_cast<int>(ii));
    }

    // Rows are assigned per video in canonical order, so each video (and each
    // track) owns a contiguous row range.
    std::int64_t row = 0;
    for (std::size_t vi = 0; vi < videos_.size(); ++vi) {
        rows_by_video_[vi].first = row;
        for (int ti : tracks_by_video_[vi]) {
            for (Tracklet t : subdivide_track(tracks_[static_cast<std::size_t>(ti)])) {
                t.row = row++;
                t.track_index = ti;
                tracklets_.push_back(t);
            }
        }
        rows_by_video_[vi].second = row;
    }
}

int Dataset::video_index(const std::string& video_id) const {
    auto it = video_by_id_.find(video_id);
    if (it == video_by_id_.end()) throw DataError("dataset: unknown video id " + video_id);
    return it->second;
}

std::pair<std::int64_t, std::int64_t> Dataset::video_rows(int video_index) const {
    return rows_by_video_[static_cast<std::size_t>(video_index)];
}

const std::vector<int>& Dataset::video_tracks(int video_index) const {
    return tracks_by_video_[static_cast<std::size_t>(video_index)];
}

const std::vector<int>& Dataset::video_instances(int video_index) const {
    return instances_by_video_[static_cast<std::size_t>(video_index)];
}

std::vector<std::int64_t> Dataset::rows_overlapping(int video_index, FrameInterval interval) const {
    std::vector<std::int64_t> rows;
    const auto [rb, re] = rows_by_video_[static_cast<std::size_t>(video_index)];
    for (std::int64_t r = rb; r < re; ++r) {
        if (overlaps(tracklets_[static_cast<std::size_t>(r)].span, interval)) rows.push_back(r);
    }
    return rows;
}

Dataset Dataset::subset(int first, int count) const {
    if (first < 0 || count < 1 || first + count > static_cast<int>(videos_.size()))
        throw std::invalid_argument("dataset subset: bad video range");
    std::vector<VideoRecord> vids(videos_.begin() + first, videos_.begin() + first + count);
    std::vector<Track> trks;
    std::vector<ActionInstance> insts;
    for (int vi = first; vi < first + count; ++vi) {
        for (int ti : tracks_by_video_[static_cast<std::size_t>(vi)])
            trks.push_back(tracks_[static_cast<std::size_t>(ti)]);
        for (int ii : instances_by_video_[static_cast<std::size_t>(vi)])
            insts.push_back(instances_[static_cast<std::size_t>(ii)]);
    }
    return Dataset(std::move(vids), std::move(trks), std::move(insts), num_action_classes_);
}

}  // namespace weakloc
