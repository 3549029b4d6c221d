#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "weakloc/geometry.hpp"

namespace weakloc {

/// Time unit used to cut tracks into tracklets and intervals into bag bins.
inline constexpr int kTimeUnitFrames = 8;

/// One person box at one frame of a track.
struct Detection {
    int frame = 0;
    BoundingBox box;
    std::optional<std::int64_t> descriptor_index;
};

/// A person track: boxes on consecutive frames within one video.
struct Track {
    std::string video_id;
    std::string track_id;
    std::vector<Detection> detections;  // frames strictly increasing by 1

    int length() const { return static_cast<int>(detections.size()); }
    int start_frame() const { return detections.front().frame; }
    FrameInterval span() const {
        return FrameInterval{start_frame(), start_frame() + length()};
    }
    bool covers(int frame) const { return span().contains(frame); }
    const BoundingBox& box_at(int frame) const {
        return detections[static_cast<std::size_t>(frame - start_frame())].box;
    }
    /// Copies out the boxes of the sub-span (boxes live interleaved with
    /// frame numbers inside detections, so a view cannot alias them).
    BoxedSegment segment(FrameInterval sub) const;
};

/// An elementary segment of a track (at most kTimeUnitFrames frames); the
/// atomic unit receiving a label. `row` is the global row index in [0, M).
struct Tracklet {
    std::int64_t row = -1;
    int track_index = -1;     // into Dataset::tracks
    int tracklet_index = 0;   // ordinal within its track
    FrameInterval span;
};

struct Keyframe {
    int frame = 0;
    BoundingBox box;
};

/// One ground-truth action occurrence: class, temporal extent, sparse
/// keyframe boxes and (when available) the full per-frame box sequence.
struct ActionInstance {
    std::string video_id;
    int instance_id = 0;  // ordinal within its video
    int class_id = 0;     // in [1, K_actions]; 0 is reserved for background
    FrameInterval interval;
    std::vector<Keyframe> keyframes;
    std::vector<BoundingBox> boxes;  // aligned at interval.begin; empty = absent

    bool has_full_boxes() const { return !boxes.empty(); }
    BoxedSegmentView segment_view() const {
        return BoxedSegmentView{interval, boxes};
    }
};

struct VideoRecord {
    std::string video_id;
    int num_frames = 0;
    std::vector<FrameInterval> shots;  // optional, ingested as input
};

/// Cuts [0..len) style track frames into consecutive spans of `unit` frames;
/// a trailing remainder of length >= 1 becomes a final shorter span.
std::vector<FrameInterval> subdivide_span(FrameInterval span, int unit = kTimeUnitFrames);

/// Subdivides a track into tracklets. Row and track indices are left
/// unassigned (-1); Dataset assembly fills them in.
std::vector<Tracklet> subdivide_track(const Track& track, int unit = kTimeUnitFrames);

/// Keyframe ST-IoU: temporal IoU times the mean spatial IoU at the
/// instance's annotated frames; keyframes outside the candidate span
/// contribute spatial IoU 0. The instance must carry at least one keyframe.
double st_iou_keyframe(const BoxedSegmentView& candidate, const ActionInstance& instance);

/// The full data model: videos, tracks, derived tracklets and ground truth.
/// Canonical ordering (videos by id, tracks by id within video, instances by
/// interval within video) makes row numbering reproducible.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<VideoRecord> videos, std::vector<Track> tracks,
            std::vector<ActionInstance> instances, int num_action_classes);

    const std::vector<VideoRecord>& videos() const { return videos_; }
    const std::vector<Track>& tracks() const { return tracks_; }
    const std::vector<Tracklet>& tracklets() const { return tracklets_; }
    const std::vector<ActionInstance>& instances() const { return instances_; }

    int num_action_classes() const { return num_action_classes_; }
    /// Label columns: K_actions + 1, column 0 being the background class.
    int num_label_columns() const { return num_action_classes_ + 1; }
    std::int64_t num_rows() const { return static_cast<std::int64_t>(tracklets_.size()); }

    int video_index(const std::string& video_id) const;
    const VideoRecord& video(int index) const { return videos_[static_cast<std::size_t>(index)]; }

    /// Global row range [begin, end) of one video's tracklets (contiguous).
    std::pair<std::int64_t, std::int64_t> video_rows(int video_index) const;
    const std::vector<int>& video_tracks(int video_index) const;
    const std::vector<int>& video_instances(int video_index) const;

    const Track& tracklet_track(const Tracklet& t) const {
        return tracks_[static_cast<std::size_t>(t.track_index)];
    }
    /// Boxes of a tracklet, taken from its parent track.
    BoxedSegment tracklet_segment(const Tracklet& t) const {
        return tracklet_track(t).segment(t.span);
    }

    /// Rows of the video's tracklets whose span overlaps `interval`,
    /// ascending.
    std::vector<std::int64_t> rows_overlapping(int video_index, FrameInterval interval) const;

    /// New dataset containing videos [first, first+count) of this one, same
    /// canonical order. Returned row r maps to this dataset's row
    /// `video_rows(first).first + r`.
    Dataset subset(int first, int count) const;

private:
    void build_index();

    std::vector<VideoRecord> videos_;
    std::vector<Track> tracks_;
    std::vector<Tracklet> tracklets_;
    std::vector<ActionInstance> instances_;
    int num_action_classes_ = 0;

    std::unordered_map<std::string, int> video_by_id_;
    std::vector<std::vector<int>> tracks_by_video_;
    std::vector<std::vector<int>> instances_by_video_;
    std::vector<std::pair<std::int64_t, std::int64_t>> rows_by_video_;
};

}  // namespace weakloc
