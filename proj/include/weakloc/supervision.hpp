#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "weakloc/geometry.hpp"
#include "weakloc/model.hpp"

namespace weakloc {

/// The eight annotation regimes, ordered from weakest to strongest.
enum class SupervisionTag {
    VideoLevel,
    ShotLevel,
    TemporalPoint,
    OneBB,
    Temporal,
    TemporalKBB,
    SpatialPoints,
    Full,
};

/// A supervision level plus its construction parameters. Defaults follow
/// the standard setup: 50-frame candidate windows, 8-frame time units and
/// a 0.3 spatial IoU gate for keyframe matching.
struct SupervisionLevel {
    SupervisionTag tag = SupervisionTag::Full;
    int window = 50;
    int unit = kTimeUnitFrames;
    double iou_gate = 0.3;
    int num_keyframes = 1;  // k for TemporalKBB

    std::string name() const;
    /// Parses "video-level", "shot-level", "temporal-point", "one-bb",
    /// "temporal", "temporal-<k>bb", "spatial-points" or "full".
    static SupervisionLevel parse(std::string_view name);
};

/// Level name without parameters ("temporal-kbb" for any k).
std::string_view tag_name(SupervisionTag tag);

struct SpatialPoint {
    int frame = 0;
    double x = 0.0;
    double y = 0.0;
};

/// One annotation record at a given supervision level; only the fields the
/// level permits are populated.
struct AnnotationRecord {
    SupervisionTag level = SupervisionTag::Full;
    std::string video_id;
    int instance_id = -1;              // -1 for video/shot records
    int class_id = 0;                  // unused for video/shot records
    std::vector<int> classes;          // video-level, shot-level
    FrameInterval shot;                // shot-level
    int point = -1;                    // temporal-point, one-bb
    BoundingBox box;                   // one-bb
    FrameInterval interval;            // temporal, temporal-kbb, spatial-points, full
    std::vector<Keyframe> keyframes;   // temporal-kbb
    std::vector<SpatialPoint> points;  // spatial-points
    std::vector<BoundingBox> boxes;    // full, aligned at interval.begin
};

}  // namespace weakloc
