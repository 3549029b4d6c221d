#pragma once

#include <string>
#include <vector>

#include "weakloc/geometry.hpp"

namespace weakloc {

/// A scored, temporally trimmed subtrack: the unit of evaluation.
struct DetectionRecord {
    std::string video_id;
    int class_id = 0;
    FrameInterval interval;
    std::vector<BoundingBox> boxes;  // one per frame of the interval
    double score = 0.0;

    BoxedSegmentView segment_view() const {
        return BoxedSegmentView{interval, boxes};
    }
};

}  // namespace weakloc
