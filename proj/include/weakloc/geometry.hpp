#pragma once

#include <span>
#include <vector>

namespace weakloc {

/// Axis-aligned box in pixel coordinates, corners (x1,y1) top-left and
/// (x2,y2) bottom-right with x1 <= x2 and y1 <= y2.
struct BoundingBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }
    bool valid() const { return x1 <= x2 && y1 <= y2; }
    bool contains(double px, double py) const {
        return px >= x1 && px <= x2 && py >= y1 && py <= y2;
    }

    bool operator==(const BoundingBox&) const = default;
};

/// Half-open frame interval [begin, end).
struct FrameInterval {
    int begin = 0;
    int end = 0;

    int length() const { return end - begin; }
    bool empty() const { return end <= begin; }
    bool contains(int frame) const { return frame >= begin && frame < end; }

    bool operator==(const FrameInterval&) const = default;
};

inline FrameInterval intersect(FrameInterval a, FrameInterval b) {
    FrameInterval r{a.begin > b.begin ? a.begin : b.begin,
                    a.end < b.end ? a.end : b.end};
    if (r.end < r.begin) r.end = r.begin;
    return r;
}

inline bool overlaps(FrameInterval a, FrameInterval b) {
    return !intersect(a, b).empty();
}

/// Intersection over union of two boxes; 0 when the union has zero area.
double spatial_iou(const BoundingBox& a, const BoundingBox& b);

/// Intersection over union of two half-open frame intervals.
double temporal_iou(FrameInterval a, FrameInterval b);

/// Scales width and height by `factor` about the box center. factor > 0.
BoundingBox scale_box(const BoundingBox& b, double factor);

/// A temporally contiguous run of per-frame boxes; boxes[f - span.begin]
/// is the box at frame f. boxes.size() == span.length().
struct BoxedSegmentView {
    FrameInterval span;
    std::span<const BoundingBox> boxes;

    const BoundingBox& box_at(int frame) const {
        return boxes[static_cast<std::size_t>(frame - span.begin)];
    }
};

/// Owning variant of BoxedSegmentView.
struct BoxedSegment {
    FrameInterval span;
    std::vector<BoundingBox> boxes;

    BoxedSegmentView view() const { return BoxedSegmentView{span, boxes}; }
};

/// Spatio-temporal IoU: temporal IoU times the mean spatial IoU over frames
/// where both segments are present. 0 when temporally disjoint.
double st_iou(const BoxedSegmentView& a, const BoxedSegmentView& b);

}  // namespace weakloc
