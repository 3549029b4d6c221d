#include "weakloc/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace weakloc {

double spatial_iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix1 = std::max(a.x1, b.x1);
    const double iy1 = std::max(a.y1, b.y1);
    const double ix2 = std::min(a.x2, b.x2);
    const double iy2 = std::min(a.y2, b.y2);
    const double iw = ix2 - ix1;
    const double ih = iy2 - iy1;
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double temporal_iou(FrameInterval a, FrameInterval b) {
    const int inter = intersect(a, b).length();
    const int uni = a.length() + b.length() - inter;
    if (uni <= 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

BoundingBox scale_box(const BoundingBox& b, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("scale_box: factor must be > 0");
    const double cx = b.center_x();
    const double cy = b.center_y();
    const double hw = 0.5 * b.width() * factor;
    const double hh = 0.5 * b.height() * factor;
    return BoundingBox{cx - hw, cy - hh, cx + hw, cy + hh};
}

double st_iou(const BoxedSegmentView& a, const BoxedSegmentView& b) {
    const double tiou = temporal_iou(a.span, b.span);
    if (tiou == 0.0) return 0.0;
    const FrameInterval common = intersect(a.span, b.span);
    double sum = 0.0;
    for (int f = common.begin; f < common.end; ++f)
        sum += spatial_iou(a.box_at(f), b.box_at(f));
    return tiou * sum / static_cast<double>(common.length());
}

}  // namespace weakloc
