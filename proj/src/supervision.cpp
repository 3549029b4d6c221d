#include "weakloc/supervision.hpp"

#include <charconv>
#include <string>

#include "weakloc/common.hpp"

namespace weakloc {

std::string_view tag_name(SupervisionTag tag) {
    switch (tag) {
        case SupervisionTag::VideoLevel: return "video-level";
        case SupervisionTag::ShotLevel: return "shot-level";
        case SupervisionTag::TemporalPoint: return "temporal-point";
        case SupervisionTag::OneBB: return "one-bb";
        case SupervisionTag::Temporal: return "temporal";
        case SupervisionTag::TemporalKBB: return "temporal-kbb";
        case SupervisionTag::SpatialPoints: return "spatial-points";
        case SupervisionTag::Full: return "full";
    }
    throw DataError("unknown supervision tag");
}

std::string SupervisionLevel::name() const {
    if (tag == SupervisionTag::TemporalKBB) {
        return "temporal-" + std::to_string(num_keyframes) + "bb";
    }
    return std::string(tag_name(tag));
}

SupervisionLevel SupervisionLevel::parse(std::string_view name) {
    SupervisionLevel level;
    if (name == "video-level") {
        level.tag = SupervisionTag::VideoLevel;
    } else if (name == "shot-level") {
        level.tag = SupervisionTag::ShotLevel;
    } else if (name == "temporal-point") {
        level.tag = SupervisionTag::TemporalPoint;
    } else if (name == "one-bb") {
        level.tag = SupervisionTag::OneBB;
    } else if (name == "temporal") {
        level.tag = SupervisionTag::Temporal;
    } else if (name == "spatial-points") {
        level.tag = SupervisionTag::SpatialPoints;
    } else if (name == "full") {
        level.tag = SupervisionTag::Full;
    } else if (name.starts_with("temporal-") && name.ends_with("bb")) {
        std::string_view digits = name.substr(9, name.size() - 11);
        int k = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        if (ec != std::errc() || ptr != digits.data() + digits.size() || k < 1) {
            throw DataError("invalid supervision level name: " + std::string(name));
        }
        level.tag = SupervisionTag::TemporalKBB;
        level.num_keyframes = k;
    } else {
        throw DataError("invalid supervision level name: " + std::string(name));
    }
    return level;
}

}  // namespace weakloc
