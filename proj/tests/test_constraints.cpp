#include <doctest.h>

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "weakloc/common.hpp"
#include "weakloc/constraints.hpp"
#include "weakloc/random.hpp"
#include "weakloc/synth.hpp"

using namespace weakloc;

namespace {

Track make_track(std::string video_id, std::string track_id, int start, int length,
                 BoundingBox box = {0, 0, 48, 48}) {
    Track t;
    t.video_id = std::move(video_id);
    t.track_id = std::move(track_id);
    for (int f = start; f < start + length; ++f) t.detections.push_back({f, box, {}});
    return t;
}

AnnotationRecord record(SupervisionTag level, std::string video_id) {
    AnnotationRecord r;
    r.level = level;
    r.video_id = std::move(video_id);
    return r;
}

/// Assignment pinned by a Full-supervision set; Full fixes every row.
std::vector<int> full_assignment(const VideoConstraintSet& set) {
    REQUIRE(static_cast<std::int64_t>(set.fixed_one.size()) == set.num_rows());
    std::vector<int> classes(set.fixed_one.size());
    for (const auto& [row, cls] : set.fixed_one) {
        classes[static_cast<std::size_t>(row - set.row_begin)] = cls;
    }
    return classes;
}

}  // namespace

TEST_CASE("video level builds one bag per present class") {
    // 30 tracklets in one 240-frame track, 10 action classes, present {2,5}
    Dataset ds({{"v", 240, {}}}, {make_track("v", "t0", 0, 240)}, {}, 10);
    REQUIRE(ds.num_rows() == 30);

    AnnotationRecord r = record(SupervisionTag::VideoLevel, "v");
    r.classes = {2, 5};
    auto sets = build_constraints(ds, SupervisionLevel::parse("video-level"),
                                  std::vector<AnnotationRecord>{r});
    REQUIRE(sets.size() == 1);
    const VideoConstraintSet& set = sets[0];

    REQUIRE(set.bags.size() == 2);
    CHECK(set.bags[0].class_id == 2);
    CHECK(set.bags[1].class_id == 5);
    for (const Bag& bag : set.bags) CHECK(bag.rows.size() == 30);
    CHECK(set.fixed_zero.size() == 30 * 8);  // 8 absent classes per row
    CHECK(set.fixed_one.empty());
    CHECK(validate(set, ds.num_label_columns()).empty());
}

TEST_CASE("temporal builds one bag per time unit of each interval") {
    // track tiles [0,96); instance covers [0,48) -> 6 units
    Dataset ds({{"v", 96, {}}}, {make_track("v", "t0", 0, 96)}, {}, 2);
    REQUIRE(ds.num_rows() == 12);

    AnnotationRecord r = record(SupervisionTag::Temporal, "v");
    r.instance_id = 0;
    r.class_id = 1;
    r.interval = {0, 48};
    auto sets = build_constraints(ds, SupervisionLevel::parse("temporal"),
                                  std::vector<AnnotationRecord>{r});
    const VideoConstraintSet& set = sets[0];

    REQUIRE(set.bags.size() == 6);
    for (std::size_t u = 0; u < 6; ++u) {
        CHECK(set.bags[u].class_id == 1);
        CHECK(set.bags[u].rows == std::vector<std::int64_t>{static_cast<std::int64_t>(u)});
    }
    // tracklets fully outside the interval are pinned to background
    std::vector<std::pair<std::int64_t, int>> expected_ones;
    for (std::int64_t row = 6; row < 12; ++row) expected_ones.emplace_back(row, 0);
    CHECK(set.fixed_one == expected_ones);
    CHECK(set.fixed_zero.size() == 12);  // class 2 absent on every row
    CHECK(validate(set, ds.num_label_columns()).empty());
}

TEST_CASE("temporal point builds unit bags over the clipped window") {
    Dataset ds({{"v", 400, {}}}, {make_track("v", "t0", 0, 400)}, {}, 3);

    AnnotationRecord centered = record(SupervisionTag::TemporalPoint, "v");
    centered.instance_id = 0;
    centered.class_id = 2;
    centered.point = 200;
    auto sets = build_constraints(ds, SupervisionLevel::parse("temporal-point"),
                                  std::vector<AnnotationRecord>{centered});
    // window [175, 225): six 8-frame units plus a 2-frame tail
    CHECK(sets[0].bags.size() == 7);
    for (const Bag& bag : sets[0].bags) {
        CHECK(bag.class_id == 2);
        CHECK(!bag.rows.empty());
    }

    AnnotationRecord early = centered;
    early.point = 3;  // window clips to [0, 28): three units plus a tail
    sets = build_constraints(ds, SupervisionLevel::parse("temporal-point"),
                             std::vector<AnnotationRecord>{early});
    CHECK(sets[0].bags.size() == 4);
}

TEST_CASE("full supervision pins a perfectly matching track to its class") {
    BoundingBox gt{10, 10, 58, 58};
    ActionInstance inst;
    inst.video_id = "v";
    inst.instance_id = 0;
    inst.class_id = 2;
    inst.interval = {0, 16};
    inst.boxes.assign(16, gt);

    Dataset ds({{"v", 32, {}}},
               {make_track("v", "actor", 0, 32, gt), make_track("v", "other", 0, 32, {200, 200, 230, 230})},
               {inst}, 2);

    AnnotationRecord r = record(SupervisionTag::Full, "v");
    r.instance_id = 0;
    r.class_id = 2;
    r.interval = inst.interval;
    r.boxes = inst.boxes;
    auto sets = build_constraints(ds, SupervisionLevel::parse("full"),
                                  std::vector<AnnotationRecord>{r});
    const VideoConstraintSet& set = sets[0];

    // every row fixed; actor rows inside the interval take the class
    REQUIRE(static_cast<std::int64_t>(set.fixed_one.size()) == ds.num_rows());
    CHECK(set.bags.empty());
    auto classes = full_assignment(set);
    CHECK(classes[0] == 2);  // actor [0,8)
    CHECK(classes[1] == 2);  // actor [8,16)
    CHECK(classes[2] == 0);  // actor [16,24) is outside the instance
    CHECK(classes[4] == 0);  // the far-away track is background
    CHECK(classes[5] == 0);
}

TEST_CASE("shot level restricts rows to their shots' classes") {
    Dataset ds({{"v", 48, {{0, 24}, {24, 48}}}}, {make_track("v", "t0", 0, 48)}, {}, 2);
    REQUIRE(ds.num_rows() == 6);

    AnnotationRecord first = record(SupervisionTag::ShotLevel, "v");
    first.shot = {0, 24};
    first.classes = {1};
    AnnotationRecord second = record(SupervisionTag::ShotLevel, "v");
    second.shot = {24, 48};
    second.classes = {};
    auto sets = build_constraints(ds, SupervisionLevel::parse("shot-level"),
                                  std::vector<AnnotationRecord>{first, second});
    const VideoConstraintSet& set = sets[0];

    REQUIRE(set.bags.size() == 1);
    CHECK(set.bags[0].class_id == 1);
    CHECK(set.bags[0].rows == std::vector<std::int64_t>{0, 1, 2});
    // rows of the empty shot may only be background; class 2 is absent everywhere
    auto forbidden = [&](std::int64_t row, int cls) {
        return std::find(set.fixed_zero.begin(), set.fixed_zero.end(),
                         std::make_pair(row, cls)) != set.fixed_zero.end();
    };
    for (std::int64_t row = 3; row < 6; ++row) CHECK(forbidden(row, 1));
    for (std::int64_t row = 0; row < 3; ++row) CHECK(!forbidden(row, 1));
    for (std::int64_t row = 0; row < 6; ++row) CHECK(forbidden(row, 2));
    CHECK(validate(set, ds.num_label_columns()).empty());
}

TEST_CASE("validate flags structural violations") {
    VideoConstraintSet ok;
    ok.video_id = "v";
    ok.row_begin = 0;
    ok.row_end = 4;
    CHECK(validate(ok, 3).empty());

    VideoConstraintSet dead_bag = ok;
    dead_bag.fixed_one = {{0, 0}, {1, 0}};
    dead_bag.bags = {{2, {0, 1}}};
    auto violations = validate(dead_bag, 3);
    REQUIRE(!violations.empty());
    bool mentions_bag = false;
    for (const auto& v : violations) mentions_bag |= v.find("bag") != std::string::npos;
    CHECK(mentions_bag);

    VideoConstraintSet overlap = ok;
    overlap.fixed_one = {{2, 1}};
    overlap.fixed_zero = {{2, 1}};
    CHECK(!validate(overlap, 3).empty());
}

TEST_CASE("integer feasibility matches the stated rules") {
    VideoConstraintSet plain;
    plain.video_id = "v";
    plain.row_begin = 0;
    plain.row_end = 2;
    CHECK(is_feasible_integer(plain, std::vector<int>{1, 0}));
    CHECK(is_feasible_integer(plain, std::vector<int>{2, 2}));

    VideoConstraintSet bagged = plain;
    bagged.bags = {{2, {0, 1}}};
    CHECK(!is_feasible_integer(bagged, std::vector<int>{0, 0}));

    // exhaustive 3^2 check against the rule evaluated directly
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            bool expected = a == 2 || b == 2;
            CHECK(is_feasible_integer(bagged, std::vector<int>{a, b}) == expected);

            Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(2, 3);
            Y(0, a) = 1.0;
            Y(1, b) = 1.0;
            CHECK(is_feasible_integer(bagged, Y) == expected);
        }
    }
}

TEST_CASE("feasibility honors hard assignments") {
    VideoConstraintSet set;
    set.video_id = "v";
    set.row_begin = 0;
    set.row_end = 2;
    set.fixed_one = {{0, 1}};
    set.fixed_zero = {{1, 2}};
    CHECK(is_feasible_integer(set, std::vector<int>{1, 0}));
    CHECK(!is_feasible_integer(set, std::vector<int>{0, 0}));
    CHECK(!is_feasible_integer(set, std::vector<int>{1, 2}));
}

TEST_CASE("mixing all-strong or all-weak degenerates to the pure builder") {
    SynthConfig cfg;
    cfg.num_videos = 5;
    cfg.frames_per_video = 160;
    cfg.seed = 21;
    SynthResult synth = generate(cfg);
    const Dataset& ds = synth.dataset;

    std::unordered_map<std::string, std::vector<AnnotationRecord>> by_level{
        {"full", synth.annotations.at("full")},
        {"video-level", synth.annotations.at("video-level")},
    };

    auto compare = [&](const std::vector<VideoConstraintSet>& a,
                       const std::vector<VideoConstraintSet>& b) {
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].fixed_one == b[i].fixed_one);
            CHECK(a[i].fixed_zero == b[i].fixed_zero);
            REQUIRE(a[i].bags.size() == b[i].bags.size());
            for (std::size_t j = 0; j < a[i].bags.size(); ++j) {
                CHECK(a[i].bags[j].class_id == b[i].bags[j].class_id);
                CHECK(a[i].bags[j].rows == b[i].bags[j].rows);
            }
        }
    };

    std::unordered_map<std::string, SupervisionLevel> all_full, all_weak;
    for (const auto& v : ds.videos()) {
        all_full.emplace(v.video_id, SupervisionLevel::parse("full"));
        all_weak.emplace(v.video_id, SupervisionLevel::parse("video-level"));
    }
    compare(mix_levels(ds, all_full, by_level),
            build_constraints(ds, SupervisionLevel::parse("full"), synth.annotations.at("full")));
    compare(mix_levels(ds, all_weak, by_level),
            build_constraints(ds, SupervisionLevel::parse("video-level"),
                              synth.annotations.at("video-level")));
}

TEST_CASE("mixing pins exactly the strong videos") {
    SynthConfig cfg;
    cfg.num_videos = 5;
    cfg.frames_per_video = 160;
    cfg.seed = 22;
    SynthResult synth = generate(cfg);
    const Dataset& ds = synth.dataset;

    std::unordered_map<std::string, SupervisionLevel> levels;
    for (std::size_t i = 0; i < ds.videos().size(); ++i) {
        levels.emplace(ds.videos()[i].video_id,
                       SupervisionLevel::parse(i < 2 ? "full" : "video-level"));
    }
    std::unordered_map<std::string, std::vector<AnnotationRecord>> by_level{
        {"full", synth.annotations.at("full")},
        {"video-level", synth.annotations.at("video-level")},
    };
    auto sets = mix_levels(ds, levels, by_level);
    int pinned_videos = 0;
    for (const auto& set : sets) {
        if (static_cast<std::int64_t>(set.fixed_one.size()) == set.num_rows()) ++pinned_videos;
    }
    CHECK(pinned_videos == 2);
}

TEST_CASE("mixing requires annotations for every mapped level") {
    SynthConfig cfg;
    cfg.num_videos = 2;
    cfg.frames_per_video = 160;
    cfg.seed = 23;
    SynthResult synth = generate(cfg);

    std::unordered_map<std::string, SupervisionLevel> levels;
    for (const auto& v : synth.dataset.videos()) {
        levels.emplace(v.video_id, SupervisionLevel::parse("temporal"));
    }
    std::unordered_map<std::string, std::vector<AnnotationRecord>> missing{
        {"full", synth.annotations.at("full")}};
    CHECK_THROWS_AS(mix_levels(synth.dataset, levels, missing), DataError);
}

TEST_CASE("stricter levels nest inside weaker ones") {
    SynthConfig cfg;
    cfg.num_videos = 8;
    cfg.frames_per_video = 240;
    cfg.seed = 24;
    SynthResult synth = generate(cfg);
    const Dataset& ds = synth.dataset;

    auto full = build_constraints(ds, SupervisionLevel::parse("full"),
                                  synth.annotations.at("full"));
    auto kbb = build_constraints(ds, SupervisionLevel::parse("temporal-3bb"),
                                 synth.annotations.at("temporal-3bb"));
    auto temporal = build_constraints(ds, SupervisionLevel::parse("temporal"),
                                      synth.annotations.at("temporal"));
    auto video = build_constraints(ds, SupervisionLevel::parse("video-level"),
                                   synth.annotations.at("video-level"));

    for (std::size_t v = 0; v < full.size(); ++v) {
        auto classes = full_assignment(full[v]);
        CHECK(is_feasible_integer(full[v], classes));
        CHECK(is_feasible_integer(kbb[v], classes));
        CHECK(is_feasible_integer(temporal[v], classes));
        CHECK(is_feasible_integer(video[v], classes));
    }
}

TEST_CASE("built sets never touch the background with bags or zero-fixes") {
    SynthConfig cfg;
    cfg.num_videos = 4;
    cfg.frames_per_video = 200;
    cfg.seed = 25;
    SynthResult synth = generate(cfg);

    for (const auto& [name, records] : synth.annotations) {
        auto sets = build_constraints(synth.dataset, SupervisionLevel::parse(name), records);
        for (const auto& set : sets) {
            CHECK(validate(set, synth.dataset.num_label_columns()).empty());
            for (const Bag& bag : set.bags) CHECK(bag.class_id != 0);
            for (const auto& [row, cls] : set.fixed_zero) CHECK(cls != 0);
        }
    }
}

TEST_CASE("annotations referencing unknown videos are rejected") {
    SynthConfig cfg;
    cfg.num_videos = 2;
    cfg.frames_per_video = 160;
    cfg.seed = 26;
    SynthResult synth = generate(cfg);

    auto records = synth.annotations.at("temporal");
    records[0].video_id = "nope";
    CHECK_THROWS_AS(build_constraints(synth.dataset, SupervisionLevel::parse("temporal"), records),
                    DataError);
}
