#include <doctest.h>

#include <cmath>
#include <vector>

#include "weakloc/common.hpp"
#include "weakloc/constraints.hpp"
#include "weakloc/eval.hpp"
#include "weakloc/inference.hpp"
#include "weakloc/objective.hpp"
#include "weakloc/synth.hpp"

using namespace weakloc;

namespace {

Dataset one_track_dataset(int frames, bool with_descriptor_indices = false) {
    Track t;
    t.video_id = "v";
    t.track_id = "t0";
    for (int f = 0; f < frames; ++f) {
        Detection d{f, {0, 0, 10, 10}, {}};
        if (with_descriptor_indices) d.descriptor_index = f;
        t.detections.push_back(d);
    }
    return Dataset({{"v", frames, {}}}, {t}, {}, 1);
}

DetectionRecord box_detection(std::string video_id, int cls, FrameInterval interval,
                              BoundingBox box, double score) {
    DetectionRecord r;
    r.video_id = std::move(video_id);
    r.class_id = cls;
    r.interval = interval;
    r.boxes.assign(static_cast<std::size_t>(interval.length()), box);
    r.score = score;
    return r;
}

/// A separable training world and its exact supervised classifier, built
/// from the pinned full-supervision assignment rather than a solver run.
struct TrainedWorld {
    SynthResult synth;
    Classifier classifier;
};

TrainedWorld trained_world(std::uint64_t seed, int videos, double noise) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.num_videos = videos;
    cfg.frames_per_video = 240;
    cfg.feature_noise = noise;
    TrainedWorld world{generate(cfg), {}};
    auto sets = build_constraints(world.synth.dataset, SupervisionLevel::parse("full"),
                                  world.synth.annotations.at("full"));
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(world.synth.dataset.num_rows(),
                                              world.synth.dataset.num_label_columns());
    for (const auto& set : sets) {
        for (const auto& [row, cls] : set.fixed_one) Y(row, cls) = 1.0;
    }
    RidgeCache cache(world.synth.features, 1e-4);
    world.classifier = recover_classifier(cache, Y);
    return world;
}

}  // namespace

TEST_CASE("score_track broadcasts tracklet scores to frames") {
    Dataset ds = one_track_dataset(12);
    Eigen::MatrixXd features(2, 2);  // two tracklets: [0,8) and [8,12)
    features << 1.0, 0.0, 0.0, 1.0;
    Classifier cls;
    cls.weights = Eigen::MatrixXd(2, 2);
    cls.weights << 0.5, -0.5, 2.0, 1.0;

    Eigen::MatrixXd s = score_track(ds, 0, features, cls);
    REQUIRE(s.rows() == 12);
    REQUIRE(s.cols() == 2);
    for (int f = 0; f < 8; ++f) {
        CHECK(s(f, 0) == 0.5);
        CHECK(s(f, 1) == -0.5);
    }
    for (int f = 8; f < 12; ++f) {
        CHECK(s(f, 0) == 2.0);
        CHECK(s(f, 1) == 1.0);
    }

    cls.weights.setZero();
    CHECK(score_track(ds, 0, features, cls).isZero());
}

TEST_CASE("score_track honors per-detection descriptors") {
    Dataset ds = one_track_dataset(3, true);
    Eigen::MatrixXd features = Eigen::MatrixXd::Zero(1, 1);  // tracklet row, unused here
    Eigen::MatrixXd per_detection(3, 1);
    per_detection << 1.0, 2.0, 3.0;
    Classifier cls;
    cls.weights = Eigen::MatrixXd(1, 1);
    cls.weights << 2.0;

    Eigen::MatrixXd s = score_track(ds, 0, features, cls, &per_detection);
    REQUIRE(s.rows() == 3);
    CHECK(s(0, 0) == 2.0);
    CHECK(s(1, 0) == 4.0);
    CHECK(s(2, 0) == 6.0);

    // the descriptor table is mandatory once detections reference it
    CHECK_THROWS_AS(score_track(ds, 0, features, cls), DataError);
}

TEST_CASE("median filter is identity on constants and kills short impulses") {
    std::vector<double> constant(40, 3.25);
    CHECK(median_filter(constant, 25) == constant);

    std::vector<double> impulse(51, 0.0);
    impulse[25] = 9.0;
    std::vector<double> smoothed = median_filter(impulse, 25);
    for (double v : smoothed) CHECK(v == 0.0);

    std::vector<double> single{7.0};
    CHECK(median_filter(single, 25) == single);

    CHECK_THROWS_AS(median_filter(constant, 24), std::invalid_argument);
    CHECK_THROWS_AS(median_filter(constant, 0), std::invalid_argument);
}

TEST_CASE("median filter shrinks its window symmetrically at the borders") {
    // window at i uses radius min(12, i, n-1-i); at the edges it is the raw value
    std::vector<double> series{5.0, 0.0, 0.0, 0.0, 1.0};
    std::vector<double> out = median_filter(series, 25);
    CHECK(out[0] == 5.0);             // radius 0
    CHECK(out[1] == 0.0);             // median of {5,0,0}
    CHECK(out[2] == 0.0);             // median of all five
    CHECK(out[4] == 1.0);             // radius 0
}

TEST_CASE("subtracks are maximal strictly-above runs scored by their mean") {
    std::vector<double> scores{1.0, 1.0, 0.0, 1.0};
    auto subs = extract_subtracks(scores, 0.5);
    REQUIRE(subs.size() == 2);
    CHECK(subs[0].interval == FrameInterval{0, 2});
    CHECK(subs[0].score == doctest::Approx(1.0));
    CHECK(subs[1].interval == FrameInterval{3, 4});
    CHECK(subs[1].score == doctest::Approx(1.0));

    CHECK(extract_subtracks(std::vector<double>{0.1, 0.2}, 0.5).empty());
    // equality with the threshold does not open a run
    CHECK(extract_subtracks(std::vector<double>{0.5, 0.5}, 0.5).empty());

    std::vector<double> rising{1.0, 2.0, 3.0};
    auto whole = extract_subtracks(rising, 0.0);
    REQUIRE(whole.size() == 1);
    CHECK(whole[0].interval == FrameInterval{0, 3});
    CHECK(whole[0].score == doctest::Approx(2.0));
}

TEST_CASE("nms keeps the higher of two identical detections") {
    auto a = box_detection("v", 1, {0, 10}, {0, 0, 10, 10}, 0.9);
    auto b = box_detection("v", 1, {0, 10}, {0, 0, 10, 10}, 0.8);
    auto kept = nms(std::vector<DetectionRecord>{a, b}, 0.2);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.9);
}

TEST_CASE("nms spares temporally disjoint and cross-class detections") {
    auto a = box_detection("v", 1, {0, 10}, {0, 0, 10, 10}, 0.9);
    auto b = box_detection("v", 1, {50, 60}, {0, 0, 10, 10}, 0.8);
    CHECK(nms(std::vector<DetectionRecord>{a, b}, 0.2).size() == 2);

    auto c = box_detection("v", 2, {0, 10}, {0, 0, 10, 10}, 0.8);
    CHECK(nms(std::vector<DetectionRecord>{a, c}, 0.2).size() == 2);

    auto d = box_detection("w", 1, {0, 10}, {0, 0, 10, 10}, 0.8);
    CHECK(nms(std::vector<DetectionRecord>{a, d}, 0.2).size() == 2);
}

TEST_CASE("nms is greedy by score and keeps input order") {
    // #2 overlaps #1 at IoU 0.5; #3 overlaps neither
    auto first = box_detection("v", 1, {0, 10}, {0, 0, 10, 10}, 0.9);
    auto second = box_detection("v", 1, {0, 10}, {0, 0, 10, 5}, 0.8);
    auto third = box_detection("v", 1, {40, 50}, {0, 0, 10, 10}, 0.7);
    auto kept = nms(std::vector<DetectionRecord>{third, first, second}, 0.2);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].score == 0.7);  // input order preserved
    CHECK(kept[1].score == 0.9);
}

TEST_CASE("nms suppresses only above the threshold") {
    auto a = box_detection("v", 1, {0, 10}, {0, 0, 10, 10}, 0.9);
    auto b = box_detection("v", 1, {0, 10}, {0, 0, 10, 5}, 0.8);  // ST-IoU 0.5
    CHECK(nms(std::vector<DetectionRecord>{a, b}, 0.5).size() == 2);
    CHECK(nms(std::vector<DetectionRecord>{a, b}, 0.49).size() == 1);
}

TEST_CASE("inferred detections carry the track geometry") {
    TrainedWorld world = trained_world(61, 6, 0.05);
    ThresholdSet thresholds;
    thresholds.theta.assign(
        static_cast<std::size_t>(world.synth.dataset.num_label_columns()), 0.5);

    auto detections = infer_detections(world.synth.dataset, world.synth.features,
                                       world.classifier, thresholds);
    REQUIRE(!detections.empty());
    for (const auto& det : detections) {
        CHECK(det.class_id >= 1);
        CHECK(det.class_id <= world.synth.dataset.num_action_classes());
        CHECK(det.interval.length() >= 1);
        CHECK(static_cast<int>(det.boxes.size()) == det.interval.length());
        int vi = world.synth.dataset.video_index(det.video_id);
        bool on_track = false;
        for (int ti : world.synth.dataset.video_tracks(vi)) {
            const Track& track = world.synth.dataset.tracks()[static_cast<std::size_t>(ti)];
            if (track.span().contains(det.interval.begin) &&
                track.span().contains(det.interval.end - 1) &&
                track.box_at(det.interval.begin) == det.boxes.front()) {
                on_track = true;
            }
        }
        CHECK(on_track);
    }
}

TEST_CASE("calibrated thresholds maximize per-class AP on the held-out split") {
    TrainedWorld world = trained_world(62, 8, 0.1);
    const Dataset& ds = world.synth.dataset;

    InferenceConfig cfg;
    ThresholdSet thresholds =
        calibrate_thresholds(ds, world.synth.features, world.classifier, cfg);
    REQUIRE(thresholds.theta.size() ==
            static_cast<std::size_t>(ds.num_label_columns()));

    auto ap_with = [&](const ThresholdSet& t) {
        auto detections = infer_detections(ds, world.synth.features, world.classifier, t, cfg);
        EvalReport report = video_map(detections, ds, std::vector<double>{0.5}, IouMode::Full);
        return report.map[0];
    };

    double calibrated = ap_with(thresholds);
    for (double delta : {-0.4, 0.3, 0.8}) {
        ThresholdSet degraded = thresholds;
        for (auto& t : degraded.theta) t += delta;
        CHECK(ap_with(degraded) <= calibrated + 1e-12);
    }
}

TEST_CASE("separable scores calibrate to a separating threshold") {
    TrainedWorld world = trained_world(63, 8, 0.02);
    const Dataset& ds = world.synth.dataset;
    ThresholdSet thresholds =
        calibrate_thresholds(ds, world.synth.features, world.classifier, {});

    // with near-zero noise every class separates; mAP at the calibrated
    // thresholds is perfect on the calibration data itself
    auto detections = infer_detections(ds, world.synth.features, world.classifier, thresholds);
    EvalReport report = video_map(detections, ds, std::vector<double>{0.5}, IouMode::Full);
    CHECK(report.map[0] == doctest::Approx(1.0));
}

TEST_CASE("calibration rejects degenerate inputs") {
    TrainedWorld world = trained_world(64, 2, 0.1);
    InferenceConfig cfg;
    cfg.quantile_grid = 1;
    CHECK_THROWS_AS(calibrate_thresholds(world.synth.dataset, world.synth.features,
                                         world.classifier, cfg),
                    std::invalid_argument);

    Dataset empty;
    CHECK_THROWS_AS(
        calibrate_thresholds(empty, Eigen::MatrixXd(), world.classifier, {}),
        DataError);
}
