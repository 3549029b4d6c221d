#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "weakloc/model.hpp"
#include "weakloc/supervision.hpp"

namespace weakloc {

/// Knobs for the synthetic benchmark. Geometry lives on a 320x240 canvas with
/// 48px person boxes; instance intervals are unit-aligned so tracklets never
/// straddle an instance boundary.
struct SynthConfig {
    std::uint64_t seed = 0;
    int num_videos = 10;
    int num_action_classes = 5;
    int feature_dim = 32;
    int tracks_per_video = 3;
    int frames_per_video = 400;
    int instances_per_video = 2;
    double class_separation = 1.0;
    double feature_noise = 0.25;
    double box_jitter = 4.0;
    double distractor_fraction = 0.25;
    int keyframes_per_instance = 3;
    std::string video_prefix = "video";
};

struct SynthResult {
    Dataset dataset;
    Eigen::MatrixXd features;  // one row per tracklet, aligned with dataset rows
    // Keyed by supervision level name; "temporal-<j>bb" appears for every
    // j = 1..keyframes_per_instance.
    std::map<std::string, std::vector<AnnotationRecord>> annotations;
};

/// Class centers used by the generator: row k is the center of class k
/// (row 0 = background), pairwise distances all equal and >= `separation`.
Eigen::MatrixXd class_centers(int num_action_classes, int feature_dim, double separation);

/// Deterministic synthetic benchmark: ground truth, tracks, features drawn
/// from class-conditional Gaussians, and annotations for every supervision
/// level derived from the same ground truth.
SynthResult generate(const SynthConfig& config);

}  // namespace weakloc
