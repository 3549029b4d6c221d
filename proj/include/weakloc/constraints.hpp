#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "weakloc/model.hpp"
#include "weakloc/supervision.hpp"

namespace weakloc {

/// At-least-one constraint: among `rows`, at least one tracklet must take
/// class `class_id`. The background class never appears as a bag class.
struct Bag {
    int class_id = 0;
    std::vector<std::int64_t> rows;  // ascending, global row indices
};

/// One video's constraint set: hard assignments (fixed to one / fixed to
/// zero) and the bag list. Rows are global indices in [row_begin, row_end).
struct VideoConstraintSet {
    std::string video_id;
    std::string level_name;
    std::int64_t row_begin = 0;
    std::int64_t row_end = 0;
    std::vector<std::pair<std::int64_t, int>> fixed_one;   // (row, class), sorted by row
    std::vector<std::pair<std::int64_t, int>> fixed_zero;  // (row, class), sorted

    std::vector<Bag> bags;

    std::int64_t num_rows() const { return row_end - row_begin; }
};

/// Builds per-video constraint sets for one supervision level; one set per
/// video of the dataset, in canonical video order. Annotation records must
/// belong to the given level.
std::vector<VideoConstraintSet> build_constraints(const Dataset& dataset,
                                                  const SupervisionLevel& level,
                                                  std::span<const AnnotationRecord> annotations);

/// Per-video builders applied independently according to `level_by_video`.
/// Throws DataError when a video has no mapped level or the level's
/// annotation records are missing.
std::vector<VideoConstraintSet> mix_levels(
    const Dataset& dataset,
    const std::unordered_map<std::string, SupervisionLevel>& level_by_video,
    const std::unordered_map<std::string, std::vector<AnnotationRecord>>& annotations_by_level);

/// Checks structural invariants plus satisfiability (each bag needs a row
/// that is not pinned to a different class). Returns human-readable
/// violation messages; empty means ok.
std::vector<std::string> validate(const VideoConstraintSet& set, int num_label_columns);

/// True iff the one-hot assignment satisfies all equality and bag
/// constraints of the set. `classes[i]` is the class of row row_begin + i.
bool is_feasible_integer(const VideoConstraintSet& set, std::span<const int> classes);

/// Matrix overload; Y_video must have one-hot rows (num_rows x K).
bool is_feasible_integer(const VideoConstraintSet& set, const Eigen::MatrixXd& Y_video);

}  // namespace weakloc
