#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "weakloc/constraints.hpp"

namespace weakloc {

/// An integer-feasible corner of one video's assignment polytope, with its
/// linear objective value <G, Y>.
struct BlockVertex {
    std::string video_id;
    std::vector<int> classes;  // classes[i] labels row row_begin + i
    double value = 0.0;

    Eigen::MatrixXd to_matrix(int num_label_columns) const;
};

/// Exact linear minimization oracle: the integer-feasible assignment
/// minimizing <G, Y> over the video's constraint set. G is M_v x K with
/// local rows. Ties break to the lowest class, then the lowest row.
/// Throws DataError when the set is unsatisfiable.
BlockVertex lmo(const VideoConstraintSet& set, const Eigen::MatrixXd& G);

/// Exhaustive reference oracle for tests; requires K^{M_v} <= 1e7.
BlockVertex lmo_bruteforce(const VideoConstraintSet& set, const Eigen::MatrixXd& G);

}  // namespace weakloc
