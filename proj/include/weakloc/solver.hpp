#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "weakloc/constraints.hpp"
#include "weakloc/dataio.hpp"
#include "weakloc/lmo.hpp"
#include "weakloc/objective.hpp"

namespace weakloc {

struct SolverConfig {
    std::int64_t iterations = 30000;
    double lambda = 1e-4;
    std::uint64_t seed = 0;
    /// Stop when the total block gap falls below gap_tolerance * max(h(Y0),
    /// 1e-12); a stale-estimate crossing is confirmed by a fresh full pass.
    double gap_tolerance = 1e-3;
    /// Probability of sampling a block uniformly instead of by gap.
    double sampler_floor = 0.05;
    std::int64_t log_every = 1;
    /// Cadence of full X'Y recomputation to wash out incremental drift.
    std::int64_t refresh_every = 1000;
    /// Maintain each block's convex-combination certificate and verify the
    /// reconstruction at every logged step (costs memory and time).
    bool track_hull = false;
};

struct SolveResult {
    AssignmentMatrix Y;
    Classifier classifier;
    std::vector<TraceRow> trace;
    double h_initial = 0.0;
    double h_final = 0.0;
    /// Freshly recomputed total gap at termination (not the stale estimate).
    double final_gap = 0.0;
    std::int64_t iterations_run = 0;
    bool converged = false;  // stopped by the gap test rather than the budget
    std::int64_t hull_checks = 0;
    double max_hull_error = 0.0;
    double max_row_sum_error = 0.0;
};

/// Block-coordinate Frank-Wolfe over the product of per-video assignment
/// hulls. One iteration samples a video by (stale) block gap, calls the
/// exact oracle on its gradient block and moves by exact line search.
class BcfwSolver {
public:
    /// Constraint sets must tile the cache's rows contiguously in order.
    BcfwSolver(std::vector<VideoConstraintSet> constraints, const RidgeCache& cache,
               int num_label_columns, SolverConfig config);

    SolveResult solve();

    /// One solver iteration on a chosen block; returns the step length.
    double step(int video_index);
    /// Draws the next block index (advances the sampler stream).
    int sample_block();
    /// Recomputes every block gap from scratch; returns their sum.
    double fresh_gap_pass();

    int num_blocks() const { return static_cast<int>(sets_.size()); }
    const AssignmentMatrix& assignment() const { return Y_; }
    double objective() const { return h_; }
    const std::vector<double>& gap_estimates() const { return gaps_; }
    void set_gap_estimates(std::vector<double> gaps);

private:
    struct BlockStep {
        BlockVertex vertex;
        double gap = 0.0;
        double gamma = 0.0;
    };

    void refresh_cached_products();
    BlockStep compute_step(int v, const Eigen::MatrixXd& solved_S);
    void apply_step(int v, const BlockStep& s);
    void check_block_invariants(int v);
    double stale_total_gap() const;

    std::vector<VideoConstraintSet> sets_;
    const RidgeCache& cache_;
    int K_ = 0;
    SolverConfig config_;

    AssignmentMatrix Y_;
    Eigen::MatrixXd S_;  // X'Y, maintained incrementally
    double h_ = 0.0;
    std::vector<double> gaps_;
    std::mt19937_64 rng_;

    std::vector<std::map<std::vector<int>, double>> hulls_;
    std::int64_t hull_checks_ = 0;
    double max_hull_error_ = 0.0;
    double max_row_sum_error_ = 0.0;
};

}  // namespace weakloc
