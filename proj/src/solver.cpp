#include "weakloc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "weakloc/common.hpp"
#include "weakloc/random.hpp"

namespace weakloc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

BcfwSolver::BcfwSolver(std::vector<VideoConstraintSet> constraints, const RidgeCache& cache,
                       int num_label_columns, SolverConfig config)
    : sets_(std::move(constraints)),
      cache_(cache),
      K_(num_label_columns),
      config_(config),
      rng_(make_rng(config.seed, "block-sampler")) {
    if (sets_.empty()) throw DataError("solver needs at least one video");
    if (K_ < 1) throw DataError("solver needs at least one label column");
    if (config_.iterations < 1) throw DataError("iteration budget must be >= 1");
    if (!(config_.sampler_floor >= 0.0 && config_.sampler_floor < 1.0)) {
        throw DataError("sampler floor must lie in [0, 1)");
    }
    if (config_.log_every < 1 || config_.refresh_every < 1) {
        throw DataError("log and refresh cadences must be >= 1");
    }
    if (!(config_.gap_tolerance > 0.0)) throw DataError("gap tolerance must be positive");

    std::int64_t expected = 0;
    for (const VideoConstraintSet& set : sets_) {
        if (set.row_begin != expected) {
            throw DataError("constraint sets do not tile the feature rows (video " +
                            set.video_id + " starts at " + std::to_string(set.row_begin) +
                            ", expected " + std::to_string(expected) + ")");
        }
        expected = set.row_end;
        std::vector<std::string> violations = validate(set, K_);
        if (!violations.empty()) {
            throw DataError("invalid constraint set for video " + set.video_id + ": " +
                            violations.front());
        }
    }
    if (expected != cache_.num_rows()) {
        throw DataError("constraint sets cover " + std::to_string(expected) +
                        " rows but features have " + std::to_string(cache_.num_rows()));
    }

    // Start from the deterministic zero-gradient vertex of every block; the
    // oracle proves each block satisfiable as a side effect.
    Y_ = AssignmentMatrix::Zero(cache_.num_rows(), K_);
    hulls_.resize(sets_.size());
    Eigen::MatrixXd zero_G;
    for (std::size_t v = 0; v < sets_.size(); ++v) {
        const VideoConstraintSet& set = sets_[v];
        zero_G = Eigen::MatrixXd::Zero(set.num_rows(), K_);
        BlockVertex vertex = lmo(set, zero_G);
        Y_.middleRows(set.row_begin, set.num_rows()) = vertex.to_matrix(K_);
        if (config_.track_hull) hulls_[v].emplace(vertex.classes, 1.0);
    }
    gaps_.assign(sets_.size(), kInf);
    refresh_cached_products();
}

void BcfwSolver::refresh_cached_products() {
    S_ = cache_.features().transpose() * Y_;
    h_ = (Y_.squaredNorm() - S_.cwiseProduct(cache_.solve_normal(S_)).sum()) /
         (2.0 * static_cast<double>(cache_.num_rows()));
}

BcfwSolver::BlockStep BcfwSolver::compute_step(int v, const Eigen::MatrixXd& solved_S) {
    const VideoConstraintSet& set = sets_[static_cast<std::size_t>(v)];
    const double M = static_cast<double>(cache_.num_rows());
    auto Xv = cache_.features().middleRows(set.row_begin, set.num_rows());
    auto Yv = Y_.middleRows(set.row_begin, set.num_rows());

    Eigen::MatrixXd G = (Yv - Xv * solved_S) / M;
    BlockStep s;
    s.vertex = lmo(set, G);
    Eigen::MatrixXd D = s.vertex.to_matrix(K_) - Yv;
    s.gap = std::max(0.0, -G.cwiseProduct(D).sum());
    if (s.gap == 0.0) {
        s.gamma = 0.0;
        return s;
    }
    Eigen::MatrixXd XtD = Xv.transpose() * D;
    double curv = std::max(0.0, (D.squaredNorm() - XtD.cwiseProduct(cache_.solve_normal(XtD)).sum()) / M);
    s.gamma = curv <= 1e-18 ? 1.0 : std::clamp(s.gap / curv, 0.0, 1.0);

    // Apply directly here to reuse D and XtD; h moves along the exact
    // quadratic model, which the periodic refresh re-anchors.
    Y_.middleRows(set.row_begin, set.num_rows()) += s.gamma * D;
    S_ += s.gamma * XtD;
    h_ += -s.gamma * s.gap + 0.5 * s.gamma * s.gamma * curv;
    return s;
}

double BcfwSolver::step(int video_index) {
    if (video_index < 0 || video_index >= num_blocks()) {
        throw DataError("block index out of range");
    }
    Eigen::MatrixXd solved_S = cache_.solve_normal(S_);
    BlockStep s = compute_step(video_index, solved_S);
    gaps_[static_cast<std::size_t>(video_index)] = s.gap;
    apply_step(video_index, s);
    return s.gamma;
}

void BcfwSolver::apply_step(int v, const BlockStep& s) {
    if (!config_.track_hull || s.gamma == 0.0) return;
    auto& hull = hulls_[static_cast<std::size_t>(v)];
    if (s.gamma == 1.0) {
        hull.clear();
    } else {
        for (auto& [classes, w] : hull) w *= (1.0 - s.gamma);
    }
    hull[s.vertex.classes] += s.gamma;
    std::erase_if(hull, [](const auto& kv) { return kv.second == 0.0; });
}

void BcfwSolver::check_block_invariants(int v) {
    const VideoConstraintSet& set = sets_[static_cast<std::size_t>(v)];
    auto Yv = Y_.middleRows(set.row_begin, set.num_rows());
    double row_err = (Yv.rowwise().sum().array() - 1.0).abs().maxCoeff();
    max_row_sum_error_ = std::max(max_row_sum_error_, row_err);
    if (row_err > 1e-9 || Yv.minCoeff() < -1e-12 || Yv.maxCoeff() > 1.0 + 1e-12) {
        throw NumericalError("assignment left the simplex on video " + set.video_id);
    }
    if (!config_.track_hull) return;

    const auto& hull = hulls_[static_cast<std::size_t>(v)];
    double wsum = 0.0;
    Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(set.num_rows(), K_);
    for (const auto& [classes, w] : hull) {
        if (w < -1e-12) throw NumericalError("negative hull weight on video " + set.video_id);
        wsum += w;
        for (std::size_t i = 0; i < classes.size(); ++i) {
            recon(static_cast<Eigen::Index>(i), classes[i]) += w;
        }
    }
    double err = std::max(std::abs(wsum - 1.0), (recon - Yv).cwiseAbs().maxCoeff());
    max_hull_error_ = std::max(max_hull_error_, err);
    ++hull_checks_;
    if (err > 1e-6) {
        throw NumericalError("convex-combination certificate drifted on video " + set.video_id);
    }
}

int BcfwSolver::sample_block() {
    const int N = num_blocks();
    if (N == 1) {
        next_unit(rng_);
        next_unit(rng_);
        return 0;
    }
    double pick = next_unit(rng_);
    if (pick < config_.sampler_floor) {
        return static_cast<int>(next_index(rng_, N));
    }
    double max_finite = 0.0;
    bool any_finite = false;
    for (double g : gaps_) {
        if (std::isfinite(g)) {
            any_finite = true;
            max_finite = std::max(max_finite, g);
        }
    }
    // Unvisited blocks count as the largest finite gap times ten; with no
    // informative gaps at all, fall back to uniform.
    double inf_weight = any_finite && max_finite > 0.0 ? 10.0 * max_finite : 0.0;
    double total = 0.0;
    for (double g : gaps_) total += std::isfinite(g) ? g : inf_weight;
    if (!(total > 0.0)) {
        return static_cast<int>(next_index(rng_, N));
    }
    double u = next_unit(rng_) * total;
    double cum = 0.0;
    for (int v = 0; v < N; ++v) {
        double g = gaps_[static_cast<std::size_t>(v)];
        cum += std::isfinite(g) ? g : inf_weight;
        if (u < cum) return v;
    }
    return N - 1;
}

double BcfwSolver::stale_total_gap() const {
    double total = 0.0;
    for (double g : gaps_) total += g;  // stays +inf until every block is seen
    return total;
}

double BcfwSolver::fresh_gap_pass() {
    const double M = static_cast<double>(cache_.num_rows());
    Eigen::MatrixXd solved_S = cache_.solve_normal(S_);
    double total = 0.0;
    for (std::size_t v = 0; v < sets_.size(); ++v) {
        const VideoConstraintSet& set = sets_[v];
        auto Xv = cache_.features().middleRows(set.row_begin, set.num_rows());
        auto Yv = Y_.middleRows(set.row_begin, set.num_rows());
        Eigen::MatrixXd G = (Yv - Xv * solved_S) / M;
        BlockVertex vertex = lmo(set, G);
        double gap = std::max(0.0, G.cwiseProduct(Yv - vertex.to_matrix(K_)).sum());
        gaps_[v] = gap;
        total += gap;
    }
    return total;
}

void BcfwSolver::set_gap_estimates(std::vector<double> gaps) {
    if (gaps.size() != gaps_.size()) throw DataError("gap vector size mismatch");
    gaps_ = std::move(gaps);
}

SolveResult BcfwSolver::solve() {
    SolveResult result;
    refresh_cached_products();
    result.h_initial = h_;
    const double tol = config_.gap_tolerance * std::max(result.h_initial, 1e-12);

    std::int64_t iter = 0;
    bool gap_verified = false;
    double verified_gap = 0.0;
    while (iter < config_.iterations) {
        ++iter;
        if (iter % config_.refresh_every == 0) refresh_cached_products();
        int v = sample_block();
        double gamma = step(v);
        bool logged = (iter % config_.log_every == 0) || iter == config_.iterations;
        if (logged) {
            check_block_invariants(v);
            result.trace.push_back(
                TraceRow{iter, sets_[static_cast<std::size_t>(v)].video_id, h_,
                         stale_total_gap(), gamma});
        }
        if (stale_total_gap() <= tol) {
            double fresh = fresh_gap_pass();
            if (fresh <= tol) {
                gap_verified = true;
                verified_gap = fresh;
                break;
            }
        }
    }
    result.iterations_run = iter;
    refresh_cached_products();
    result.final_gap = gap_verified ? verified_gap : fresh_gap_pass();
    result.converged = result.final_gap <= tol;
    result.h_final = h_;
    result.Y = Y_;
    result.classifier.lambda = cache_.lambda();
    result.classifier.weights = cache_.solve_normal(S_);
    result.hull_checks = hull_checks_;
    result.max_hull_error = max_hull_error_;
    result.max_row_sum_error = max_row_sum_error_;
    return result;
}

}  // namespace weakloc
