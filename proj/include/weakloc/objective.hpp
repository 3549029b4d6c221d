#pragma once

#include <cstdint>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace weakloc {

/// Relaxed assignment of tracklets to label columns: M x K, rows in the
/// simplex. Integer assignments are the one-hot special case.
using AssignmentMatrix = Eigen::MatrixXd;

/// Linear per-class scorer recovered from the relaxed assignment.
struct Classifier {
    Eigen::MatrixXd weights;  // d x K
    double lambda = 0.0;
};

/// Precomputed factorization for the clustering cost
///   h(Y) = (1/2M) (||Y||_F^2 - <X'Y, A^{-1} X'Y>),  A = X'X + M lambda I_d.
/// Equal to (1/2M) Tr(Y Y' B) with B = I - X A^{-1} X', but B (M x M) is
/// never formed; every product goes through the d x d solve.
class RidgeCache {
public:
    RidgeCache(Eigen::MatrixXd features, double lambda);

    std::int64_t num_rows() const { return X_.rows(); }
    int dim() const { return static_cast<int>(X_.cols()); }
    double lambda() const { return lambda_; }
    const Eigen::MatrixXd& features() const { return X_; }

    /// Solves A Z = rhs for Z (rhs is d x K).
    Eigen::MatrixXd solve_normal(const Eigen::MatrixXd& rhs) const;

private:
    Eigen::MatrixXd X_;
    double lambda_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

double h_value(const RidgeCache& cache, const AssignmentMatrix& Y);

/// grad h(Y) = (1/M) (Y - X A^{-1} X'Y), i.e. (1/M) B Y.
Eigen::MatrixXd gradient(const RidgeCache& cache, const AssignmentMatrix& Y);

/// Second derivative of gamma -> h(Y + gamma D); nonnegative since B is PSD.
double curvature(const RidgeCache& cache, const Eigen::MatrixXd& D);

/// W = A^{-1} X'Y, the unique ridge minimizer for labels Y.
Classifier recover_classifier(const RidgeCache& cache, const AssignmentMatrix& Y);

/// Per-class scores x'W for one descriptor.
Eigen::VectorXd score(const Classifier& classifier, const Eigen::VectorXd& x);

/// Scales every nonzero row to unit Euclidean norm. Optional preprocessing,
/// off by default in the pipeline.
void l2_normalize_rows(Eigen::MatrixXd& features);

}  // namespace weakloc
