#include "weakloc/objective.hpp"

#include <stdexcept>
#include <string>

#include "weakloc/common.hpp"

namespace weakloc {

namespace {

void check_rows(const RidgeCache& cache, const Eigen::MatrixXd& Y, const char* what) {
    if (Y.rows() != cache.num_rows()) {
        throw std::invalid_argument(std::string(what) + ": expected " +
                                    std::to_string(cache.num_rows()) + " rows, got " +
                                    std::to_string(Y.rows()));
    }
}

}  // namespace

RidgeCache::RidgeCache(Eigen::MatrixXd features, double lambda)
    : X_(std::move(features)), lambda_(lambda) {
    if (X_.rows() < 1 || X_.cols() < 1) {
        throw DataError("feature matrix must be non-empty");
    }
    if (!(lambda_ > 0.0)) {
        throw DataError("ridge lambda must be positive");
    }
    if (!X_.allFinite()) {
        throw NumericalError("feature matrix contains non-finite values");
    }
    const auto d = X_.cols();
    const double shift = static_cast<double>(X_.rows()) * lambda_;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
    A.selfadjointView<Eigen::Lower>().rankUpdate(X_.transpose());
    A = A.selfadjointView<Eigen::Lower>();
    A.diagonal().array() += shift;
    llt_.compute(A);
    if (llt_.info() != Eigen::Success) {
        // A is PD by construction; a failure here is rounding, so nudge the
        // spectrum and retry once before giving up.
        A.diagonal().array() += 1e-10 * shift;
        llt_.compute(A);
        if (llt_.info() != Eigen::Success) {
            throw NumericalError("Cholesky factorization of the normal matrix failed");
        }
    }
}

Eigen::MatrixXd RidgeCache::solve_normal(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() != X_.cols()) {
        throw std::invalid_argument("normal-equation rhs has wrong row count");
    }
    return llt_.solve(rhs);
}

double h_value(const RidgeCache& cache, const AssignmentMatrix& Y) {
    check_rows(cache, Y, "h_value");
    const double M = static_cast<double>(cache.num_rows());
    Eigen::MatrixXd S = cache.features().transpose() * Y;
    return (Y.squaredNorm() - S.cwiseProduct(cache.solve_normal(S)).sum()) / (2.0 * M);
}

Eigen::MatrixXd gradient(const RidgeCache& cache, const AssignmentMatrix& Y) {
    check_rows(cache, Y, "gradient");
    const double M = static_cast<double>(cache.num_rows());
    Eigen::MatrixXd S = cache.features().transpose() * Y;
    return (Y - cache.features() * cache.solve_normal(S)) / M;
}

double curvature(const RidgeCache& cache, const Eigen::MatrixXd& D) {
    check_rows(cache, D, "curvature");
    const double M = static_cast<double>(cache.num_rows());
    Eigen::MatrixXd S = cache.features().transpose() * D;
    double value = (D.squaredNorm() - S.cwiseProduct(cache.solve_normal(S)).sum()) / M;
    return value > 0.0 ? value : 0.0;
}

Classifier recover_classifier(const RidgeCache& cache, const AssignmentMatrix& Y) {
    check_rows(cache, Y, "recover_classifier");
    Classifier c;
    c.lambda = cache.lambda();
    c.weights = cache.solve_normal(cache.features().transpose() * Y);
    return c;
}

Eigen::VectorXd score(const Classifier& classifier, const Eigen::VectorXd& x) {
    if (x.size() != classifier.weights.rows()) {
        throw std::invalid_argument("descriptor dimension does not match classifier");
    }
    return classifier.weights.transpose() * x;
}

void l2_normalize_rows(Eigen::MatrixXd& features) {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        double norm = features.row(i).norm();
        if (norm > 0.0) features.row(i) /= norm;
    }
}

}  // namespace weakloc
