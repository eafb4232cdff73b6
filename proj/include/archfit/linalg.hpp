#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "archfit/errors.hpp"

namespace archfit {

inline constexpr double kConditionLimit = 1e12;

/// Throws SingularError unless the symmetric matrix is positive definite
/// with condition number below kConditionLimit.
inline void require_well_conditioned(const Eigen::MatrixXd& sym, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || !(hi / lo < kConditionLimit))
        throw SingularError(std::string(what) + ": matrix numerically singular");
}

/// Solve A X = B for symmetric positive definite A. Unpivoted Cholesky,
/// so solutions commute bitwise with power-of-two column scalings.
inline Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 const char* what) {
    require_well_conditioned(a, what);
    return a.llt().solve(b);
}

inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const char* what) {
    return spd_solve(a, Eigen::MatrixXd::Identity(a.rows(), a.cols()), what);
}

inline Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Largest singular value by power iteration on M^T M, tolerance 1e-10.
inline double spectral_norm(const Eigen::MatrixXd& m) {
    const Eigen::Index d = m.cols();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(d);
    v[0] += 0.5; // break symmetry for alternating-sign cases
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd w = m.transpose() * (m * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        const double next = v.dot(m.transpose() * (m * v));
        if (std::abs(next - lambda) <= 1e-10 * std::max(1.0, std::abs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

inline double max_relative_asymmetry(const Eigen::MatrixXd& m) {
    const double scale = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

} // namespace archfit
