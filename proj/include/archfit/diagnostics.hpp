#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "archfit/errors.hpp"
#include "archfit/linalg.hpp"
#include "archfit/model.hpp"
#include "archfit/rng.hpp"

namespace archfit {

// ---------------------------------------------------------------------------
// Sample moment matrices
// ---------------------------------------------------------------------------

/// Sample analogues, over t = p+1..n, of
///   U     = E[Y Y^T]              (regressor second moment)
///   R     = E[sigma^4 Y Y^T]      (governs the LS asymptotics)
///   Gamma = E[Y Y^T / sigma^4]    (governs the EF/QML asymptotics)
/// with Y_{t-1} = (1, x^2_{t-1}, ..., x^2_{t-p}) and sigma^2 evaluated at the
/// supplied parameters.
struct MomentMatrices {
    Eigen::MatrixXd u_hat;
    Eigen::MatrixXd r_hat;
    Eigen::MatrixXd gamma_hat;
    int n_used = 0;
};

inline MomentMatrices moment_matrices(const Series& series, const ArchParams& params) {
    const int p = params.order();
    const int dim = p + 1;
    if (series.n() - p < dim) throw DomainError("series too short for moment matrices");

    const auto s2 = sigma2_path(params, series);
    const auto& x2 = series.x2();
    const int m = series.n() - p;

    MomentMatrices mats;
    mats.u_hat = Eigen::MatrixXd::Zero(dim, dim);
    mats.r_hat = Eigen::MatrixXd::Zero(dim, dim);
    mats.gamma_hat = Eigen::MatrixXd::Zero(dim, dim);
    mats.n_used = m;

    Eigen::VectorXd z(dim);
    for (int i = 0; i < m; ++i) {
        z[0] = 1.0;
        for (int j = 1; j <= p; ++j) z[j] = x2[static_cast<std::size_t>(p + i - j)];
        const double s4 = s2[static_cast<std::size_t>(i)] * s2[static_cast<std::size_t>(i)];
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                const double zz = z[a] * z[b];
                mats.u_hat(a, b) += zz;
                mats.r_hat(a, b) += s4 * zz;
                mats.gamma_hat(a, b) += zz / s4;
            }
    }
    mats.u_hat /= m;
    mats.r_hat /= m;
    mats.gamma_hat /= m;

    require_well_conditioned(mats.u_hat, "moment_matrices: U");
    require_well_conditioned(mats.gamma_hat, "moment_matrices: Gamma");
    return mats;
}

// ---------------------------------------------------------------------------
// Asymptotic covariances (per sqrt(n) scale)
// ---------------------------------------------------------------------------

enum class CovKind { LS, EF, QML, MLNormal };

/// LS:        var_eps2 * U^-1 R U^-1
/// EF, QML:   var_eps2 * Gamma^-1
/// MLNormal:  2 * Gamma^-1
inline Eigen::MatrixXd asymptotic_covariance(CovKind kind, const MomentMatrices& mats,
                                             double var_eps2) {
    if (!(var_eps2 > 0.0)) throw DomainError("var_eps2 must be > 0");
    switch (kind) {
    case CovKind::LS: {
        const Eigen::MatrixXd ui_r = spd_solve(mats.u_hat, mats.r_hat, "asymptotic_covariance");
        Eigen::MatrixXd m = spd_solve(mats.u_hat, ui_r.transpose(), "asymptotic_covariance");
        m = 0.5 * (m + m.transpose()).eval();
        return var_eps2 * m;
    }
    case CovKind::EF:
    case CovKind::QML: {
        Eigen::MatrixXd gi = spd_inverse(mats.gamma_hat, "asymptotic_covariance");
        gi = 0.5 * (gi + gi.transpose()).eval();
        return var_eps2 * gi;
    }
    case CovKind::MLNormal: {
        Eigen::MatrixXd gi = spd_inverse(mats.gamma_hat, "asymptotic_covariance");
        gi = 0.5 * (gi + gi.transpose()).eval();
        return 2.0 * gi;
    }
    }
    throw DomainError("unknown covariance kind");
}

/// Smallest eigenvalue of U^-1 R U^-1 - Gamma^-1 (symmetrized); the common
/// Var(eps^2) factor cancels and is omitted. Nonnegative in population for
/// genuine moment matrices, zero iff the conditional variance is constant.
inline double efficiency_gap(const MomentMatrices& mats) {
    const Eigen::MatrixXd ls = asymptotic_covariance(CovKind::LS, mats, 1.0);
    const Eigen::MatrixXd ef = asymptotic_covariance(CovKind::EF, mats, 1.0);
    Eigen::MatrixXd diff = ls - ef;
    diff = 0.5 * (diff + diff.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// Stationarity / moment-condition checks
// ---------------------------------------------------------------------------

namespace detail {

/// p x p companion matrix with first row (alpha_1 e2, ..., alpha_p e2) and
/// identity subdiagonal.
inline Eigen::MatrixXd companion(const ArchParams& params, double eps2) {
    const int p = params.order();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
    for (int j = 0; j < p; ++j) a(0, j) = params.alpha[j] * eps2;
    for (int i = 1; i < p; ++i) a(i, i - 1) = 1.0;
    return a;
}

} // namespace detail

struct LyapunovEstimate {
    double estimate = 0.0;
    double stderr_est = 0.0;
};

/// Monte Carlo estimate of the top Lyapunov exponent of the random companion
/// products: mean over `reps` of (1/horizon) log ||A_1 ... A_horizon||_F,
/// products renormalized each step. Negative values indicate strict
/// stationarity. All alpha zero degenerates the product; the -inf sentinel is
/// returned.
inline LyapunovEstimate lyapunov_exponent(const ArchParams& params, const InnovationDist& dist,
                                          int horizon, int reps, std::uint64_t seed,
                                          std::uint64_t stream = 0) {
    validate_params(params.omega, params.alpha);
    if (horizon < 100) throw DomainError("lyapunov_exponent requires horizon >= 100");
    if (reps < 1) throw DomainError("lyapunov_exponent requires reps >= 1");
    if (params.alpha.maxCoeff() == 0.0)
        return {-std::numeric_limits<double>::infinity(), 0.0};

    const int p = params.order();
    Rng rng(seed, stream);
    std::vector<double> vals(static_cast<std::size_t>(reps));
    for (int r = 0; r < reps; ++r) {
        if (p == 1) {
            double acc = 0.0;
            for (int t = 0; t < horizon; ++t) {
                const double e = dist.sample(rng);
                acc += std::log(params.alpha[0] * e * e);
            }
            vals[static_cast<std::size_t>(r)] = acc / horizon;
        } else {
            Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(p, p);
            double logscale = 0.0;
            for (int t = 0; t < horizon; ++t) {
                const double e = dist.sample(rng);
                prod = (detail::companion(params, e * e) * prod).eval();
                const double s = prod.norm();
                prod /= s;
                logscale += std::log(s);
            }
            vals[static_cast<std::size_t>(r)] = logscale / horizon;
        }
    }

    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= reps;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double se = reps > 1 ? std::sqrt(ss / (reps - 1) / reps) : 0.0;
    return {mean, se};
}

/// Spectral norm of the Monte Carlo average of the s-fold Kronecker power of
/// the companion matrix. Values below 1 certify the 2s-th moment condition.
inline double kron_moment_norm(const ArchParams& params, const InnovationDist& dist, int s,
                               int mc_samples, std::uint64_t seed, std::uint64_t stream = 0) {
    validate_params(params.omega, params.alpha);
    if (s < 1 || s > 4) throw DomainError("kron moment order s must be in 1..4");
    if (mc_samples < 1) throw DomainError("mc_samples must be >= 1");
    if (!dist.has_moment(2 * s))
        throw DomainError("innovation lacks the required moment of order " + std::to_string(2 * s));
    const int p = params.order();
    double dim = 1.0;
    for (int i = 0; i < s; ++i) dim *= p;
    if (dim > 4096.0) throw DomainError("kron dimension p^s exceeds 4096");

    Rng rng(seed, stream);
    if (p == 1) {
        // scalar fast path: mean of (alpha e^2)^s
        double acc = 0.0;
        for (int i = 0; i < mc_samples; ++i) {
            const double e = dist.sample(rng);
            acc += std::pow(params.alpha[0] * e * e, s);
        }
        return std::abs(acc / mc_samples);
    }

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                                static_cast<Eigen::Index>(dim));
    for (int i = 0; i < mc_samples; ++i) {
        const double e = dist.sample(rng);
        const Eigen::MatrixXd a = detail::companion(params, e * e);
        Eigen::MatrixXd power = a;
        for (int k = 1; k < s; ++k) power = kronecker(power, a).eval();
        sum += power;
    }
    return spectral_norm(sum / mc_samples);
}

// ---------------------------------------------------------------------------
// Combined report
// ---------------------------------------------------------------------------

struct StationarityReport {
    double lyapunov = 0.0;
    double lyapunov_se = 0.0;
    std::optional<double> sigma4_norm; // absent when the 8th moment does not exist
    bool assumption1_ok = false;       // 8th moment finite and ||Sigma_4|| < 1
    bool assumption2_ok = false;       // negative Lyapunov exponent
};

struct StationarityOptions {
    int horizon = 2000;
    int reps = 200;
    int mc_samples = 100000;
    std::uint64_t seed = 0;
};

inline StationarityReport stationarity_report(const ArchParams& params, const InnovationDist& dist,
                                              const StationarityOptions& opt = {}) {
    StationarityReport rep;
    const auto ly = lyapunov_exponent(params, dist, opt.horizon, opt.reps, opt.seed, 1);
    rep.lyapunov = ly.estimate;
    rep.lyapunov_se = ly.stderr_est;
    rep.assumption2_ok = ly.estimate < 0.0;
    if (dist.has_moment(8)) {
        rep.sigma4_norm = kron_moment_norm(params, dist, 4, opt.mc_samples, opt.seed, 2);
        rep.assumption1_ok = *rep.sigma4_norm < 1.0;
    }
    return rep;
}

} // namespace archfit
