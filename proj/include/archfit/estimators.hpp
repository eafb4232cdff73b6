#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "archfit/diagnostics.hpp"
#include "archfit/errors.hpp"
#include "archfit/linalg.hpp"
#include "archfit/model.hpp"
#include "archfit/optim.hpp"

namespace archfit {

enum class EstimatorKind { LS, EF, QML, ML };

inline const char* to_string(EstimatorKind k) {
    switch (k) {
    case EstimatorKind::LS: return "LS";
    case EstimatorKind::EF: return "EF";
    case EstimatorKind::QML: return "QML";
    case EstimatorKind::ML: return "ML";
    }
    return "?";
}

/// A fitted parameter vector with reporting metadata.
///
/// theta = (omega, alpha_1..alpha_p), projected onto omega >= omega_floor,
/// alpha >= 0. acov is the estimated covariance of theta-hat itself
/// (asymptotic matrix divided by the effective sample size); absent when it
/// cannot be formed. var_eps2_hat is the sample variance of the squared
/// standardized residuals x_t^2 / sigma_t^2(theta).
struct Estimate {
    Eigen::VectorXd theta;
    EstimatorKind kind = EstimatorKind::LS;
    std::optional<Eigen::MatrixXd> acov;
    double var_eps2_hat = 0.0;
    bool converged = true;
    int iterations = 0;
    std::optional<double> objective;
};

struct OptimOptions {
    int max_iters = 500;
    double grad_tol = 1e-8;
    double param_tol = 1e-10;
    int multistart = 1;
};

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Projection floor for the intercept, 1e-8 times the sample variance of x^2.
inline double omega_floor(const Series& series) {
    const auto& x2 = series.x2();
    double mean = 0.0;
    for (double v : x2) mean += v;
    mean /= static_cast<double>(x2.size());
    double var = 0.0;
    for (double v : x2) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x2.size());
    return 1e-8 * var;
}

namespace detail {

inline void require_fit_length(const Series& series, int p) {
    if (p < 1) throw DomainError("order p must be >= 1");
    // rank needs at least p+1 regression rows
    if (series.n() - p < p + 1) throw DomainError("series too short: need n - p >= p + 1");
}

/// Weighted normal equations of the regression of x2_t on
/// (1, x2_{t-1}, ..., x2_{t-p}), t = p+1..n. weights has length n-p
/// (nullptr = unit weights).
inline Eigen::VectorXd wls_solve(const Series& series, int p, const double* weights) {
    const auto& x2 = series.x2();
    const int dim = p + 1;
    const int m = series.n() - p;

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd z(dim);
    for (int i = 0; i < m; ++i) {
        z[0] = 1.0;
        for (int j = 1; j <= p; ++j) z[j] = x2[static_cast<std::size_t>(p + i - j)];
        const double w = weights ? weights[i] : 1.0;
        const double y = x2[static_cast<std::size_t>(p + i)];
        for (int a = 0; a < dim; ++a) {
            const double wza = w * z[a];
            rhs[a] += wza * y;
            for (int b = a; b < dim; ++b) gram(a, b) += wza * z[b];
        }
    }
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < a; ++b) gram(a, b) = gram(b, a);

    return spd_solve(gram, rhs, "regression design");
}

inline Eigen::VectorXd project(Eigen::VectorXd theta, double floor) {
    theta[0] = std::max(theta[0], floor);
    for (Eigen::Index j = 1; j < theta.size(); ++j) theta[j] = std::max(theta[j], 0.0);
    return theta;
}

/// Sample variance (1/m) of the squared standardized residuals.
inline double residual_var_eps2(const Series& series, const ArchParams& params) {
    const auto s2 = sigma2_path(params, series);
    const auto& x2 = series.x2();
    const int p = params.order();
    const int m = series.n() - p;
    double mean = 0.0;
    std::vector<double> e2(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        e2[static_cast<std::size_t>(i)] =
            x2[static_cast<std::size_t>(p + i)] / s2[static_cast<std::size_t>(i)];
        mean += e2[static_cast<std::size_t>(i)];
    }
    mean /= m;
    double var = 0.0;
    for (double v : e2) var += (v - mean) * (v - mean);
    return var / m;
}

inline std::optional<Eigen::MatrixXd> try_acov(const Series& series, const ArchParams& at,
                                               CovKind kind, double var_eps2) {
    try {
        const auto mats = moment_matrices(series, at);
        return Eigen::MatrixXd(asymptotic_covariance(kind, mats, var_eps2) / mats.n_used);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace detail

/// Unprojected least-squares solution (the raw regression functional).
inline Eigen::VectorXd ls_functional(const Series& series, int p) {
    detail::require_fit_length(series, p);
    return detail::wls_solve(series, p, nullptr);
}

/// Unprojected weighted least-squares solution for given row weights.
inline Eigen::VectorXd wls_functional(const Series& series, int p,
                                      const std::vector<double>& weights) {
    detail::require_fit_length(series, p);
    if (static_cast<int>(weights.size()) != series.n() - p)
        throw DomainError("weights length must equal n - p");
    return detail::wls_solve(series, p, weights.data());
}

/// Conditional least squares: regress x_t^2 on (1, lagged squares), then
/// project onto the parameter constraints.
inline Estimate fit_ls(const Series& series, int p) {
    const double floor = omega_floor(series);
    Eigen::VectorXd theta = detail::project(ls_functional(series, p), floor);
    const ArchParams params = params_from_vector(theta);

    Estimate est;
    est.theta = std::move(theta);
    est.kind = EstimatorKind::LS;
    est.var_eps2_hat = detail::residual_var_eps2(series, params);
    est.acov = detail::try_acov(series, params, CovKind::LS, est.var_eps2_hat);
    return est;
}

/// Two-step estimating-function fit with an injected first step: weights are
/// 1/sigma_t^4(first_step), then one weighted least-squares solve.
inline Estimate fit_ef_with(const Series& series, int p, const ArchParams& first_step) {
    detail::require_fit_length(series, p);
    if (first_step.order() != p) throw DomainError("first-step order mismatch");

    const double floor = omega_floor(series);
    const auto s2 = sigma2_path(first_step, series);
    std::vector<double> w(s2.size());
    for (std::size_t i = 0; i < s2.size(); ++i) {
        if (s2[i] < floor) throw DegenerateWeights("sigma^2 below omega floor in EF weights");
        w[i] = 1.0 / (s2[i] * s2[i]);
    }

    Eigen::VectorXd theta = detail::project(detail::wls_solve(series, p, w.data()), floor);
    const ArchParams params = params_from_vector(theta);

    Estimate est;
    est.theta = std::move(theta);
    est.kind = EstimatorKind::EF;
    est.var_eps2_hat = detail::residual_var_eps2(series, params);
    est.acov = detail::try_acov(series, params, CovKind::EF, est.var_eps2_hat);
    est.iterations = 1;
    return est;
}

/// Closed-form EF estimator: least squares first step, then weighted least
/// squares with weights 1/sigma_t^4(theta_LS).
inline Estimate fit_ef(const Series& series, int p) {
    const Estimate ls = fit_ls(series, p);
    return fit_ef_with(series, p, params_from_vector(ls.theta));
}

// ---------------------------------------------------------------------------
// Likelihood objectives
// ---------------------------------------------------------------------------

/// Gaussian pseudo negative log-likelihood (constants dropped) and its exact
/// gradient:
///   value = 1/2 sum_t [ log sigma_t^2 + x_t^2 / sigma_t^2 ]
///   grad  = 1/2 sum_t Y_{t-1} (sigma_t^2 - x_t^2) / sigma_t^4
inline std::pair<double, Eigen::VectorXd> gaussian_negloglik(const ArchParams& params,
                                                             const Series& series) {
    validate_params(params.omega, params.alpha);
    const int p = params.order();
    if (series.n() <= p) throw DomainError("series too short: need n > p");

    const auto& x2 = series.x2();
    const int m = series.n() - p;
    double value = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 1);
    for (int i = 0; i < m; ++i) {
        const std::size_t t = static_cast<std::size_t>(p + i);
        const double s2 = detail::conditional_variance(params, x2, t);
        const double y = x2[t];
        value += 0.5 * (std::log(s2) + y / s2);
        const double gscale = 0.5 * (s2 - y) / (s2 * s2);
        grad[0] += gscale;
        for (int j = 1; j <= p; ++j) grad[j] += gscale * x2[t - static_cast<std::size_t>(j)];
    }
    return {value, std::move(grad)};
}

/// Negative log-likelihood -sum_t log[ f_eps(x_t / sigma_t) / sigma_t ] with
/// exact gradient; supports the distributions with an implemented log
/// density (normal, student_t).
inline std::pair<double, Eigen::VectorXd> ml_negloglik(const ArchParams& params,
                                                       const Series& series,
                                                       const InnovationDist& dist) {
    if (!dist.has_log_density()) throw DomainError("log density not implemented for this distribution");
    if (dist.kind() == DistKind::normal) {
        auto [value, grad] = gaussian_negloglik(params, series);
        const int m = series.n() - params.order();
        value += 0.5 * m * 1.8378770664093454836; // m/2 * log(2 pi)
        return {value, std::move(grad)};
    }

    validate_params(params.omega, params.alpha);
    const int p = params.order();
    if (series.n() <= p) throw DomainError("series too short: need n > p");

    const double nu = dist.nu();
    const double d = nu - 2.0;
    const double cnu = -std::lgamma(0.5 * (nu + 1.0)) + std::lgamma(0.5 * nu)
                       + 0.5 * std::log(d * 3.14159265358979323846);

    const auto& x2 = series.x2();
    const int m = series.n() - p;
    double value = static_cast<double>(m) * cnu;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 1);
    for (int i = 0; i < m; ++i) {
        const std::size_t t = static_cast<std::size_t>(p + i);
        const double s2 = detail::conditional_variance(params, x2, t);
        const double z2 = x2[t] / s2;
        value += 0.5 * std::log(s2) + 0.5 * (nu + 1.0) * std::log1p(z2 / d);
        const double gscale = 0.5 / s2 * (1.0 - (nu + 1.0) * z2 / (d + z2));
        grad[0] += gscale;
        for (int j = 1; j <= p; ++j) grad[j] += gscale * x2[t - static_cast<std::size_t>(j)];
    }
    return {value, std::move(grad)};
}

/// Estimating-function score
///   -sum_t Y_{t-1} (x_t^2 - sigma_t^2) / (var_eps2 * sigma_t^4)
/// evaluated over t = p+1..n. With var_eps2 = 2 this equals the Gaussian
/// pseudo-likelihood gradient.
inline Eigen::VectorXd ef_score(const ArchParams& params, const Series& series, double var_eps2) {
    validate_params(params.omega, params.alpha);
    if (!(var_eps2 > 0.0)) throw DomainError("var_eps2 must be > 0");
    const int p = params.order();
    if (series.n() <= p) throw DomainError("series too short: need n > p");

    const auto& x2 = series.x2();
    const int m = series.n() - p;
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p + 1);
    for (int i = 0; i < m; ++i) {
        const std::size_t t = static_cast<std::size_t>(p + i);
        const double s2 = detail::conditional_variance(params, x2, t);
        const double gscale = -(x2[t] - s2) / (var_eps2 * s2 * s2);
        score[0] += gscale;
        for (int j = 1; j <= p; ++j) score[j] += gscale * x2[t - static_cast<std::size_t>(j)];
    }
    return score;
}

// ---------------------------------------------------------------------------
// Optimization-based fits
// ---------------------------------------------------------------------------

namespace detail {

constexpr double kLogFloor = -40.0; // exp(-40) ~ 4e-18; boundary handled by clamping

/// theta_j = exp(max(u_j, -40)); chain factor exp(u_j) or 0 at the clamp.
inline Eigen::VectorXd theta_from_log(const Eigen::VectorXd& u) {
    Eigen::VectorXd th(u.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) th[j] = std::exp(std::max(u[j], kLogFloor));
    return th;
}

template <typename NegLogLik>
Estimate fit_by_bfgs(const Series& series, int p, const OptimOptions& opts,
                     const NegLogLik& nll, EstimatorKind kind, CovKind cov_kind,
                     std::optional<double> fixed_omega = std::nullopt) {
    require_fit_length(series, p);
    const double floor = omega_floor(series);
    const Eigen::VectorXd theta_ls = [&] {
        if (!fixed_omega) return project(ls_functional(series, p), floor);
        Eigen::VectorXd th(p + 1);
        th[0] = *fixed_omega;
        th.tail(p) = project(ls_functional(series, p), floor).tail(p);
        return th;
    }();

    // optimize u with theta = exp(u); with fixed omega only the alphas vary
    const int nfree = fixed_omega ? p : p + 1;
    const auto to_theta = [&](const Eigen::VectorXd& u) {
        if (!fixed_omega) return theta_from_log(u);
        Eigen::VectorXd th(p + 1);
        th[0] = *fixed_omega;
        th.tail(p) = theta_from_log(u);
        return th;
    };

    // objective normalized per observation so grad_tol has a data-size-free
    // scale and the line search can resolve decreases near the optimum
    const double inv_m = 1.0 / static_cast<double>(series.n() - p);
    GradObjective objective = [&](const Eigen::VectorXd& u, Eigen::VectorXd& grad) -> double {
        const Eigen::VectorXd th = to_theta(u);
        if (!th.allFinite()) { // exp overflow on a wild trial step: reject
            grad = Eigen::VectorXd::Zero(nfree);
            return std::numeric_limits<double>::infinity();
        }
        ArchParams params{th[0], th.tail(p)};
        auto [value, gth] = nll(params, series);
        grad.resize(nfree);
        const int off = fixed_omega ? 1 : 0;
        for (int j = 0; j < nfree; ++j)
            grad[j] = u[j] > kLogFloor ? gth[j + off] * th[j + off] * inv_m : 0.0;
        return value * inv_m;
    };

    Eigen::VectorXd u0(nfree);
    {
        const int off = fixed_omega ? 1 : 0;
        for (int j = 0; j < nfree; ++j) {
            const double v = theta_ls[j + off];
            u0[j] = v > 0.0 ? std::max(std::log(v), kLogFloor) : kLogFloor;
        }
    }

    BfgsOptions bopt{opts.max_iters, opts.grad_tol, opts.param_tol};
    BfgsResult best = minimize_bfgs(objective, u0, bopt);
    int total_iters = best.iterations;
    for (int s = 1; s < opts.multistart; ++s) {
        Eigen::VectorXd us = u0;
        for (int j = 0; j < nfree; ++j)
            us[j] += 0.6 * s * (((s + j) % 2 == 0) ? 1.0 : -1.0);
        BfgsResult r = minimize_bfgs(objective, us, bopt);
        total_iters += r.iterations;
        if (std::isfinite(r.value) && r.value < best.value) best = std::move(r);
    }

    Eigen::VectorXd theta = project(to_theta(best.x), floor);
    const ArchParams params = params_from_vector(theta);

    Estimate est;
    est.theta = std::move(theta);
    est.kind = kind;
    est.var_eps2_hat = residual_var_eps2(series, params);
    est.acov = try_acov(series, params, cov_kind, cov_kind == CovKind::MLNormal
                                                      ? 2.0
                                                      : est.var_eps2_hat);
    est.converged = best.converged;
    est.iterations = total_iters;
    est.objective = best.value / inv_m; // unnormalized scale
    return est;
}

} // namespace detail

/// Gaussian quasi-maximum likelihood: minimizes gaussian_negloglik over the
/// constraint set via log-reparameterization, initialized at the projected
/// least-squares fit. Non-convergence is soft: the best iterate is returned
/// with converged = false.
inline Estimate fit_qml(const Series& series, int p, const OptimOptions& opts = {}) {
    return detail::fit_by_bfgs(
        series, p, opts,
        [](const ArchParams& th, const Series& s) { return gaussian_negloglik(th, s); },
        EstimatorKind::QML, CovKind::QML);
}

/// Maximum likelihood under the given innovation law. For the normal law the
/// objective coincides with the QML one, so that optimization path is reused.
inline Estimate fit_ml(const Series& series, int p, const InnovationDist& dist,
                       const OptimOptions& opts = {}) {
    if (!dist.has_log_density()) throw DomainError("log density not implemented for this distribution");
    if (dist.kind() == DistKind::normal) {
        Estimate est = detail::fit_by_bfgs(
            series, p, opts,
            [](const ArchParams& th, const Series& s) { return gaussian_negloglik(th, s); },
            EstimatorKind::ML, CovKind::MLNormal);
        return est;
    }
    return detail::fit_by_bfgs(
        series, p, opts,
        [&dist](const ArchParams& th, const Series& s) { return ml_negloglik(th, s, dist); },
        EstimatorKind::ML, CovKind::QML);
}

// ---------------------------------------------------------------------------
// Known-intercept variants (1-parameter-per-lag protocol)
// ---------------------------------------------------------------------------

/// Least squares with the intercept held at a known omega: regress
/// (x_t^2 - omega) on the lagged squares without intercept column.
inline Estimate fit_ls_fixed_omega(const Series& series, int p, double omega0) {
    detail::require_fit_length(series, p);
    if (!(omega0 > 0.0)) throw DomainError("omega must be > 0");
    const auto& x2 = series.x2();
    const int m = series.n() - p;

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd z(p);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < p; ++j) z[j] = x2[static_cast<std::size_t>(p + i - 1 - j)];
        const double y = x2[static_cast<std::size_t>(p + i)] - omega0;
        for (int a = 0; a < p; ++a) {
            rhs[a] += z[a] * y;
            for (int b = a; b < p; ++b) gram(a, b) += z[a] * z[b];
        }
    }
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < a; ++b) gram(a, b) = gram(b, a);

    Eigen::VectorXd alpha = spd_solve(gram, rhs, "regression design");
    Eigen::VectorXd theta(p + 1);
    theta[0] = omega0;
    for (int j = 0; j < p; ++j) theta[j + 1] = std::max(alpha[j], 0.0);

    Estimate est;
    est.theta = std::move(theta);
    est.kind = EstimatorKind::LS;
    const ArchParams params = params_from_vector(est.theta);
    est.var_eps2_hat = detail::residual_var_eps2(series, params);
    return est;
}

inline Estimate fit_ef_fixed_omega(const Series& series, int p, double omega0) {
    const Estimate ls = fit_ls_fixed_omega(series, p, omega0);
    const ArchParams first = params_from_vector(ls.theta);
    const auto s2 = sigma2_path(first, series);
    const auto& x2 = series.x2();
    const int m = series.n() - p;

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd z(p);
    for (int i = 0; i < m; ++i) {
        const double w = 1.0 / (s2[static_cast<std::size_t>(i)] * s2[static_cast<std::size_t>(i)]);
        for (int j = 0; j < p; ++j) z[j] = x2[static_cast<std::size_t>(p + i - 1 - j)];
        const double y = x2[static_cast<std::size_t>(p + i)] - omega0;
        for (int a = 0; a < p; ++a) {
            rhs[a] += w * z[a] * y;
            for (int b = a; b < p; ++b) gram(a, b) += w * z[a] * z[b];
        }
    }
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < a; ++b) gram(a, b) = gram(b, a);

    Eigen::VectorXd alpha = spd_solve(gram, rhs, "regression design");
    Eigen::VectorXd theta(p + 1);
    theta[0] = omega0;
    for (int j = 0; j < p; ++j) theta[j + 1] = std::max(alpha[j], 0.0);

    Estimate est;
    est.theta = std::move(theta);
    est.kind = EstimatorKind::EF;
    const ArchParams params = params_from_vector(est.theta);
    est.var_eps2_hat = detail::residual_var_eps2(series, params);
    est.iterations = 1;
    return est;
}

inline Estimate fit_qml_fixed_omega(const Series& series, int p, double omega0,
                                    const OptimOptions& opts = {}) {
    return detail::fit_by_bfgs(
        series, p, opts,
        [](const ArchParams& th, const Series& s) { return gaussian_negloglik(th, s); },
        EstimatorKind::QML, CovKind::QML, omega0);
}

inline Estimate fit_ml_fixed_omega(const Series& series, int p, const InnovationDist& dist,
                                   double omega0, const OptimOptions& opts = {}) {
    if (!dist.has_log_density()) throw DomainError("log density not implemented for this distribution");
    if (dist.kind() == DistKind::normal) {
        Estimate est = detail::fit_by_bfgs(
            series, p, opts,
            [](const ArchParams& th, const Series& s) { return gaussian_negloglik(th, s); },
            EstimatorKind::ML, CovKind::MLNormal, omega0);
        return est;
    }
    return detail::fit_by_bfgs(
        series, p, opts,
        [&dist](const ArchParams& th, const Series& s) { return ml_negloglik(th, s, dist); },
        EstimatorKind::ML, CovKind::QML, omega0);
}

} // namespace archfit
