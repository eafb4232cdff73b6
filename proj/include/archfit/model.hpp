#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "archfit/errors.hpp"
#include "archfit/rng.hpp"

namespace archfit {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// ARCH(p) parameter vector: sigma_t^2 = omega + sum_j alpha[j] * x_{t-j}^2.
///
/// Invariants: omega > 0, alpha[j] >= 0, all finite. alpha[p-1] may be zero
/// (fits are allowed to sit on the boundary).
struct ArchParams {
    double omega = 1.0;
    Eigen::VectorXd alpha;

    int order() const { return static_cast<int>(alpha.size()); }

    Eigen::VectorXd as_vector() const {
        Eigen::VectorXd th(alpha.size() + 1);
        th[0] = omega;
        th.tail(alpha.size()) = alpha;
        return th;
    }
};

inline ArchParams validate_params(double omega, const Eigen::VectorXd& alpha) {
    if (!std::isfinite(omega)) throw DomainError("omega must be finite");
    if (omega <= 0.0) throw DomainError("omega must be > 0");
    if (alpha.size() < 1) throw DomainError("order p must be >= 1");
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        if (!std::isfinite(alpha[j])) throw DomainError("alpha must be finite");
        if (alpha[j] < 0.0) throw DomainError("alpha[" + std::to_string(j) + "] must be >= 0");
    }
    return ArchParams{omega, alpha};
}

inline ArchParams validate_params(double omega, const std::vector<double>& alpha) {
    return validate_params(omega, Eigen::Map<const Eigen::VectorXd>(alpha.data(),
                                      static_cast<Eigen::Index>(alpha.size())));
}

inline ArchParams params_from_vector(const Eigen::VectorXd& theta) {
    if (theta.size() < 2) throw DomainError("theta must have length p+1 >= 2");
    return validate_params(theta[0], Eigen::VectorXd(theta.tail(theta.size() - 1)));
}

// ---------------------------------------------------------------------------
// Innovation distributions
// ---------------------------------------------------------------------------

enum class DistKind { normal, student_t, double_exponential, logistic, gamma_normalized };

/// Innovation law standardized to mean 0, variance 1.
///
/// student_t requires nu > 4 (finite fourth moment); draws are raw t_nu
/// scaled by sqrt((nu-2)/nu). gamma_normalized(k) draws are (G-k)/sqrt(k)
/// with G ~ Gamma(k,1).
class InnovationDist {
public:
    static InnovationDist normal() { return InnovationDist(DistKind::normal, 0.0); }

    static InnovationDist student_t(double nu) {
        if (!(nu > 4.0)) throw DomainError("student_t requires nu > 4 (finite fourth moment)");
        return InnovationDist(DistKind::student_t, nu);
    }

    static InnovationDist double_exponential() {
        return InnovationDist(DistKind::double_exponential, 0.0);
    }

    static InnovationDist logistic() { return InnovationDist(DistKind::logistic, 0.0); }

    static InnovationDist gamma_normalized(double shape) {
        if (!(shape > 0.0)) throw DomainError("gamma_normalized requires shape > 0");
        return InnovationDist(DistKind::gamma_normalized, shape);
    }

    DistKind kind() const { return kind_; }
    double nu() const { return param_; }
    double shape() const { return param_; }

    double sample(Rng& rng) const {
        switch (kind_) {
        case DistKind::normal:
            return rng.normal();
        case DistKind::student_t: {
            const double z = rng.normal();
            const double v = rng.chi_square(param_);
            return std::sqrt((param_ - 2.0) / param_) * z / std::sqrt(v / param_);
        }
        case DistKind::double_exponential: {
            // inverse CDF of Laplace(0, 1/sqrt(2)), variance 1
            const double u = rng.uniform();
            const double b = 0.70710678118654752440;
            return u < 0.5 ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
        }
        case DistKind::logistic: {
            const double u = rng.uniform();
            const double s = 0.55132889542179204777; // sqrt(3)/pi
            return s * std::log(u / (1.0 - u));
        }
        case DistKind::gamma_normalized: {
            double g;
            if (param_ >= 1.0) {
                g = rng.gamma(param_);
            } else {
                // boost: G(k) = G(k+1) * U^(1/k)
                g = rng.gamma(param_ + 1.0) * std::pow(rng.uniform(), 1.0 / param_);
            }
            return (g - param_) / std::sqrt(param_);
        }
        }
        throw DomainError("unknown distribution kind");
    }

    /// E eps^4 - 3; Var(eps^2) = kurtosis_excess() + 2.
    double kurtosis_excess() const {
        switch (kind_) {
        case DistKind::normal: return 0.0;
        case DistKind::student_t: return 6.0 / (param_ - 4.0);
        case DistKind::double_exponential: return 3.0;
        case DistKind::logistic: return 1.2;
        case DistKind::gamma_normalized: return 6.0 / param_;
        }
        throw DomainError("unknown distribution kind");
    }

    double var_eps2() const { return kurtosis_excess() + 2.0; }

    /// E eps^8 when it exists (student_t needs nu > 8).
    std::optional<double> eighth_moment() const {
        switch (kind_) {
        case DistKind::normal: return 105.0;
        case DistKind::student_t: {
            const double nu = param_;
            if (!(nu > 8.0)) return std::nullopt;
            const double d = nu - 2.0;
            return 105.0 * d * d * d / ((nu - 4.0) * (nu - 6.0) * (nu - 8.0));
        }
        case DistKind::double_exponential: return 2520.0;
        case DistKind::logistic: return 10287.0 / 15.0;
        case DistKind::gamma_normalized: {
            const double k = param_;
            return 105.0 + 2380.0 / k + 7308.0 / (k * k) + 5040.0 / (k * k * k);
        }
        }
        return std::nullopt;
    }

    /// Finite absolute moment of the given order?
    bool has_moment(int order) const {
        if (kind_ == DistKind::student_t) return param_ > order;
        return true;
    }

    bool has_log_density() const {
        return kind_ == DistKind::normal || kind_ == DistKind::student_t;
    }

    double log_density(double x) const {
        switch (kind_) {
        case DistKind::normal:
            return -0.91893853320467274178 - 0.5 * x * x; // -log(sqrt(2 pi)) - x^2/2
        case DistKind::student_t: {
            const double nu = param_;
            const double d = nu - 2.0; // scaled-t: 1 + x^2/(nu-2) inside the power
            return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu)
                   - 0.5 * std::log(d * 3.14159265358979323846)
                   - 0.5 * (nu + 1.0) * std::log1p(x * x / d);
        }
        default:
            throw DomainError("log density not implemented for this distribution");
        }
    }

    std::string name() const {
        switch (kind_) {
        case DistKind::normal: return "normal";
        case DistKind::student_t: {
            const double r = std::round(param_);
            if (r == param_) return "t" + std::to_string(static_cast<long long>(r));
            return "t" + std::to_string(param_);
        }
        case DistKind::double_exponential: return "double_exponential";
        case DistKind::logistic: return "logistic";
        case DistKind::gamma_normalized: return "gamma:" + std::to_string(param_);
        }
        return "unknown";
    }

private:
    InnovationDist(DistKind kind, double param) : kind_(kind), param_(param) {}

    DistKind kind_;
    double param_;
};

// ---------------------------------------------------------------------------
// Observed series
// ---------------------------------------------------------------------------

/// An observed realization x_1..x_n with its squared series cached.
class Series {
public:
    explicit Series(std::vector<double> x) : x_(std::move(x)) {
        x2_.resize(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) {
            if (!std::isfinite(x_[i])) throw DomainError("series values must be finite");
            x2_[i] = x_[i] * x_[i];
        }
    }

    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& x2() const { return x2_; }
    int n() const { return static_cast<int>(x_.size()); }

private:
    std::vector<double> x_;
    std::vector<double> x2_;
};

struct SimSpec {
    ArchParams params;
    InnovationDist dist = InnovationDist::normal();
    int n = 0;
    int burn_in = 500;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

namespace detail {

/// omega + sum_j alpha[j] * x2[t-1-j]; t indexes x2, t >= p.
/// Shared by simulate() and sigma2_path() so recomputed paths are bitwise
/// identical to the ones used during generation.
inline double conditional_variance(const ArchParams& params, const std::vector<double>& x2,
                                   std::size_t t) {
    double s2 = params.omega;
    for (int j = 0; j < params.order(); ++j) s2 += params.alpha[j] * x2[t - 1 - j];
    return s2;
}

} // namespace detail

/// Conditional-variance path sigma_t^2 for t = p+1..n (one entry per t with
/// all regressors observed; no presample values are invented).
inline std::vector<double> sigma2_path(const ArchParams& params, const Series& series) {
    const int p = params.order();
    if (series.n() <= p) throw DomainError("series too short: need n > p");
    std::vector<double> out(static_cast<std::size_t>(series.n() - p));
    for (std::size_t t = static_cast<std::size_t>(p); t < series.x2().size(); ++t)
        out[t - p] = detail::conditional_variance(params, series.x2(), t);
    return out;
}

/// Draw i.i.d. standardized innovations.
inline std::vector<double> sample_innovations(const InnovationDist& dist, int n,
                                              std::uint64_t seed, std::uint64_t stream = 0) {
    if (n < 1) throw DomainError("sample_innovations requires n >= 1");
    Rng rng(seed, stream);
    std::vector<double> out(static_cast<std::size_t>(n));
    for (auto& v : out) v = dist.sample(rng);
    return out;
}

/// Simulate an ARCH(p) path.
///
/// Presample squares start at the unconditional second moment
/// omega/(1 - sum alpha) when sum alpha < 1, else at omega; the first
/// burn_in draws are discarded. Deterministic given (seed, stream).
inline Series simulate(const SimSpec& spec) {
    validate_params(spec.params.omega, spec.params.alpha);
    if (spec.n < 1) throw DomainError("simulate requires n >= 1");
    if (spec.burn_in < 0) throw DomainError("burn_in must be >= 0");

    const int p = spec.params.order();
    const double asum = spec.params.alpha.sum();
    const double presample = asum < 1.0 ? spec.params.omega / (1.0 - asum) : spec.params.omega;

    const std::size_t total = static_cast<std::size_t>(p + spec.burn_in + spec.n);
    std::vector<double> x2(total, presample);
    std::vector<double> x(static_cast<std::size_t>(spec.n));

    Rng rng(spec.seed, spec.stream);
    for (std::size_t t = static_cast<std::size_t>(p); t < total; ++t) {
        const double s2 = detail::conditional_variance(spec.params, x2, t);
        const double xt = std::sqrt(s2) * spec.dist.sample(rng);
        x2[t] = xt * xt;
        const std::size_t keep_from = static_cast<std::size_t>(p + spec.burn_in);
        if (t >= keep_from) x[t - keep_from] = xt;
    }
    return Series(std::move(x));
}

} // namespace archfit
