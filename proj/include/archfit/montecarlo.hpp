#pragma once

#include <chrono>
#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "archfit/errors.hpp"
#include "archfit/estimators.hpp"
#include "archfit/model.hpp"

namespace archfit {

struct ExperimentConfig {
    int p = 1;
    ArchParams theta0;
    InnovationDist dist = InnovationDist::normal();
    std::vector<int> n_values;
    int reps = 1000;
    std::vector<EstimatorKind> estimators;
    std::uint64_t seed = 0;
    int burn_in = 500;
    bool include_nonconverged = true;
    bool profile_omega = false; // hold omega fixed at theta0.omega in every fit
    int workers = 1;
    OptimOptions optim;
};

struct McRow {
    EstimatorKind estimator = EstimatorKind::LS;
    int n = 0;
    int coord = 0;
    double bias_sq = 0.0;
    double variance = 0.0;
    double mse = 0.0;
    int n_converged = 0;
    int n_used = 0;
};

struct McReport {
    std::vector<McRow> rows;
    ExperimentConfig config;
    double wall_seconds = 0.0;
    int n_failed = 0; // replicate fits that threw
};

struct SummaryRow {
    double bias_sq = 0.0;
    double variance = 0.0;
    double mse = 0.0;
};

/// Per-coordinate squared bias, variance (1/R normalizer) and mean squared
/// error of the replicated estimates; with 1/R the identity
/// mse = bias_sq + variance holds exactly.
inline std::vector<SummaryRow> summarize(const std::vector<Eigen::VectorXd>& thetas,
                                         const ArchParams& theta0) {
    if (thetas.size() < 2) throw DomainError("summarize requires at least 2 replications");
    const Eigen::VectorXd truth = theta0.as_vector();
    const int dim = static_cast<int>(truth.size());
    const int reps = static_cast<int>(thetas.size());

    std::vector<SummaryRow> out(static_cast<std::size_t>(dim));
    for (int c = 0; c < dim; ++c) {
        double mean = 0.0;
        for (const auto& th : thetas) mean += th[c];
        mean /= reps;
        double var = 0.0;
        double mse = 0.0;
        for (const auto& th : thetas) {
            var += (th[c] - mean) * (th[c] - mean);
            mse += (th[c] - truth[c]) * (th[c] - truth[c]);
        }
        out[static_cast<std::size_t>(c)] = {(mean - truth[c]) * (mean - truth[c]),
                                            var / reps, mse / reps};
    }
    return out;
}

namespace detail {

inline Estimate run_one_fit(EstimatorKind kind, const Series& series,
                            const ExperimentConfig& cfg) {
    if (cfg.profile_omega) {
        switch (kind) {
        case EstimatorKind::LS: return fit_ls_fixed_omega(series, cfg.p, cfg.theta0.omega);
        case EstimatorKind::EF: return fit_ef_fixed_omega(series, cfg.p, cfg.theta0.omega);
        case EstimatorKind::QML:
            return fit_qml_fixed_omega(series, cfg.p, cfg.theta0.omega, cfg.optim);
        case EstimatorKind::ML:
            return fit_ml_fixed_omega(series, cfg.p, cfg.dist, cfg.theta0.omega, cfg.optim);
        }
    }
    switch (kind) {
    case EstimatorKind::LS: return fit_ls(series, cfg.p);
    case EstimatorKind::EF: return fit_ef(series, cfg.p);
    case EstimatorKind::QML: return fit_qml(series, cfg.p, cfg.optim);
    case EstimatorKind::ML: return fit_ml(series, cfg.p, cfg.dist, cfg.optim);
    }
    throw DomainError("unknown estimator kind");
}

} // namespace detail

/// Replication harness. Replicate r of the n_values[i] cell simulates with
/// stream i*reps + r, so results are bitwise independent of the worker
/// count. Fit failures are recorded, not fatal; non-converged fits are
/// included or excluded per config.
inline McReport run_experiment(const ExperimentConfig& cfg) {
    validate_params(cfg.theta0.omega, cfg.theta0.alpha);
    if (cfg.theta0.order() != cfg.p) throw DomainError("theta0 order must equal p");
    if (cfg.reps < 1) throw DomainError("reps must be >= 1");
    if (cfg.n_values.empty()) throw DomainError("n_values must be nonempty");
    if (cfg.estimators.empty()) throw DomainError("estimators must be nonempty");

    const auto t0 = std::chrono::steady_clock::now();
    McReport report;
    report.config = cfg;

    const int ne = static_cast<int>(cfg.estimators.size());
    const int dim = cfg.p + 1;

    for (int in = 0; in < static_cast<int>(cfg.n_values.size()); ++in) {
        const int n = cfg.n_values[static_cast<std::size_t>(in)];

        // per replicate, per estimator: theta, converged, ok
        std::vector<Eigen::VectorXd> thetas(static_cast<std::size_t>(cfg.reps * ne));
        std::vector<unsigned char> converged(static_cast<std::size_t>(cfg.reps * ne), 0);
        std::vector<unsigned char> ok(static_cast<std::size_t>(cfg.reps * ne), 0);

        auto run_range = [&](int r_begin, int r_end) {
            for (int r = r_begin; r < r_end; ++r) {
                SimSpec spec{cfg.theta0, cfg.dist, n, cfg.burn_in, cfg.seed,
                             static_cast<std::uint64_t>(in) * static_cast<std::uint64_t>(cfg.reps)
                                 + static_cast<std::uint64_t>(r)};
                Series series = simulate(spec);
                for (int e = 0; e < ne; ++e) {
                    const std::size_t slot = static_cast<std::size_t>(r) * ne
                                             + static_cast<std::size_t>(e);
                    try {
                        Estimate est = detail::run_one_fit(
                            cfg.estimators[static_cast<std::size_t>(e)], series, cfg);
                        thetas[slot] = std::move(est.theta);
                        converged[slot] = est.converged ? 1 : 0;
                        ok[slot] = 1;
                    } catch (const std::exception&) {
                        ok[slot] = 0;
                    }
                }
            }
        };

        const int workers = std::max(1, cfg.workers);
        if (workers == 1 || cfg.reps < 2 * workers) {
            run_range(0, cfg.reps);
        } else {
            std::vector<std::thread> pool;
            const int chunk = (cfg.reps + workers - 1) / workers;
            for (int w = 0; w < workers; ++w) {
                const int lo = w * chunk;
                const int hi = std::min(cfg.reps, lo + chunk);
                if (lo < hi) pool.emplace_back(run_range, lo, hi);
            }
            for (auto& th : pool) th.join();
        }

        // fixed-order reduction
        const Eigen::VectorXd truth = cfg.theta0.as_vector();
        for (int e = 0; e < ne; ++e) {
            std::vector<Eigen::VectorXd> kept;
            kept.reserve(static_cast<std::size_t>(cfg.reps));
            int n_conv = 0;
            for (int r = 0; r < cfg.reps; ++r) {
                const std::size_t slot = static_cast<std::size_t>(r) * ne
                                         + static_cast<std::size_t>(e);
                if (!ok[slot]) {
                    ++report.n_failed;
                    continue;
                }
                if (converged[slot]) ++n_conv;
                if (!converged[slot] && !cfg.include_nonconverged) continue;
                kept.push_back(thetas[slot]);
            }

            for (int c = 0; c < dim; ++c) {
                McRow row;
                row.estimator = cfg.estimators[static_cast<std::size_t>(e)];
                row.n = n;
                row.coord = c;
                row.n_converged = n_conv;
                row.n_used = static_cast<int>(kept.size());
                if (kept.size() >= 2) {
                    const auto summary = summarize(kept, cfg.theta0);
                    row.bias_sq = summary[static_cast<std::size_t>(c)].bias_sq;
                    row.variance = summary[static_cast<std::size_t>(c)].variance;
                    row.mse = summary[static_cast<std::size_t>(c)].mse;
                } else if (kept.size() == 1) {
                    const double dev = kept.front()[c] - truth[c];
                    row.bias_sq = dev * dev;
                    row.variance = 0.0;
                    row.mse = dev * dev;
                }
                report.rows.push_back(row);
            }
        }
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

} // namespace archfit
