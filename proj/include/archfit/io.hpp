#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "archfit/errors.hpp"
#include "archfit/estimators.hpp"
#include "archfit/influence.hpp"
#include "archfit/model.hpp"
#include "archfit/montecarlo.hpp"

namespace archfit {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// number formatting: %.17g round-trips doubles through text
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// series files: plain text (one value per line) or CSV with header "t,x"
// ---------------------------------------------------------------------------

inline std::vector<double> read_series_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open series file: " + path);
    std::vector<double> x;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        if (first && line.find("t,") == 0) { // csv header
            first = false;
            continue;
        }
        first = false;
        const auto comma = line.find(',');
        const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
        try {
            x.push_back(std::stod(field));
        } catch (const std::exception&) {
            throw DomainError("cannot parse series value: '" + line + "'");
        }
    }
    if (x.empty()) throw DomainError("series file is empty: " + path);
    return x;
}

inline void write_series_txt(const std::string& path, const std::vector<double>& x) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open output file: " + path);
    for (double v : x) out << format_double(v) << "\n";
}

inline void write_series_csv(const std::string& path, const std::vector<double>& x) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open output file: " + path);
    out << "t,x\n";
    for (std::size_t i = 0; i < x.size(); ++i)
        out << (i + 1) << "," << format_double(x[i]) << "\n";
}

// ---------------------------------------------------------------------------
// distributions <-> tokens ("normal", "t5", "double_exponential" | "laplace",
// "logistic", "gamma:<shape>")
// ---------------------------------------------------------------------------

inline InnovationDist parse_dist(const std::string& token) {
    if (token == "normal" || token == "gaussian") return InnovationDist::normal();
    if (token == "double_exponential" || token == "laplace")
        return InnovationDist::double_exponential();
    if (token == "logistic") return InnovationDist::logistic();
    if (token.rfind("gamma:", 0) == 0) {
        try {
            return InnovationDist::gamma_normalized(std::stod(token.substr(6)));
        } catch (const DomainError&) {
            throw;
        } catch (const std::exception&) {
            throw DomainError("cannot parse gamma shape in '" + token + "'");
        }
    }
    if (!token.empty() && token[0] == 't') {
        try {
            return InnovationDist::student_t(std::stod(token.substr(1)));
        } catch (const DomainError&) {
            throw;
        } catch (const std::exception&) {
        }
    }
    throw DomainError("unknown distribution '" + token
                      + "' (expected normal, t<nu>, double_exponential, logistic, gamma:<shape>)");
}

inline EstimatorKind parse_estimator(std::string token) {
    for (auto& ch : token) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (token == "ls") return EstimatorKind::LS;
    if (token == "ef") return EstimatorKind::EF;
    if (token == "qml") return EstimatorKind::QML;
    if (token == "ml") return EstimatorKind::ML;
    throw DomainError("unknown estimator '" + token + "' (expected ls, ef, qml, ml)");
}

// ---------------------------------------------------------------------------
// JSON views
// ---------------------------------------------------------------------------

inline json to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

inline json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline json to_json(const Estimate& est) {
    json j;
    j["kind"] = to_string(est.kind);
    j["theta"] = to_json(est.theta);
    j["acov"] = est.acov ? to_json(*est.acov) : json(nullptr);
    j["var_eps2_hat"] = est.var_eps2_hat;
    j["converged"] = est.converged;
    j["iterations"] = est.iterations;
    return j;
}

inline json to_json(const StationarityReport& rep) {
    json j;
    j["lyapunov"] = rep.lyapunov;
    j["lyapunov_se"] = rep.lyapunov_se;
    j["sigma4_norm"] = rep.sigma4_norm ? json(*rep.sigma4_norm) : json(nullptr);
    j["assumption1_ok"] = rep.assumption1_ok;
    j["assumption2_ok"] = rep.assumption2_ok;
    return j;
}

inline json to_json(const InfluenceResult& res) {
    json j;
    j["if_ls"] = to_json(res.if_ls);
    j["if_ef"] = res.if_ef ? to_json(*res.if_ef) : json(nullptr);
    j["fd_check"] = res.fd_check ? to_json(*res.fd_check) : json(nullptr);
    j["delta_used"] = res.delta_used;
    return j;
}

inline json to_json(const McReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"estimator", to_string(r.estimator)},
                        {"n", r.n},
                        {"coord", r.coord},
                        {"bias_sq", r.bias_sq},
                        {"variance", r.variance},
                        {"mse", r.mse},
                        {"n_converged", r.n_converged},
                        {"n_used", r.n_used}});
    }
    json estimators = json::array();
    for (auto e : report.config.estimators) estimators.push_back(to_string(e));
    json cfg{{"p", report.config.p},
             {"omega0", report.config.theta0.omega},
             {"alpha0", to_json(report.config.theta0.alpha)},
             {"dist", report.config.dist.name()},
             {"n_values", report.config.n_values},
             {"reps", report.config.reps},
             {"estimators", estimators},
             {"seed", report.config.seed},
             {"burn_in", report.config.burn_in},
             {"include_nonconverged", report.config.include_nonconverged},
             {"profile_omega", report.config.profile_omega}};
    return json{{"rows", rows},
                {"config", cfg},
                {"wall_seconds", report.wall_seconds},
                {"n_failed", report.n_failed}};
}

inline std::string mcreport_csv(const McReport& report) {
    std::ostringstream out;
    out << "estimator,n,coord,bias_sq,variance,mse,n_converged\n";
    for (const auto& r : report.rows) {
        out << to_string(r.estimator) << "," << r.n << "," << r.coord << ","
            << format_double(r.bias_sq) << "," << format_double(r.variance) << ","
            << format_double(r.mse) << "," << r.n_converged << "\n";
    }
    return out.str();
}

/// Experiment config from JSON. Required: omega0, alpha0, reps. Optional:
/// p (defaults to len(alpha0)), dist, n_values, estimators, seed, burn_in,
/// include_nonconverged, profile_omega, workers, optimizer settings.
inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    if (!j.contains("omega0") || !j.contains("alpha0") || !j.contains("reps"))
        throw DomainError("experiment config requires omega0, alpha0, reps");
    std::vector<double> alpha0 = j.at("alpha0").get<std::vector<double>>();
    cfg.theta0 = validate_params(j.at("omega0").get<double>(), alpha0);
    cfg.p = j.value("p", cfg.theta0.order());
    cfg.dist = parse_dist(j.value("dist", std::string("normal")));
    cfg.n_values = j.value("n_values", std::vector<int>{500});
    cfg.reps = j.at("reps").get<int>();
    for (const auto& tok : j.value("estimators", std::vector<std::string>{"ls", "ef", "qml", "ml"}))
        cfg.estimators.push_back(parse_estimator(tok));
    cfg.seed = j.value("seed", 0ULL);
    cfg.burn_in = j.value("burn_in", 500);
    cfg.include_nonconverged = j.value("include_nonconverged", true);
    cfg.profile_omega = j.value("profile_omega", false);
    cfg.workers = j.value("workers", 1);
    cfg.optim.max_iters = j.value("max_iters", cfg.optim.max_iters);
    cfg.optim.grad_tol = j.value("grad_tol", cfg.optim.grad_tol);
    cfg.optim.param_tol = j.value("param_tol", cfg.optim.param_tol);
    cfg.optim.multistart = j.value("multistart", cfg.optim.multistart);
    return cfg;
}

} // namespace archfit
