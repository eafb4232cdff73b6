// archfit command-line front end: simulate, fit, diagnose, influence,
// experiment. Exit codes: 0 ok, 1 runtime failure, 2 usage/config error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "archfit/archfit.hpp"

namespace {

using archfit::json;

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& tok : split_csv(s)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw archfit::DomainError("cannot parse number '" + tok + "'");
        }
    }
    return out;
}

std::uint64_t seed_or_env(std::optional<std::uint64_t> flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("ARCHFIT_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw archfit::DomainError("ARCHFIT_SEED is not an integer");
        }
    }
    return 0;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw archfit::DomainError("cannot open output file: " + path);
    out << text;
}

struct SimulateArgs {
    double omega = 1.0;
    std::string alpha;
    std::string dist = "normal";
    int n = 0;
    int burn_in = 500;
    std::optional<std::uint64_t> seed;
    std::uint64_t stream = 0;
    std::string output;
    std::string format = "csv";
};

int cmd_simulate(const SimulateArgs& a) {
    const auto params = archfit::validate_params(a.omega, parse_doubles(a.alpha));
    archfit::SimSpec spec{params, archfit::parse_dist(a.dist), a.n, a.burn_in,
                          seed_or_env(a.seed), a.stream};
    const archfit::Series series = archfit::simulate(spec);
    if (a.format == "csv")
        archfit::write_series_csv(a.output, series.x());
    else if (a.format == "txt")
        archfit::write_series_txt(a.output, series.x());
    else
        throw archfit::DomainError("unknown format '" + a.format + "' (expected csv or txt)");
    return 0;
}

struct FitArgs {
    std::string input;
    int p = 1;
    std::string estimator = "all";
    std::string dist = "normal";
    std::string output;
    archfit::OptimOptions optim;
    std::optional<double> fixed_omega;
};

int cmd_fit(const FitArgs& a) {
    const archfit::Series series(archfit::read_series_file(a.input));
    const auto dist = archfit::parse_dist(a.dist);

    std::vector<archfit::EstimatorKind> kinds;
    if (a.estimator == "all") {
        kinds = {archfit::EstimatorKind::LS, archfit::EstimatorKind::EF,
                 archfit::EstimatorKind::QML, archfit::EstimatorKind::ML};
    } else {
        for (const auto& tok : split_csv(a.estimator)) kinds.push_back(archfit::parse_estimator(tok));
    }

    json out = json::array();
    for (auto kind : kinds) {
        archfit::Estimate est;
        if (a.fixed_omega) {
            switch (kind) {
            case archfit::EstimatorKind::LS:
                est = archfit::fit_ls_fixed_omega(series, a.p, *a.fixed_omega);
                break;
            case archfit::EstimatorKind::EF:
                est = archfit::fit_ef_fixed_omega(series, a.p, *a.fixed_omega);
                break;
            case archfit::EstimatorKind::QML:
                est = archfit::fit_qml_fixed_omega(series, a.p, *a.fixed_omega, a.optim);
                break;
            case archfit::EstimatorKind::ML:
                est = archfit::fit_ml_fixed_omega(series, a.p, dist, *a.fixed_omega, a.optim);
                break;
            }
        } else {
            switch (kind) {
            case archfit::EstimatorKind::LS: est = archfit::fit_ls(series, a.p); break;
            case archfit::EstimatorKind::EF: est = archfit::fit_ef(series, a.p); break;
            case archfit::EstimatorKind::QML: est = archfit::fit_qml(series, a.p, a.optim); break;
            case archfit::EstimatorKind::ML: est = archfit::fit_ml(series, a.p, dist, a.optim); break;
            }
        }
        out.push_back(archfit::to_json(est));
    }
    write_text(a.output, out.dump(2) + "\n");
    return 0;
}

struct DiagnoseArgs {
    double omega = 1.0;
    std::string alpha;
    std::string dist = "normal";
    int horizon = 2000;
    int reps = 200;
    int mc_samples = 100000;
    std::optional<std::uint64_t> seed;
    std::string output;
};

int cmd_diagnose(const DiagnoseArgs& a) {
    const auto params = archfit::validate_params(a.omega, parse_doubles(a.alpha));
    archfit::StationarityOptions opt;
    opt.horizon = a.horizon;
    opt.reps = a.reps;
    opt.mc_samples = a.mc_samples;
    opt.seed = seed_or_env(a.seed);
    const auto rep = archfit::stationarity_report(params, archfit::parse_dist(a.dist), opt);
    write_text(a.output, archfit::to_json(rep).dump(2) + "\n");
    return 0;
}

struct InfluenceArgs {
    std::string input;
    int p = 1;
    std::optional<int> point_index;
    double magnitude = 1.0;
    bool self_contamination = false;
    std::string contamination_file;
    double delta = 1e-4;
    bool no_ef = false;
    bool no_oracle = false;
    std::string output;
};

archfit::Contamination load_contamination_file(const std::string& path, int n, int p) {
    std::ifstream in(path);
    if (!in) throw archfit::DomainError("cannot open contamination file: " + path);
    archfit::Contamination c;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        for (auto& ch : line)
            if (ch == ',') ch = ' ';
        std::istringstream ss(line);
        Eigen::VectorXd v(p);
        for (int j = 0; j < p; ++j)
            if (!(ss >> v[j])) throw archfit::DomainError("contamination row needs p values");
        c.v.push_back(std::move(v));
    }
    c.description = path;
    if (static_cast<int>(c.v.size()) != n - p + 1)
        throw archfit::DomainError("contamination file must have n-p+1 rows");
    return c;
}

int cmd_influence(const InfluenceArgs& a) {
    const archfit::Series series(archfit::read_series_file(a.input));
    archfit::Contamination c;
    if (a.self_contamination)
        c = archfit::Contamination::self(series, a.p);
    else if (a.point_index)
        c = archfit::Contamination::point_mass(series.n(), a.p, *a.point_index, a.magnitude);
    else if (!a.contamination_file.empty())
        c = load_contamination_file(a.contamination_file, series.n(), a.p);
    else
        throw archfit::DomainError("choose --self, --point-index, or --contamination");

    const auto res = archfit::influence_report(series, c, a.p, a.delta, !a.no_ef, !a.no_oracle);
    write_text(a.output, archfit::to_json(res).dump(2) + "\n");
    return 0;
}

struct ExperimentArgs {
    std::string config_file;
    double omega0 = 1.0;
    std::string alpha0;
    std::string dist = "normal";
    std::string n_list = "500";
    int reps = 0;
    std::string estimators = "ls,ef,qml,ml";
    std::optional<std::uint64_t> seed;
    int burn_in = 500;
    bool exclude_nonconverged = false;
    bool profile_omega = false;
    int workers = 1;
    std::string format = "csv";
    std::string output;
    archfit::OptimOptions optim;
};

int cmd_experiment(const ExperimentArgs& a) {
    std::vector<archfit::ExperimentConfig> cells;
    if (!a.config_file.empty()) {
        std::ifstream in(a.config_file);
        if (!in) throw archfit::DomainError("cannot open config file: " + a.config_file);
        json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw archfit::DomainError(std::string("config parse error: ") + e.what());
        }
        cells.push_back(archfit::config_from_json(j));
        if (a.workers > 1) cells.back().workers = a.workers;
    } else {
        if (a.reps < 1) throw archfit::DomainError("--reps is required and must be >= 1");
        if (a.alpha0.empty()) throw archfit::DomainError("--alpha0 is required");
        const auto alphas = parse_doubles(a.alpha0);
        std::vector<int> ns;
        for (const auto& tok : split_csv(a.n_list)) ns.push_back(std::stoi(tok));
        for (const auto& dist_tok : split_csv(a.dist)) {
            for (double a0 : alphas) {
                archfit::ExperimentConfig cfg;
                cfg.p = 1;
                cfg.theta0 = archfit::validate_params(a.omega0, std::vector<double>{a0});
                cfg.dist = archfit::parse_dist(dist_tok);
                cfg.n_values = ns;
                cfg.reps = a.reps;
                for (const auto& tok : split_csv(a.estimators))
                    cfg.estimators.push_back(archfit::parse_estimator(tok));
                cfg.seed = seed_or_env(a.seed);
                cfg.burn_in = a.burn_in;
                cfg.include_nonconverged = !a.exclude_nonconverged;
                cfg.profile_omega = a.profile_omega;
                cfg.workers = a.workers;
                cfg.optim = a.optim;
                cells.push_back(std::move(cfg));
            }
        }
    }

    std::vector<archfit::McReport> reports;
    int failures = 0;
    for (const auto& cfg : cells) {
        try {
            reports.push_back(archfit::run_experiment(cfg));
        } catch (const std::exception& e) {
            std::cerr << "cell (dist=" << cfg.dist.name() << ", alpha0=" << cfg.theta0.alpha[0]
                      << ") failed: " << e.what() << "\n";
            ++failures;
        }
    }

    if (a.format == "json") {
        json out = json::array();
        for (const auto& r : reports) out.push_back(archfit::to_json(r));
        write_text(a.output, out.dump(2) + "\n");
    } else if (a.format == "csv") {
        std::ostringstream out;
        if (reports.size() == 1) {
            out << archfit::mcreport_csv(reports.front());
        } else {
            out << "dist,omega0,alpha0,estimator,n,coord,bias_sq,variance,mse,n_converged\n";
            for (const auto& r : reports) {
                std::ostringstream prefix;
                prefix << r.config.dist.name() << "," << archfit::format_double(r.config.theta0.omega)
                       << "," << archfit::format_double(r.config.theta0.alpha[0]) << ",";
                for (const auto& row : r.rows) {
                    out << prefix.str() << archfit::to_string(row.estimator) << "," << row.n << ","
                        << row.coord << "," << archfit::format_double(row.bias_sq) << ","
                        << archfit::format_double(row.variance) << ","
                        << archfit::format_double(row.mse) << "," << row.n_converged << "\n";
                }
            }
        }
        write_text(a.output, out.str());
    } else {
        throw archfit::DomainError("unknown format '" + a.format + "' (expected csv or json)");
    }

    if (failures > 0) {
        std::cerr << failures << " of " << cells.size() << " cells failed\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ARCH(p) estimation toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* csim = app.add_subcommand("simulate", "simulate an ARCH(p) series");
    csim->add_option("--omega", sim.omega, "intercept omega > 0")->required();
    csim->add_option("--alpha", sim.alpha, "comma-separated alpha_1..alpha_p")->required();
    csim->add_option("--dist", sim.dist, "innovation law (normal, t5, ...)");
    csim->add_option("--n", sim.n, "series length")->required();
    csim->add_option("--burn-in", sim.burn_in, "discarded initial draws");
    std::uint64_t sim_seed = 0;
    auto* sim_seed_opt = csim->add_option("--seed", sim_seed, "RNG seed (env ARCHFIT_SEED fallback)");
    csim->add_option("--stream", sim.stream, "RNG stream id");
    csim->add_option("-o,--output", sim.output, "output file (default stdout)");
    csim->add_option("--format", sim.format, "csv or txt");

    FitArgs fit;
    auto* cfit = app.add_subcommand("fit", "fit estimators to a series file");
    cfit->add_option("-i,--input", fit.input, "series file")->required();
    cfit->add_option("--p", fit.p, "ARCH order");
    cfit->add_option("--estimator", fit.estimator, "ls, ef, qml, ml, all, or comma list");
    cfit->add_option("--dist", fit.dist, "innovation law for ml");
    cfit->add_option("-o,--output", fit.output, "output JSON file");
    cfit->add_option("--max-iters", fit.optim.max_iters, "optimizer iteration cap");
    cfit->add_option("--grad-tol", fit.optim.grad_tol, "optimizer gradient tolerance");
    cfit->add_option("--param-tol", fit.optim.param_tol, "optimizer step tolerance");
    cfit->add_option("--multistart", fit.optim.multistart, "optimizer starts");
    double fit_fixed_omega = 0.0;
    auto* fit_fo = cfit->add_option("--fixed-omega", fit_fixed_omega, "hold omega at this value");

    DiagnoseArgs diag;
    auto* cdiag = app.add_subcommand("diagnose", "stationarity and moment checks");
    cdiag->add_option("--omega", diag.omega, "intercept omega > 0")->required();
    cdiag->add_option("--alpha", diag.alpha, "comma-separated alpha_1..alpha_p")->required();
    cdiag->add_option("--dist", diag.dist, "innovation law");
    cdiag->add_option("--horizon", diag.horizon, "Lyapunov product length");
    cdiag->add_option("--reps", diag.reps, "Lyapunov replications");
    cdiag->add_option("--mc-samples", diag.mc_samples, "draws for the Kronecker moment norm");
    std::uint64_t diag_seed = 0;
    auto* diag_seed_opt = cdiag->add_option("--seed", diag_seed, "RNG seed");
    cdiag->add_option("-o,--output", diag.output, "output JSON file");

    InfluenceArgs infl;
    auto* cinfl = app.add_subcommand("influence", "contamination influence of LS/EF fits");
    cinfl->add_option("-i,--input", infl.input, "series file")->required();
    cinfl->add_option("--p", infl.p, "ARCH order");
    int point_index = 0;
    auto* pt = cinfl->add_option("--point-index", point_index, "series index of a point mass");
    cinfl->add_option("--magnitude", infl.magnitude, "point-mass magnitude");
    cinfl->add_flag("--self", infl.self_contamination, "V = S contamination");
    cinfl->add_option("--contamination", infl.contamination_file, "file with n-p+1 rows of p values");
    cinfl->add_option("--delta", infl.delta, "finite-difference step");
    cinfl->add_flag("--no-ef", infl.no_ef, "skip the EF influence");
    cinfl->add_flag("--no-oracle", infl.no_oracle, "skip the finite-difference check");
    cinfl->add_option("-o,--output", infl.output, "output JSON file");

    ExperimentArgs exp;
    auto* cexp = app.add_subcommand("experiment", "Monte Carlo bias/variance/MSE tables");
    cexp->add_option("--config", exp.config_file, "JSON config file (overrides design flags)");
    cexp->add_option("--omega0", exp.omega0, "true omega");
    cexp->add_option("--alpha0", exp.alpha0, "comma list of true alpha values (ARCH(1) cells)");
    cexp->add_option("--dist", exp.dist, "comma list of innovation laws");
    cexp->add_option("--n", exp.n_list, "comma list of sample sizes");
    cexp->add_option("--reps", exp.reps, "replications per cell");
    cexp->add_option("--estimators", exp.estimators, "comma list from ls,ef,qml,ml");
    std::uint64_t exp_seed = 0;
    auto* exp_seed_opt = cexp->add_option("--seed", exp_seed, "RNG seed");
    cexp->add_option("--burn-in", exp.burn_in, "simulation burn-in");
    cexp->add_flag("--exclude-nonconverged", exp.exclude_nonconverged,
                   "drop non-converged replicates from the aggregates");
    cexp->add_flag("--profile-omega", exp.profile_omega, "hold omega fixed at omega0 in all fits");
    cexp->add_option("--workers", exp.workers, "worker threads (results independent of this)");
    cexp->add_option("--format", exp.format, "csv or json");
    cexp->add_option("-o,--output", exp.output, "output file");
    cexp->add_option("--max-iters", exp.optim.max_iters, "optimizer iteration cap");
    cexp->add_option("--multistart", exp.optim.multistart, "optimizer starts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*csim) {
            if (*sim_seed_opt) sim.seed = sim_seed;
            return cmd_simulate(sim);
        }
        if (*cfit) {
            if (*fit_fo) fit.fixed_omega = fit_fixed_omega;
            return cmd_fit(fit);
        }
        if (*cdiag) {
            if (*diag_seed_opt) diag.seed = diag_seed;
            return cmd_diagnose(diag);
        }
        if (*cinfl) {
            if (*pt) infl.point_index = point_index;
            return cmd_influence(infl);
        }
        if (*cexp) {
            if (*exp_seed_opt) exp.seed = exp_seed;
            return cmd_experiment(exp);
        }
    } catch (const archfit::DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
