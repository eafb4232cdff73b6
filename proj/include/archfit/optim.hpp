#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace archfit {

/// Objective callback: returns f(x) and fills grad with the analytic gradient.
using GradObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct BfgsOptions {
    int max_iters = 500;
    double grad_tol = 1e-8;   // stop on ||grad||_inf
    double param_tol = 1e-10; // stop on stagnating steps
};

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double grad_inf_norm = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

/// Quasi-Newton minimizer with inverse-Hessian BFGS updates and a
/// backtracking Armijo line search. Non-finite trial values are treated as
/// rejected steps. converged reports the grad_tol criterion only.
inline BfgsResult minimize_bfgs(const GradObjective& f, Eigen::VectorXd x0,
                                const BfgsOptions& opt = {}) {
    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = std::move(x0);

    Eigen::VectorXd g(n);
    double fx = f(res.x, g);
    if (!std::isfinite(fx)) {
        res.value = fx;
        return res;
    }

    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    constexpr double armijo = 1e-4;

    int it = 0;
    for (; it < opt.max_iters; ++it) {
        res.grad_inf_norm = g.cwiseAbs().maxCoeff();
        if (res.grad_inf_norm <= opt.grad_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd p = -(h * g);
        double slope = g.dot(p);
        if (!(slope < 0.0)) {
            h.setIdentity();
            p = -g;
            slope = g.dot(p);
        }

        double step = 1.0;
        double fnew = fx;
        Eigen::VectorXd xnew;
        Eigen::VectorXd gnew(n);
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xnew = res.x + step * p;
            fnew = f(xnew, gnew);
            if (std::isfinite(fnew) && fnew <= fx + armijo * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break; // no descent at machine-small steps

        const Eigen::VectorXd s = xnew - res.x;
        const Eigen::VectorXd y = gnew - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::VectorXd hy = h * y;
            h -= rho * (hy * s.transpose() + s * hy.transpose());
            h += rho * rho * (y.dot(hy) + sy) * (s * s.transpose());
        }

        const bool tiny_step = s.cwiseAbs().maxCoeff() <= opt.param_tol
                               && std::abs(fx - fnew) <= opt.param_tol * std::max(1.0, std::abs(fx));
        res.x = xnew;
        fx = fnew;
        g = gnew;
        if (tiny_step) {
            ++it;
            break;
        }
    }

    res.value = fx;
    res.iterations = it;
    res.grad_inf_norm = g.cwiseAbs().maxCoeff();
    res.converged = res.grad_inf_norm <= opt.grad_tol;
    return res;
}

} // namespace archfit
