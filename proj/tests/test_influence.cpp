#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "archfit/influence.hpp"
#include "archfit/model.hpp"

using namespace archfit;

namespace {

Series simulate_arch1(double omega, double alpha, int n, std::uint64_t seed) {
    SimSpec spec{validate_params(omega, std::vector<double>{alpha}), InnovationDist::normal(), n,
                 500, seed, 0};
    return simulate(spec);
}

Contamination random_relative(const Series& s, int p, std::uint64_t seed) {
    Rng rng(seed, 3);
    Contamination c;
    const auto& x2 = s.x2();
    c.v.resize(static_cast<std::size_t>(s.n() - p + 1));
    for (std::size_t k = 0; k < c.v.size(); ++k) {
        Eigen::VectorXd vk(p);
        for (int j = 0; j < p; ++j)
            vk[j] = (rng.uniform() - 0.5) * x2[k + static_cast<std::size_t>(p - 1 - j)];
        c.v[k] = std::move(vk);
    }
    return c;
}

double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
    return (got - want).norm() / want.norm();
}

/// full chain-rule derivative of the two-step functional; used only to
/// validate the finite-difference oracle independently
Eigen::VectorXd chain_rule_ef_influence(const Series& s, const Contamination& c, int p) {
    const auto& x2 = s.x2();
    const int m = s.n() - p;
    const int dim = p + 1;

    std::vector<Eigen::VectorXd> z(static_cast<std::size_t>(m)), vt(static_cast<std::size_t>(m));
    std::vector<double> y(static_cast<std::size_t>(m)), v1(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        Eigen::VectorXd zi(dim);
        zi[0] = 1.0;
        for (int j = 1; j <= p; ++j) zi[j] = x2[static_cast<std::size_t>(p + i - j)];
        z[static_cast<std::size_t>(i)] = zi;
        Eigen::VectorXd vti(dim);
        vti[0] = 0.0;
        vti.tail(p) = c.v[static_cast<std::size_t>(i)];
        vt[static_cast<std::size_t>(i)] = vti;
        y[static_cast<std::size_t>(i)] = x2[static_cast<std::size_t>(p + i)];
        v1[static_cast<std::size_t>(i)] = c.v[static_cast<std::size_t>(i + 1)][0];
    }

    const Eigen::VectorXd t_ls = ls_functional(s, p);
    const Eigen::VectorXd t_prime = influence_ls(s, c, p);

    Eigen::MatrixXd uw = Eigen::MatrixXd::Zero(dim, dim), uw_p = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(dim), gw_p = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < m; ++i) {
        const auto& zi = z[static_cast<std::size_t>(i)];
        const auto& vti = vt[static_cast<std::size_t>(i)];
        const double q = t_ls.dot(zi);
        const double w = 1.0 / (q * q);
        const double qp = t_prime.dot(zi) + t_ls.dot(vti);
        const double wp = -2.0 * qp / (q * q * q);
        uw += w * (zi * zi.transpose());
        gw += w * y[static_cast<std::size_t>(i)] * zi;
        uw_p += wp * (zi * zi.transpose()) + w * (vti * zi.transpose() + zi * vti.transpose());
        gw_p += wp * y[static_cast<std::size_t>(i)] * zi + w * v1[static_cast<std::size_t>(i)] * zi
                + w * y[static_cast<std::size_t>(i)] * vti;
    }
    uw /= m;
    gw /= m;
    uw_p /= m;
    gw_p /= m;

    const Eigen::VectorXd t_w = uw.fullPivLu().solve(gw);
    return uw.fullPivLu().solve(gw_p - uw_p * t_w);
}

} // namespace

TEST_CASE("zero contamination gives exactly zero influence", "[influence]") {
    const Series s = simulate_arch1(1.0, 0.3, 200, 5);
    Contamination zero;
    zero.v.assign(static_cast<std::size_t>(s.n()), Eigen::VectorXd::Zero(1));

    CHECK(influence_ls(s, zero, 1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(influence_ef(s, zero, 1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(influence_fd_oracle(EstimatorKind::LS, s, zero, 1e-4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic influence is linear in the contamination", "[influence][property]") {
    const Series s = simulate_arch1(1.0, 0.3, 300, 9);
    const auto c1 = random_relative(s, 1, 100);
    const auto c2 = random_relative(s, 1, 200);
    const double a = 1.7, b = -0.4;

    Contamination mix;
    mix.v.resize(c1.v.size());
    for (std::size_t k = 0; k < mix.v.size(); ++k) mix.v[k] = a * c1.v[k] + b * c2.v[k];

    for (auto fn : {influence_ls, influence_ef}) {
        const Eigen::VectorXd lhs = fn(s, mix, 1);
        const Eigen::VectorXd rhs = a * fn(s, c1, 1) + b * fn(s, c2, 1);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10 * (rhs.cwiseAbs().maxCoeff() + 1.0));
    }
}

TEST_CASE("LS influence matches the finite-difference oracle", "[influence][ls]") {
    SECTION("self-contamination") {
        const Series s = simulate_arch1(1.0, 0.3, 400, 21);
        const auto c = Contamination::self(s, 1);
        const Eigen::VectorXd analytic = influence_ls(s, c, 1);
        const Eigen::VectorXd oracle = influence_fd_oracle(EstimatorKind::LS, s, c, 1e-4);
        CHECK(rel_err(analytic, oracle) < 1e-2);
    }
    SECTION("random pairs, with convergence in delta") {
        for (int trial = 0; trial < 6; ++trial) {
            const Series s = simulate_arch1(1.0, 0.2 + 0.02 * trial, 300,
                                            300 + static_cast<std::uint64_t>(trial));
            const auto c = random_relative(s, 1, 400 + static_cast<std::uint64_t>(trial));
            const Eigen::VectorXd analytic = influence_ls(s, c, 1);
            const double e3 = rel_err(analytic, influence_fd_oracle(EstimatorKind::LS, s, c, 1e-3));
            const double e4 = rel_err(analytic, influence_fd_oracle(EstimatorKind::LS, s, c, 1e-4));
            INFO("errors " << e3 << " -> " << e4);
            CHECK(e4 < 1e-2);
            // the analytic value is the exact derivative, so central
            // differences converge at least first order (second in practice)
            CHECK(e3 / e4 >= 5.0);
        }
    }
    SECTION("ARCH(2) window bookkeeping") {
        const SimSpec spec{validate_params(0.7, std::vector<double>{0.2, 0.2}),
                           InnovationDist::normal(), 300, 500, 77, 0};
        const Series s = simulate(spec);
        const auto c = random_relative(s, 2, 500);
        const Eigen::VectorXd analytic = influence_ls(s, c, 2);
        const Eigen::VectorXd oracle = influence_fd_oracle(EstimatorKind::LS, s, c, 1e-4);
        CHECK(rel_err(analytic, oracle) < 1e-2);
    }
}

TEST_CASE("point-mass influence grows linearly and is unbounded", "[influence][ls]") {
    const Series s = simulate_arch1(1.0, 0.3, 500, 33);
    const auto c100 = Contamination::point_mass(s.n(), 1, 250, 100.0);
    const auto c200 = Contamination::point_mass(s.n(), 1, 250, 200.0);

    const Eigen::VectorXd i100 = influence_ls(s, c100, 1);
    const Eigen::VectorXd i200 = influence_ls(s, c200, 1);
    CHECK((i200 - 2.0 * i100).cwiseAbs().maxCoeff() < 1e-10 * i100.cwiseAbs().maxCoeff());

    const Eigen::VectorXd oracle = influence_fd_oracle(EstimatorKind::LS, s, c100, 1e-4);
    CHECK(rel_err(i100, oracle) < 1e-2);

    CHECK_THROWS_AS(Contamination::point_mass(s.n(), 1, 0, 10.0), DomainError);
}

TEST_CASE("oracle self-consistency", "[influence][oracle]") {
    const Series s = simulate_arch1(1.0, 0.3, 400, 45);

    SECTION("LS quotients shrink quadratically in delta") {
        const auto c = Contamination::self(s, 1);
        const Eigen::VectorXd q3 = influence_fd_oracle(EstimatorKind::LS, s, c, 1e-3);
        const Eigen::VectorXd q4 = influence_fd_oracle(EstimatorKind::LS, s, c, 1e-4);
        CHECK(rel_err(q3, q4) < 1e-3);
    }
    SECTION("EF quotients agree across deltas") {
        const auto c = random_relative(s, 1, 600);
        const Eigen::VectorXd q4 = influence_fd_oracle(EstimatorKind::EF, s, c, 1e-4);
        const Eigen::VectorXd q5 = influence_fd_oracle(EstimatorKind::EF, s, c, 1e-5);
        CHECK(rel_err(q4, q5) < 1e-3);
    }
    SECTION("delta validation") {
        const auto c = Contamination::self(s, 1);
        CHECK_THROWS_AS(influence_fd_oracle(EstimatorKind::LS, s, c, 0.0), DomainError);
        CHECK_THROWS_AS(influence_fd_oracle(EstimatorKind::LS, s, c, 1.0), DomainError);
        CHECK_THROWS_AS(influence_fd_oracle(EstimatorKind::QML, s, c, 1e-4), DomainError);
    }
}

TEST_CASE("oracle equals the exact two-step derivative", "[influence][oracle]") {
    // chain-rule differentiation of the whole two-step pipeline, computed
    // here as an independent check on the oracle
    for (int trial = 0; trial < 5; ++trial) {
        const Series s = simulate_arch1(1.0, 0.3, 300, 700 + static_cast<std::uint64_t>(trial));
        const auto c = random_relative(s, 1, 800 + static_cast<std::uint64_t>(trial));
        const Eigen::VectorXd exact = chain_rule_ef_influence(s, c, 1);
        const Eigen::VectorXd oracle = influence_fd_oracle(EstimatorKind::EF, s, c, 1e-4);
        CHECK(rel_err(exact, oracle) < 1e-4);
    }
}

TEST_CASE("EF influence expression versus the oracle", "[influence][ef]") {
    // The two-step expression as printed (weights and L built from the LS
    // functional) is NOT the derivative of the two-step fit: it omits the
    // first-step propagation channel. The oracle is the ground truth; the
    // mismatch is measured and reported here, not hidden.
    const Series s = simulate_arch1(1.0, 0.3, 400, 55);
    const auto c = Contamination::point_mass(s.n(), 1, 200, 100.0);

    const Eigen::VectorXd analytic = influence_ef(s, c, 1);
    const Eigen::VectorXd o4 = influence_fd_oracle(EstimatorKind::EF, s, c, 1e-4);
    const Eigen::VectorXd o5 = influence_fd_oracle(EstimatorKind::EF, s, c, 1e-5);

    REQUIRE(analytic.allFinite());
    const double err4 = rel_err(analytic, o4);
    const double err5 = rel_err(analytic, o5);
    WARN("EF influence expression vs oracle: relative error "
         << err4 << " at delta=1e-4, " << err5
         << " at delta=1e-5 (delta-independent formula-level gap)");
    // the gap is a property of the expression, not oracle noise
    CHECK(std::abs(err4 - err5) < 1e-2 * std::max(err4, 1.0));
    if (err4 > 2e-2) {
        CHECK(rel_err(chain_rule_ef_influence(s, c, 1), o4) < 1e-4);
    } else {
        SUCCEED("EF expression agrees with the oracle on this input");
    }
}

TEST_CASE("EF influence reduces to LS under constant weights", "[influence][ef]") {
    // x^2 = [1, 2, 3, 2]: the lag-regression slope is exactly zero, so the
    // fitted variance path and the EF weights are constant
    const Series s(std::vector<double>{1.0, std::sqrt(2.0), std::sqrt(3.0), std::sqrt(2.0)});
    const Eigen::VectorXd t_ls = ls_functional(s, 1);
    REQUIRE(std::abs(t_ls[1]) < 1e-14);

    Contamination c;
    c.v = {Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, -1.0),
           Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Constant(1, 0.7)};

    const Eigen::VectorXd ls = influence_ls(s, c, 1);
    const Eigen::VectorXd ef = influence_ef(s, c, 1);
    CHECK((ls - ef).cwiseAbs().maxCoeff() < 1e-10 * (ls.cwiseAbs().maxCoeff() + 1.0));
}

TEST_CASE("contamination validation", "[influence][errors]") {
    const Series s = simulate_arch1(1.0, 0.3, 100, 65);
    Contamination wrong;
    wrong.v.assign(3, Eigen::VectorXd::Zero(1));
    CHECK_THROWS_AS(influence_ls(s, wrong, 1), DomainError);

    Contamination badp;
    badp.v.assign(static_cast<std::size_t>(s.n()), Eigen::VectorXd::Zero(2));
    CHECK_THROWS_AS(influence_ls(s, badp, 1), DomainError);

    const auto report = influence_report(s, Contamination::self(s, 1), 1);
    CHECK(report.if_ls.allFinite());
    REQUIRE(report.if_ef.has_value());
    REQUIRE(report.fd_check.has_value());
    CHECK(report.delta_used == 1e-4);
}
