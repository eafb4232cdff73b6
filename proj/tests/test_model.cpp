#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "archfit/model.hpp"

using namespace archfit;

namespace {

Series make_series(std::initializer_list<double> xs) { return Series(std::vector<double>(xs)); }

double sample_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_moment(const std::vector<double>& v, int k) {
    double s = 0.0;
    for (double x : v) s += std::pow(x, k);
    return s / static_cast<double>(v.size());
}

/// standard error of the sample mean of f(x) estimated from the draws
double mean_se(const std::vector<double>& f) {
    const double m = sample_mean(f);
    double ss = 0.0;
    for (double x : f) ss += (x - m) * (x - m);
    return std::sqrt(ss / f.size() / f.size());
}

} // namespace

TEST_CASE("validate_params accepts valid and boundary parameters", "[model][params]") {
    const auto p1 = validate_params(1.0, std::vector<double>{0.1});
    CHECK(p1.omega == 1.0);
    CHECK(p1.alpha[0] == 0.1);
    CHECK(p1.order() == 1);

    const auto boundary = validate_params(1.0, std::vector<double>{0.0});
    CHECK(boundary.alpha[0] == 0.0);

    CHECK_THROWS_AS(validate_params(0.0, std::vector<double>{0.1}), DomainError);
    CHECK_THROWS_AS(validate_params(-1.0, std::vector<double>{0.1}), DomainError);
    CHECK_THROWS_AS(validate_params(1.0, std::vector<double>{-0.2}), DomainError);
    CHECK_THROWS_AS(validate_params(1.0, std::vector<double>{}), DomainError);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(validate_params(inf, std::vector<double>{0.1}), DomainError);
    CHECK_THROWS_AS(validate_params(1.0, std::vector<double>{inf}), DomainError);
}

TEST_CASE("sigma2_path matches direct arithmetic", "[model][sigma2]") {
    SECTION("alpha = 0 gives a constant path") {
        const auto params = validate_params(1.0, std::vector<double>{0.0});
        const auto path = sigma2_path(params, make_series({0.3, -2.0, 5.0, 0.0}));
        REQUIRE(path.size() == 3);
        for (double v : path) CHECK(v == 1.0);
    }
    SECTION("ARCH(1) example") {
        const auto params = validate_params(1.0, std::vector<double>{0.5});
        const auto path = sigma2_path(params, make_series({2.0, 1.0, 3.0}));
        REQUIRE(path.size() == 2);
        CHECK(path[0] == Catch::Approx(3.0));
        CHECK(path[1] == Catch::Approx(1.5));
    }
    SECTION("ARCH(2) example") {
        const auto params = validate_params(0.5, std::vector<double>{0.2, 0.3});
        const auto path = sigma2_path(params, make_series({1.0, 2.0, 1.0, 1.0}));
        REQUIRE(path.size() == 2);
        CHECK(path[0] == Catch::Approx(1.6));
        CHECK(path[1] == Catch::Approx(1.9));
    }
    SECTION("series too short") {
        const auto params = validate_params(1.0, std::vector<double>{0.1, 0.2});
        CHECK_THROWS_AS(sigma2_path(params, make_series({1.0, 2.0})), DomainError);
    }
}

TEST_CASE("sigma2_path stays above omega on random inputs", "[model][sigma2][property]") {
    Rng rng(2024, 0);
    for (int trial = 0; trial < 50; ++trial) {
        const int p = 1 + static_cast<int>(rng.raw() % 3);
        const double omega = 0.1 + 2.0 * rng.uniform();
        Eigen::VectorXd alpha(p);
        for (int j = 0; j < p; ++j) alpha[j] = 0.5 * rng.uniform();
        const auto params = validate_params(omega, alpha);

        std::vector<double> x(static_cast<std::size_t>(p + 20));
        for (auto& v : x) v = 3.0 * rng.normal();
        const auto path = sigma2_path(params, Series(x));
        for (double v : path) REQUIRE(v >= omega);
    }
}

TEST_CASE("simulate is seed-deterministic", "[model][simulate]") {
    SimSpec spec{validate_params(1.0, std::vector<double>{0.3}), InnovationDist::normal(), 200,
                 500, 42, 7};
    const Series a = simulate(spec);
    const Series b = simulate(spec);
    REQUIRE(a.x() == b.x());

    SimSpec other = spec;
    other.seed = 43;
    CHECK(simulate(other).x() != a.x());

    SimSpec bad = spec;
    bad.n = 0;
    CHECK_THROWS_AS(simulate(bad), DomainError);
}

TEST_CASE("simulate recursion recomputes bitwise from the output", "[model][simulate]") {
    for (int p : {1, 3}) {
        Eigen::VectorXd alpha = Eigen::VectorXd::Constant(p, 0.2 / p);
        alpha[p - 1] = 0.3;
        const auto params = validate_params(0.7, alpha);
        SimSpec spec{params, InnovationDist::student_t(5.0), 300, 100, 11, 2};
        const Series s = simulate(spec);

        // regenerate with the recursion inlined to capture the internal path
        SimSpec again = spec;
        const Series s2 = simulate(again);
        REQUIRE(s.x() == s2.x());

        const auto path = sigma2_path(params, s);
        // every sigma^2 from the output series must reproduce the generating one:
        // x_t / eps_t squared is not observable, but the recursion is, so check
        // x_t^2 = sigma_t^2 * eps_t^2 consistency via a fresh innovation stream
        Rng rng(spec.seed, spec.stream);
        std::vector<double> eps;
        const int total = p + spec.burn_in + spec.n;
        for (int t = p; t < total; ++t) eps.push_back(spec.dist.sample(rng));
        for (std::size_t i = static_cast<std::size_t>(p); i < static_cast<std::size_t>(spec.n); ++i) {
            const double e = eps[static_cast<std::size_t>(spec.burn_in) + i];
            CHECK(s.x()[i] == std::sqrt(path[i - p]) * e);
        }
    }
}

TEST_CASE("simulate with alpha=0 gives white squared noise", "[model][simulate]") {
    const int n = 100000;
    SimSpec spec{validate_params(1.0, std::vector<double>{0.0}), InnovationDist::normal(), n, 200,
                 5, 0};
    const Series s = simulate(spec);

    std::vector<double> x2 = s.x2();
    const double var = sample_moment(s.x(), 2);
    // i.i.d. N(0,1): sample variance within 3 standard errors of 1
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));

    // lag-1 autocorrelation of the squares within 4/sqrt(n) of zero
    const double m = sample_mean(x2);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 1; t < x2.size(); ++t) num += (x2[t] - m) * (x2[t - 1] - m);
    for (double v : x2) den += (v - m) * (v - m);
    CHECK(std::abs(num / den) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("simulate matches the unconditional second moment", "[model][simulate]") {
    const int n = 100000;
    SimSpec spec{validate_params(1.0, std::vector<double>{0.3}), InnovationDist::normal(), n, 500,
                 99, 1};
    const Series s = simulate(spec);

    // E x^2 = omega / (1 - alpha); batch means absorb the serial dependence
    const double target = 1.0 / 0.7;
    const int nbatch = 100;
    const int bs = n / nbatch;
    std::vector<double> batch(static_cast<std::size_t>(nbatch), 0.0);
    for (int b = 0; b < nbatch; ++b) {
        for (int i = 0; i < bs; ++i) batch[b] += s.x2()[static_cast<std::size_t>(b * bs + i)];
        batch[b] /= bs;
    }
    CHECK(std::abs(sample_mean(batch) - target) < 3.0 * mean_se(batch));
}

TEST_CASE("sample_innovations moments", "[model][innovations]") {
    const int n = 1000000;

    SECTION("normal fourth moment") {
        const auto e = sample_innovations(InnovationDist::normal(), n, 3);
        std::vector<double> e4(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) e4[i] = std::pow(e[i], 4);
        CHECK(std::abs(sample_mean(e4) - 3.0) < 3.0 * mean_se(e4));
    }
    SECTION("scaled t5 variance and fourth moment") {
        const auto e = sample_innovations(InnovationDist::student_t(5.0), n, 4);
        std::vector<double> e2(e.size()), e4(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) {
            e2[i] = e[i] * e[i];
            e4[i] = e2[i] * e2[i];
        }
        CHECK(std::abs(sample_mean(e2) - 1.0) < 3.0 * mean_se(e2));
        CHECK(std::abs(sample_mean(e4) - 9.0) < 5.0 * mean_se(e4));
    }
    SECTION("all laws standardized to mean 0 variance 1") {
        for (const auto& dist :
             {InnovationDist::normal(), InnovationDist::student_t(5.0),
              InnovationDist::double_exponential(), InnovationDist::logistic(),
              InnovationDist::gamma_normalized(2.0), InnovationDist::gamma_normalized(0.7)}) {
            const auto e = sample_innovations(dist, n, 12);
            std::vector<double> e2(e.size());
            for (std::size_t i = 0; i < e.size(); ++i) e2[i] = e[i] * e[i];
            INFO(dist.name());
            CHECK(std::abs(sample_mean(e)) < 4.0 * mean_se(e));
            CHECK(std::abs(sample_mean(e2) - 1.0) < 4.0 * mean_se(e2));
        }
    }
    SECTION("reproducibility and validation") {
        const auto a = sample_innovations(InnovationDist::logistic(), 100, 8, 2);
        const auto b = sample_innovations(InnovationDist::logistic(), 100, 8, 2);
        CHECK(a == b);
        CHECK_THROWS_AS(sample_innovations(InnovationDist::normal(), 0, 1), DomainError);
    }
}

TEST_CASE("innovation moment table", "[model][innovations]") {
    CHECK(InnovationDist::normal().kurtosis_excess() == 0.0);
    CHECK(InnovationDist::normal().var_eps2() == 2.0);
    CHECK(InnovationDist::normal().eighth_moment().value() == 105.0);

    const auto t5 = InnovationDist::student_t(5.0);
    CHECK(t5.kurtosis_excess() == Catch::Approx(6.0));
    CHECK(t5.var_eps2() == Catch::Approx(8.0));
    CHECK_FALSE(t5.eighth_moment().has_value());
    CHECK_FALSE(t5.has_moment(8));
    CHECK(t5.has_moment(4));

    const auto t10 = InnovationDist::student_t(10.0);
    CHECK(t10.eighth_moment().value() == Catch::Approx(1120.0));

    CHECK(InnovationDist::double_exponential().kurtosis_excess() == Catch::Approx(3.0));
    CHECK(InnovationDist::double_exponential().eighth_moment().value() == Catch::Approx(2520.0));
    CHECK(InnovationDist::logistic().kurtosis_excess() == Catch::Approx(1.2));
    CHECK(InnovationDist::logistic().eighth_moment().value() == Catch::Approx(685.8));
    CHECK(InnovationDist::gamma_normalized(2.0).kurtosis_excess() == Catch::Approx(3.0));

    CHECK_THROWS_AS(InnovationDist::student_t(4.0), DomainError);
    CHECK_THROWS_AS(InnovationDist::gamma_normalized(0.0), DomainError);
    CHECK_THROWS_AS(InnovationDist::logistic().log_density(0.5), DomainError);
}
