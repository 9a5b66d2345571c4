#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gsprt/expfam.hpp"
#include "gsprt/rng.hpp"
#include "helpers.hpp"

using Catch::Approx;
using namespace gsprt;

namespace {

// quadrature oracle for int p_a log(p_a/p_b) and its square over [-10s, 10s]
double gauss_pdf(double x, const GaussianParams& g) {
    const double z = (x - g.mu) / std::sqrt(g.sigma2);
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI * g.sigma2);
}

std::pair<double, double> quad_kl_var(const GaussianParams& a, const GaussianParams& b) {
    const double s = std::sqrt(a.sigma2);
    const double lo = a.mu - 10.0 * s, hi = a.mu + 10.0 * s;
    auto logratio = [&](double x) { return std::log(gauss_pdf(x, a) / gauss_pdf(x, b)); };
    const double D = testutil::adaptive_simpson(
        [&](double x) { return gauss_pdf(x, a) * logratio(x); }, lo, hi, 1e-10);
    const double S = testutil::adaptive_simpson(
        [&](double x) { return gauss_pdf(x, a) * logratio(x) * logratio(x); }, lo, hi, 1e-10);
    return {D, S - D * D};
}

}  // namespace

TEST_CASE("GaussianParams natural coordinates are consistent") {
    const GaussianParams g(0.7, 1.8);
    auto [g1, g2] = g.natural();
    const auto back = GaussianParams::from_natural(g1, g2);
    REQUIRE(back.mu == Approx(g.mu).margin(1e-12));
    REQUIRE(back.sigma2 == Approx(g.sigma2).margin(1e-12));
    REQUIRE_THROWS_AS(GaussianParams(0.0, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(GaussianParams::from_natural(0.0, 0.1), std::invalid_argument);
}

TEST_CASE("gaussian_kl examples and quadrature agreement") {
    const GaussianParams std01(0.0, 1.0);
    REQUIRE(gaussian_kl(std01, std01) == 0.0);
    REQUIRE(gaussian_kl(std01, GaussianParams(1.0, 1.0)) == Approx(0.5).margin(1e-12));
    REQUIRE(gaussian_kl(std01, GaussianParams(0.0, 4.0)) ==
            Approx(std::log(2.0) + 0.125 - 0.5).margin(1e-12));

    Philox rng(17, 0);
    for (int rep = 0; rep < 8; ++rep) {
        const GaussianParams a(2.0 * rng.next_double() - 1.0, 0.5 + rng.next_double());
        const GaussianParams b(2.0 * rng.next_double() - 1.0, 0.5 + rng.next_double());
        auto [D, V] = quad_kl_var(a, b);
        REQUIRE(gaussian_kl(a, b) == Approx(D).margin(1e-6));
        REQUIRE(gaussian_rev(a, b).second == Approx(V).margin(1e-6));
    }
}

TEST_CASE("gaussian_rev examples") {
    const GaussianParams std01(0.0, 1.0);
    REQUIRE(gaussian_rev(std01, GaussianParams(1.0, 1.0)).second == Approx(1.0).margin(1e-12));
    REQUIRE(gaussian_rev(std01, std01).second == 0.0);
    const double s2 = 2.5;
    REQUIRE(gaussian_rev(std01, GaussianParams(0.0, s2)).second ==
            Approx(0.5 * (1.0 - 1.0 / s2) * (1.0 - 1.0 / s2)).margin(1e-12));
}

TEST_CASE("gaussian_rev variance matches simulation for a scale change") {
    // X ~ N(0,1), log ratio against N(0, s2): chi-square-type variance
    const double s2 = 4.0;
    const GaussianParams a(0.0, 1.0), b(0.0, s2);
    Philox rng(123, 0);
    const int n = 1000000;
    double mean = 0.0, m2 = 0.0;
    for (int k = 1; k <= n; ++k) {
        const double x = rng.next_gaussian(0.0, 1.0);
        const double lr = std::log(gauss_pdf(x, a) / gauss_pdf(x, b));
        const double delta = lr - mean;
        mean += delta / k;
        m2 += delta * (lr - mean);
    }
    const double simvar = m2 / (n - 1);
    REQUIRE(gaussian_rev(a, b).second == Approx(simvar).epsilon(0.01));
}

TEST_CASE("max_loglik_ratio: interior stationary point recovers n D(MLE||gamma0)") {
    // two-value sample with mean 0.8 and variance 0.04: MLE (0.8, 0.04)
    std::vector<double> sample;
    for (int k = 0; k < 500; ++k) {
        sample.push_back(1.0);
        sample.push_back(0.6);
    }
    const GaussianParams mle(0.8, 0.04);
    auto [g1, g2] = mle.natural();
    const ParamBox box({g1 - 5.0, g2 - 5.0}, {g1 + 5.0, g2 + 2.0});
    REQUIRE(box.contains(std::vector<double>{g1, g2}.data()));
    const GaussianParams g0(0.0, 1.0);
    const auto res = max_loglik_ratio(sample, g0, box);
    REQUIRE(res.converged);
    REQUIRE_FALSE(res.boundary_active);
    REQUIRE(res.grad_norm <= 1e-8);
    REQUIRE(res.value == Approx(static_cast<double>(sample.size()) * gaussian_kl(mle, g0))
                             .epsilon(1e-9));
}

TEST_CASE("max_loglik_ratio: collapsed box evaluates the fixed-parameter ratio") {
    std::vector<double> sample = {0.3, -0.2, 1.1, 0.7};
    const GaussianParams g0(0.0, 1.0);
    const GaussianParams g1(1.0, 2.0);
    auto [a, b] = g1.natural();
    const ParamBox box({a, b}, {a, b});
    const auto res = max_loglik_ratio(sample, g0, box);
    double expect = 0.0;
    for (double x : sample) expect += std::log(gauss_pdf(x, g1) / gauss_pdf(x, g0));
    REQUIRE(res.value == Approx(expect).margin(1e-10));
    REQUIRE(res.boundary_active);
}

TEST_CASE("max_loglik_ratio dominates the box center and grows with the box") {
    Philox rng(31, 0);
    std::vector<double> sample;
    for (int k = 0; k < 200; ++k) sample.push_back(rng.next_gaussian(0.5, 1.2));
    const GaussianParams g0(0.0, 1.0);
    const ParamBox small({0.1, -0.6}, {0.5, -0.3});
    const ParamBox big({0.0, -0.8}, {0.7, -0.25});
    const auto rs = max_loglik_ratio(sample, g0, small);
    const auto rb = max_loglik_ratio(sample, g0, big);
    REQUIRE(rb.value >= rs.value - 1e-9);

    // value at the box center is dominated
    const ExpFamily fam = gaussian_family();
    const double c[2] = {0.3, -0.45};
    double sbar[2] = {0.0, 0.0};
    for (double x : sample) {
        sbar[0] += x;
        sbar[1] += x * x;
    }
    sbar[0] /= static_cast<double>(sample.size());
    sbar[1] /= static_cast<double>(sample.size());
    auto [z1, z2] = g0.natural();
    double center = (c[0] - z1) * sbar[0] + (c[1] - z2) * sbar[1] - fam.A(c) +
                    fam.A(std::vector<double>{z1, z2}.data());
    center *= static_cast<double>(sample.size());
    REQUIRE(rs.value >= center - 1e-9);
}

TEST_CASE("parametric statistic drift: S_n/n approaches D(p_g1||p_g0)") {
    const GaussianParams g0(0.0, 1.0);
    const GaussianParams g1(0.8, 1.6);
    auto [a, b] = g1.natural();
    const ParamBox box({a - 0.3, b - 0.15}, {a + 0.3, b + 0.1});
    const double target = gaussian_kl(g1, g0);
    const int n = 10000;
    double total = 0.0;
    const int reps = 10;
    for (int rep = 0; rep < reps; ++rep) {
        Philox rng(500 + rep, 0);
        GaussianGsprt test(g0, box, 1e9, 1e9, n + 1);
        for (int k = 0; k < n; ++k)
            test.step(rng.next_gaussian(g1.mu, std::sqrt(g1.sigma2)));
        total += test.S_n() / static_cast<double>(n);
    }
    const double slope = total / reps;
    REQUIRE(slope == Approx(target).epsilon(0.05));
}

TEST_CASE("check_conditions: documented box passes") {
    // natural box [0.25, 0.5] x [-1/3, -0.25]; its (mu, sigma2) image sits in
    // mu in [0.375, 1], sigma2 in [1.5, 2]
    const ParamBox box({0.25, -1.0 / 3.0}, {0.5, -0.25});
    const auto rep = check_conditions(GaussianParams(0.0, 1.0), box);
    REQUIRE(rep.gamma0_excluded);
    REQUIRE(rep.hess_A_pd);
    REQUIRE(rep.curvature_pd);
    REQUIRE(rep.variance_inequality_ok);
    REQUIRE(rep.ok());
}

TEST_CASE("check_conditions: box containing gamma0 fails the exclusion check") {
    const ParamBox box({-0.1, -0.6}, {0.3, -0.3});  // contains (0, -1/2)
    const auto rep = check_conditions(GaussianParams(0.0, 1.0), box);
    REQUIRE_FALSE(rep.gamma0_excluded);
    REQUIRE_FALSE(rep.ok());
}

TEST_CASE("check_conditions: equality in the variance inequality is flagged") {
    // mu = 1, sigma2 = 1.25 sits exactly on sigma2 = (4 mu^2 + 1)/(3 mu + 1)
    const GaussianParams edge(1.0, 1.25);
    auto [g1, g2] = edge.natural();
    const ParamBox box({g1, g2}, {g1, g2});
    const auto rep = check_conditions(GaussianParams(0.0, 1.0), box, 1);
    REQUIRE_FALSE(rep.variance_inequality_ok);
    REQUIRE_FALSE(rep.ok());
    bool found = false;
    for (const auto& v : rep.violations)
        if (v.which == "variance") found = true;
    REQUIRE(found);
}
