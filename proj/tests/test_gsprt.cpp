#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "gsprt/montecarlo.hpp"
#include "gsprt/rng.hpp"
#include "gsprt/runner.hpp"
#include "gsprt/thresholds.hpp"
#include "helpers.hpp"

using Catch::Approx;
using namespace gsprt;

namespace {
const double kCorner0 = 0.082282878505051846;  // min D(gamma||p0)
const double kCorner1 = 0.087176693572388876;  // min D(p0||gamma)
const double kV1 = 0.1794784160541833;         // V(p0||gamma')
}  // namespace

TEST_CASE("first_order_thresholds: running example at n=100") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    const auto thr = first_order_thresholds(p0, fam, 100, 0.01, 0.01);
    REQUIRE(thr.A == Approx(100.0 * (kCorner0 - 0.01)).margin(1e-7));
    REQUIRE(thr.B == Approx(100.0 * (kCorner1 - 0.01)).margin(1e-7));
    REQUIRE(thr.gamma_A[0] == Approx(0.3).margin(1e-8));
    REQUIRE(thr.gamma_B[0] == Approx(0.3).margin(1e-8));
}

TEST_CASE("first_order_thresholds: precondition violations") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    REQUIRE_THROWS_AS(first_order_thresholds(p0, fam, 100, kCorner0, 0.01), std::domain_error);
    REQUIRE_THROWS_AS(first_order_thresholds(p0, fam, 100, 0.2, 0.01), std::domain_error);
    REQUIRE_THROWS_AS(first_order_thresholds(p0, fam, 100, -0.01, 0.01), std::domain_error);
    REQUIRE_THROWS_AS(first_order_thresholds(p0, fam, 0, 0.01, 0.01), std::invalid_argument);
}

TEST_CASE("second_order_thresholds: eps - eta = 1/2 recovers the first-order point") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    const auto thr = second_order_thresholds(p0, fam, 1000, 0.75, 0.25, 0.25);
    // PhiInv(1/2) = 0: the sqrt(n) term vanishes on both sides
    REQUIRE(thr.A == Approx(1000.0 * kCorner0).margin(1e-6));
    REQUIRE(thr.B == Approx(1000.0 * kCorner1).margin(1e-6));
}

TEST_CASE("second_order_thresholds: running example at n=1e4") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    const auto thr = second_order_thresholds(p0, fam, 10000, 0.2, 0.05, 0.05);
    // at the limit point the B side evaluates to n D + PhiInv(0.15) sqrt(n V);
    // the true minimum sits slightly below, within the o(sqrt n) drift
    const double at_gp = 10000.0 * kCorner1 + gaussian_quantile(0.15) * std::sqrt(10000.0 * kV1);
    REQUIRE(thr.B <= at_gp + 1e-9);
    REQUIRE(thr.B >= at_gp - 0.5 * std::sqrt(10000.0));
    // dense-grid certification of the B-side minimization
    const double cB = gaussian_quantile(0.15) / 100.0;
    auto [gridmin, gridarg] = testutil::grid_minimize(
        fam,
        [&](const std::vector<double>& g) {
            double D = 0.0, S = 0.0;
            for (int i = 0; i < 3; ++i) {
                const double r = std::log(p0[i] / g[static_cast<size_t>(i)]);
                D += p0[i] * r;
                S += p0[i] * r * r;
            }
            return D + cB * std::sqrt(std::max(S - D * D, 0.0));
        },
        400);
    (void)gridarg;
    REQUIRE(thr.B / 10000.0 <= gridmin + 1e-9);
    REQUIRE(std::abs(thr.B / 10000.0 - gridmin) <= 2e-4);
    // the minimizing gamma approaches gamma' = (0.3, 0.42, 0.28)
    REQUIRE(thr.gamma_B[0] == Approx(0.3).margin(1e-3));
}

TEST_CASE("second_order_thresholds: sqrt-n backoff approaches the limit constant") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    const double limit = gaussian_quantile(0.15) * std::sqrt(kV1);
    double prev_gap = 1e300;
    for (const long n : {10000L, 1000000L}) {
        const auto thr = second_order_thresholds(p0, fam, n, 0.2, 0.05, 0.05);
        const double backoff = (thr.B - static_cast<double>(n) * kCorner1) /
                               std::sqrt(static_cast<double>(n));
        const double gap = std::abs(backoff - limit);
        REQUIRE(gap < prev_gap + 1e-12);
        prev_gap = gap;
    }
    REQUIRE(prev_gap <= 0.02 * std::abs(limit));
}

TEST_CASE("second_order_thresholds: parameter ordering enforced") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    REQUIRE_THROWS_AS(second_order_thresholds(p0, fam, 100, 0.2, 0.25, 0.05), std::domain_error);
    REQUIRE_THROWS_AS(second_order_thresholds(p0, fam, 100, 1.2, 0.05, 0.05), std::domain_error);
    REQUIRE_THROWS_AS(second_order_thresholds(p0, fam, 100, 0.2, -0.01, 0.05), std::domain_error);
}

TEST_CASE("step: single-symbol statistic matches the one-point maximization") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    FiniteGsprt t(p0, fam, 10.0, 10.0, 1000);
    const auto dec = t.step(0);  // Q = (1, 0, 0)
    REQUIRE_FALSE(dec.has_value());
    // S_1 = max_gamma log(gamma_1 / 0.5), maximal at gamma_1 = 0.3
    REQUIRE(t.state().S_n == Approx(std::log(0.3 / 0.5)).margin(1e-9));
    // grid oracle over the family
    auto [best, arg] = testutil::grid_minimize(
        fam, [&](const std::vector<double>& g) { return -std::log(g[0] / 0.5); }, 500);
    (void)arg;
    REQUIRE(t.state().S_n == Approx(-best).margin(1e-6));
}

TEST_CASE("state invariants: thresholds positive, step after decision throws") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    REQUIRE_THROWS_AS(FiniteGsprt(p0, fam, 0.0, 1.0, 10), std::invalid_argument);
    REQUIRE_THROWS_AS(FiniteGsprt(p0, fam, 1.0, -1.0, 10), std::invalid_argument);

    FiniteGsprt t(p0, fam, 1e-4, 1e-4, 10);
    const auto dec = t.step(0);
    REQUIRE(dec.has_value());  // / S_1 / is far above the tiny thresholds
    REQUIRE_THROWS_AS(t.step(0), std::logic_error);
}

TEST_CASE("huge thresholds truncate at n_max") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    Philox rng(5, 0);
    double cdf[3] = {0.5, 0.8, 1.0};
    FiniteGsprt t(p0, fam, 1e6, 1e6, 50);
    std::optional<Decision> dec;
    while (!dec) dec = t.step(rng.next_categorical(cdf, 3));
    REQUIRE(*dec == Decision::Truncated);
    REQUIRE(t.state().type.n == 50);
    REQUIRE(t.outcome(*dec).tau == 50);
}

TEST_CASE("incremental S_n equals batch -n f(Q)") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    Philox rng(8, 0);
    double cdf[3] = {0.5, 0.8, 1.0};
    FiniteGsprt t(p0, fam, 1e6, 1e6, 200);
    EmpiricalType mirror(3);
    for (int n = 1; n <= 100; ++n) {
        const int x = rng.next_categorical(cdf, 3);
        mirror.add(x);
        t.step(x);
        if (n == 1 || n == 10 || n == 100) {
            const auto batch = project(mirror.as_distribution(), p0, fam);
            REQUIRE(t.state().S_n ==
                    Approx(-static_cast<double>(n) * batch.f_value).margin(1e-9));
        }
    }
}

TEST_CASE("point mass inside the family drives an H1 decision") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    // gamma = (0.05, 0.9, 0.05) is feasible; a constant stream of symbol 1
    // gives S_n growing like n max_gamma log(gamma_2/0.3) > 0
    FiniteGsprt t(p0, fam, 2.0, 50.0, 10000);
    std::optional<Decision> dec;
    std::int64_t steps = 0;
    while (!dec) {
        dec = t.step(1);
        ++steps;
    }
    REQUIRE(*dec == Decision::H1);
    // drift: max gamma_2 = 1 - 2 c0 = 0.9 -> log(0.9/0.3) per step
    const double drift = std::log(0.9 / 0.3);
    const double expected = std::ceil(2.0 / drift);
    REQUIRE(std::abs(static_cast<double>(steps) - expected) <= 1.0);
}

TEST_CASE("run: stream helper and empty-stream truncation") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    std::vector<int> stream(40, 1);
    const auto out = run(stream, p0, fam, 2.0, 50.0, 10000);
    REQUIRE(out.decision == Decision::H1);
    REQUIRE(out.S_tau > 2.0);

    std::vector<int> shortstream(3, 0);
    const auto trunc = run(shortstream, p0, fam, 1e6, 1e6, 10000);
    REQUIRE(trunc.decision == Decision::Truncated);
    REQUIRE(trunc.tau == 3);
}

TEST_CASE("raising A cannot flip H0 to H1 and only delays H1 decisions") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    Philox master(2718, 0);
    double cdf_g[3] = {0.3, 0.72, 1.0};  // sample from gamma' in Gamma
    double cdf_0[3] = {0.5, 0.8, 1.0};
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<int> stream;
        const bool under_h0 = rep % 2 == 0;
        Philox rng(1000 + rep, 0);
        for (int k = 0; k < 3000; ++k)
            stream.push_back(rng.next_categorical(under_h0 ? cdf_0 : cdf_g, 3));
        const auto lo = run(stream, p0, fam, 3.0, 6.0, 2500);
        const auto hi = run(stream, p0, fam, 6.0, 6.0, 2500);
        if (lo.decision == Decision::H0) {
            REQUIRE(hi.decision != Decision::H1);
            REQUIRE(hi.tau == lo.tau);  // same path to the lower barrier
        }
        if (lo.decision == Decision::H1 && hi.decision == Decision::H1)
            REQUIRE(hi.tau >= lo.tau);
    }
    (void)master;
}

TEST_CASE("type-II bound: empirical error under e^{-B}(1 + 3 binom se)") {
    // Under gamma-sampling the sup statistic dominates every fixed-gamma
    // chain, so the per-gamma supermartingale bound e^{-B} carries over to
    // the composite test. (The A side enjoys no such finite-sample bound;
    // see the acceptance suite.)
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    const double B = std::log(20.0);  // e^{-B} = 0.05
    const Distribution gp({0.3, 0.42, 0.28});
    McConfig cfg;
    cfg.trials = 4000;
    cfg.seed = 99;
    cfg.n = 4000;
    cfg.n_max = 4000;
    const auto rec = run_gsprt_trials(p0, fam, gp, 0, 1, std::log(1000.0), B, cfg);
    std::int64_t errs = 0;
    for (const auto& r : rec)
        if (r.decision != Decision::H1) ++errs;
    const double phat = static_cast<double>(errs) / static_cast<double>(cfg.trials);
    const double bound = 0.05;
    const double se = std::sqrt(bound * (1.0 - bound) / static_cast<double>(cfg.trials));
    REQUIRE(phat <= bound * (1.0 + 3.0 * se / bound));
}

TEST_CASE("first-order thresholds give mostly correct decisions at modest n") {
    const auto fam = testutil::running_family();
    const auto p0 = testutil::running_p0();
    const long n = 400;
    const auto thr = first_order_thresholds(p0, fam, n, 0.7 * kCorner0, 0.7 * kCorner1);
    McConfig cfg;
    cfg.trials = 2000;
    cfg.seed = 11;
    cfg.n = n;
    const auto rec0 = run_gsprt_trials(p0, fam, p0, -1, 0, thr.A, thr.B, cfg);
    std::int64_t h0 = 0;
    for (const auto& r : rec0)
        if (r.decision == Decision::H0) ++h0;
    const double freq0 = static_cast<double>(h0) / static_cast<double>(cfg.trials);
    REQUIRE(freq0 >= 0.98);

    const Distribution gp({0.3, 0.42, 0.28});
    const auto rec1 = run_gsprt_trials(p0, fam, gp, 0, 1, thr.A, thr.B, cfg);
    std::int64_t h1 = 0;
    for (const auto& r : rec1)
        if (r.decision == Decision::H1) ++h1;
    REQUIRE(static_cast<double>(h1) / static_cast<double>(cfg.trials) >= 0.95);
}
