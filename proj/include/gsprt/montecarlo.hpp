#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gsprt/distribution.hpp"
#include "gsprt/linear_family.hpp"
#include "gsprt/normal.hpp"
#include "gsprt/projection.hpp"
#include "gsprt/rng.hpp"
#include "gsprt/runner.hpp"

namespace gsprt {

struct McConfig {
    std::int64_t trials = 10000;
    std::uint64_t seed = 1;
    std::int64_t n = 1000;   // horizon the probabilistic constraint refers to
    std::int64_t n_max = 0;  // truncation cap; 0 means 50*n
    int workers = 0;         // 0 means hardware concurrency

    std::int64_t horizon_cap() const { return n_max > 0 ? n_max : 50 * n; }
    int effective_workers() const {
        if (workers > 0) return workers;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }
};

/// Binomial rate with a Wilson 95% interval.
struct RateEstimate {
    double value = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::int64_t count = 0;
    std::int64_t trials = 0;

    double half_width() const { return 0.5 * (hi - lo); }
};

inline RateEstimate wilson_estimate(std::int64_t count, std::int64_t trials) {
    if (trials <= 0) throw std::invalid_argument("wilson_estimate: trials must be positive");
    const double z = 1.959963984540054;
    const double nn = static_cast<double>(trials);
    const double p = static_cast<double>(count) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double hw = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    RateEstimate e;
    e.value = p;
    e.lo = count == 0 ? 0.0 : std::max(0.0, center - hw);
    e.hi = count == trials ? 1.0 : std::min(1.0, center + hw);
    e.count = count;
    e.trials = trials;
    return e;
}

struct TrialRecord {
    std::int64_t trial = 0;
    int gamma_id = -1;  // -1 for H0 sampling, else index into the panel
    Decision decision = Decision::Truncated;
    std::int64_t tau = 0;
    double S_tau = 0.0;
};

namespace detail {

template <class Fn>
inline void parallel_for(std::int64_t count, int workers, Fn&& fn) {
    workers = std::max(1, static_cast<int>(std::min<std::int64_t>(workers, count)));
    if (workers == 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    const std::int64_t chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = w * chunk;
        const std::int64_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

// Stream ids: hypothesis block << 40 plus trial index, so every
// (hypothesis, trial) pair owns a disjoint counter range.
inline std::uint64_t stream_id(int block, std::int64_t trial) {
    return (static_cast<std::uint64_t>(block) << 40) + static_cast<std::uint64_t>(trial);
}

}  // namespace detail

/// Run independent GSPRT trials with i.i.d. sampling from `source`.
/// Per-trial Philox streams make the records a pure function of
/// (seed, stream block, trial index), whatever the worker count.
inline std::vector<TrialRecord> run_gsprt_trials(const Distribution& p0, const LinearFamily& fam,
                                                 const Distribution& source, int gamma_id,
                                                 int stream_block, double A, double B,
                                                 const McConfig& cfg) {
    const int d = p0.d();
    std::vector<double> cdf(static_cast<size_t>(d));
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        acc += source[i];
        cdf[static_cast<size_t>(i)] = acc;
    }
    std::vector<TrialRecord> records(static_cast<size_t>(cfg.trials));
    const std::int64_t cap = cfg.horizon_cap();
    detail::parallel_for(cfg.trials, cfg.effective_workers(), [&](std::int64_t t) {
        Philox rng(cfg.seed, detail::stream_id(stream_block, t));
        FiniteGsprt test(p0, fam, A, B, cap);
        TestOutcome out;
        for (;;) {
            const int x = rng.next_categorical(cdf.data(), d);
            if (auto dec = test.step(x)) {
                out = test.outcome(*dec);
                break;
            }
        }
        records[static_cast<size_t>(t)] = TrialRecord{t, gamma_id, out.decision, out.tau, out.S_tau};
    });
    return records;
}

struct PanelEstimate {
    std::vector<double> gamma;
    RateEstimate p01;   // H0 declared (or truncated) under this gamma
    RateEstimate tail;  // P(tau > n) under this gamma
};

struct ErrorEstimates {
    RateEstimate p10;    // H1 declared (or truncated) under H0
    RateEstimate tail0;  // P(tau > n) under H0
    std::vector<PanelEstimate> p01;
    double p01_max = 0.0;
    double truncation_rate = 0.0;
};

/// Error probabilities with the truncated trials counted as errors under both
/// hypotheses. The panel stands in for the sup over Gamma; it must contain the
/// worst-case candidates (the two projection minimizers).
inline ErrorEstimates estimate_errors(const Distribution& p0, const LinearFamily& fam,
                                      const std::vector<Distribution>& panel, double A, double B,
                                      const McConfig& cfg,
                                      std::vector<TrialRecord>* all_records = nullptr) {
    if (panel.empty()) throw std::invalid_argument("estimate_errors: empty gamma panel");
    for (const auto& g : panel)
        if (!fam.contains(g))
            throw std::invalid_argument("estimate_errors: panel member outside the family");

    ErrorEstimates est;
    std::int64_t truncated = 0, total = 0;

    auto records0 = run_gsprt_trials(p0, fam, p0, -1, 0, A, B, cfg);
    std::int64_t err = 0, tail = 0;
    for (const auto& r : records0) {
        if (r.decision != Decision::H0) ++err;
        if (r.decision == Decision::Truncated) ++truncated;
        if (r.tau > cfg.n) ++tail;
    }
    total += cfg.trials;
    est.p10 = wilson_estimate(err, cfg.trials);
    est.tail0 = wilson_estimate(tail, cfg.trials);
    if (all_records) all_records->insert(all_records->end(), records0.begin(), records0.end());

    for (size_t k = 0; k < panel.size(); ++k) {
        auto rec = run_gsprt_trials(p0, fam, panel[k], static_cast<int>(k),
                                    static_cast<int>(k) + 1, A, B, cfg);
        err = tail = 0;
        for (const auto& r : rec) {
            if (r.decision != Decision::H1) ++err;
            if (r.decision == Decision::Truncated) ++truncated;
            if (r.tau > cfg.n) ++tail;
        }
        total += cfg.trials;
        PanelEstimate pe;
        pe.gamma = panel[k].probs();
        pe.p01 = wilson_estimate(err, cfg.trials);
        pe.tail = wilson_estimate(tail, cfg.trials);
        est.p01_max = std::max(est.p01_max, pe.p01.value);
        est.p01.push_back(std::move(pe));
        if (all_records) all_records->insert(all_records->end(), rec.begin(), rec.end());
    }
    est.truncation_rate = static_cast<double>(truncated) / static_cast<double>(total);
    return est;
}

struct TailEstimates {
    RateEstimate tail0;
    std::vector<PanelEstimate> panel;  // tail field populated; p01 left zero
};

/// Empirical P(tau > n): trials are capped at n+0 steps since only the
/// indicator matters.
inline TailEstimates stopping_tail(const Distribution& p0, const LinearFamily& fam,
                                   const std::vector<Distribution>& panel, double A, double B,
                                   const McConfig& cfg) {
    McConfig capped = cfg;
    capped.n_max = cfg.n;
    TailEstimates out;
    auto tally = [&](const std::vector<TrialRecord>& rec) {
        std::int64_t tail = 0;
        for (const auto& r : rec)
            if (r.decision == Decision::Truncated) ++tail;
        return wilson_estimate(tail, capped.trials);
    };
    out.tail0 = tally(run_gsprt_trials(p0, fam, p0, -1, 0, A, B, capped));
    for (size_t k = 0; k < panel.size(); ++k) {
        if (!fam.contains(panel[k]))
            throw std::invalid_argument("stopping_tail: panel member outside the family");
        PanelEstimate pe;
        pe.gamma = panel[k].probs();
        pe.tail = tally(run_gsprt_trials(p0, fam, panel[k], static_cast<int>(k),
                                         static_cast<int>(k) + 1, A, B, capped));
        out.panel.push_back(std::move(pe));
    }
    return out;
}

/// One-sample Kolmogorov-Smirnov distance to the standard normal.
inline double ks_distance_to_std_normal(std::vector<double> sample) {
    if (sample.empty()) throw std::invalid_argument("ks: empty sample");
    std::sort(sample.begin(), sample.end());
    const double N = static_cast<double>(sample.size());
    double dist = 0.0;
    for (size_t i = 0; i < sample.size(); ++i) {
        const double F = normal_cdf(sample[i]);
        dist = std::max(dist, std::abs(static_cast<double>(i + 1) / N - F));
        dist = std::max(dist, std::abs(F - static_cast<double>(i) / N));
    }
    return dist;
}

struct CltReport {
    double ks_distance = 0.0;
    double sample_mean = 0.0;
    double sample_var = 0.0;
    double D = 0.0;  // f(p0) = min D(p0||p_gamma)
    double V = 0.0;  // relative entropy variance at the projection of p0
    std::int64_t n = 0;
    std::int64_t trials = 0;
    std::vector<double> bin_edges;
    std::vector<std::int64_t> bin_counts;
};

/// Distribution check of the centered projection statistic under H0:
/// sqrt(n) (f(Q_n) - D) / sqrt(V) against N(0,1). f(Q) = -S_n/n, so this is
/// the statistic whose limit law the second-order analysis establishes.
inline CltReport clt_check(const Distribution& p0, const LinearFamily& fam, std::int64_t n,
                           std::int64_t trials, std::uint64_t seed, int workers = 0) {
    if (n < 1 || trials < 2) throw std::invalid_argument("clt_check: need n >= 1, trials >= 2");
    ProjectionResult pr = project(p0, p0, fam);
    if (!pr.converged) throw std::runtime_error("clt_check: projection of p0 did not converge");
    const double D = pr.f_value;
    const double V = relative_entropy_variance(p0, pr.gamma_dist());
    if (!(V > 0.0)) throw std::runtime_error("clt_check: degenerate variance");

    const int d = p0.d();
    std::vector<double> cdf(static_cast<size_t>(d));
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        acc += p0[i];
        cdf[static_cast<size_t>(i)] = acc;
    }
    std::vector<double> stat(static_cast<size_t>(trials));
    const double scale = std::sqrt(static_cast<double>(n)) / std::sqrt(V);
    McConfig wcfg;
    wcfg.workers = workers;
    detail::parallel_for(trials, wcfg.effective_workers(), [&](std::int64_t t) {
        Philox rng(seed, detail::stream_id(0, t));
        EmpiricalType type(d);
        for (std::int64_t k = 0; k < n; ++k) type.add(rng.next_categorical(cdf.data(), d));
        ProjectionContext ctx(p0, fam);  // fresh per trial: records are worker-independent
        const double f = ctx.f_of_type(type);
        stat[static_cast<size_t>(t)] = scale * (f - D);
    });

    CltReport rep;
    rep.D = D;
    rep.V = V;
    rep.n = n;
    rep.trials = trials;
    double mean = 0.0;
    for (double s : stat) mean += s;
    mean /= static_cast<double>(trials);
    double var = 0.0;
    for (double s : stat) var += (s - mean) * (s - mean);
    var /= static_cast<double>(trials - 1);
    rep.sample_mean = mean;
    rep.sample_var = var;

    const int nbins = 40;
    rep.bin_edges.resize(nbins + 1);
    rep.bin_counts.assign(nbins, 0);
    for (int b = 0; b <= nbins; ++b)
        rep.bin_edges[static_cast<size_t>(b)] = -4.0 + 8.0 * b / nbins;
    for (double s : stat) {
        int b = static_cast<int>(std::floor((s + 4.0) / 8.0 * nbins));
        b = std::max(0, std::min(nbins - 1, b));
        ++rep.bin_counts[static_cast<size_t>(b)];
    }
    rep.ks_distance = ks_distance_to_std_normal(std::move(stat));
    return rep;
}

struct UwllnReport {
    double delta = 0.0;
    std::int64_t n = 0;
    RateEstimate freq_n;
    RateEstimate freq_4n;
};

/// Empirical decay of the uniform-LLN deviation surrogate
/// |f(p0) - f(Q_n)| = |max_g avg_n(g) - max_g E_0 avg(g)|, which lower-bounds
/// the sup of the centered log-likelihood averages and costs one projection
/// per trial (f(p0) is shared). Reports P(|dev| >= delta) at n and 4n.
inline UwllnReport uwlln_check(const Distribution& p0, const LinearFamily& fam, std::int64_t n,
                               double delta, std::int64_t trials, std::uint64_t seed,
                               int workers = 0) {
    if (!(delta > 0.0)) throw std::invalid_argument("uwlln_check: delta must be positive");
    if (n < 1 || trials < 1) throw std::invalid_argument("uwlln_check: need n, trials >= 1");
    ProjectionResult pr = project(p0, p0, fam);
    if (!pr.converged) throw std::runtime_error("uwlln_check: projection of p0 did not converge");
    const double fp0 = pr.f_value;

    const int d = p0.d();
    std::vector<double> cdf(static_cast<size_t>(d));
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        acc += p0[i];
        cdf[static_cast<size_t>(i)] = acc;
    }
    McConfig wcfg;
    wcfg.workers = workers;
    auto exceedance = [&](std::int64_t horizon, int block) {
        std::vector<unsigned char> hit(static_cast<size_t>(trials), 0);
        detail::parallel_for(trials, wcfg.effective_workers(), [&](std::int64_t t) {
            Philox rng(seed, detail::stream_id(block, t));
            EmpiricalType type(d);
            for (std::int64_t k = 0; k < horizon; ++k)
                type.add(rng.next_categorical(cdf.data(), d));
            ProjectionContext ctx(p0, fam);
            const double dev = std::abs(fp0 - ctx.f_of_type(type));
            hit[static_cast<size_t>(t)] = dev >= delta ? 1 : 0;
        });
        std::int64_t c = 0;
        for (auto h : hit) c += h;
        return wilson_estimate(c, trials);
    };

    UwllnReport rep;
    rep.delta = delta;
    rep.n = n;
    rep.freq_n = exceedance(n, 0);
    rep.freq_4n = exceedance(4 * n, 1);
    return rep;
}

/// Fixed CSV schema: trial_id,hypothesis,gamma_id,decision,tau,S_tau.
inline void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
    os << "trial_id,hypothesis,gamma_id,decision,tau,S_tau\n";
    char buf[64];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.S_tau);
        os << r.trial << ',' << (r.gamma_id < 0 ? "H0" : "H1") << ',' << r.gamma_id << ','
           << to_string(r.decision) << ',' << r.tau << ',' << buf << '\n';
    }
}

}  // namespace gsprt
