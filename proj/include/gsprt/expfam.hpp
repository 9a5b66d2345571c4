#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsprt/runner.hpp"

namespace gsprt {

/// Gaussian in mean/variance and natural coordinates
/// (gamma_1, gamma_2) = (mu/sigma^2, -1/(2 sigma^2)).
struct GaussianParams {
    double mu = 0.0;
    double sigma2 = 1.0;

    GaussianParams() = default;
    GaussianParams(double m, double s2) : mu(m), sigma2(s2) {
        if (!(sigma2 > 0.0)) throw std::invalid_argument("GaussianParams: sigma2 must be > 0");
    }

    std::pair<double, double> natural() const { return {mu / sigma2, -0.5 / sigma2}; }

    static GaussianParams from_natural(double g1, double g2) {
        if (!(g2 < 0.0)) throw std::invalid_argument("GaussianParams: natural g2 must be < 0");
        const double s2 = -0.5 / g2;
        return GaussianParams(g1 * s2, s2);
    }
};

/// D(N(a) || N(b)) = log(s_b/s_a) + (s_a^2 + (mu_a-mu_b)^2)/(2 s_b^2) - 1/2.
inline double gaussian_kl(const GaussianParams& a, const GaussianParams& b) {
    const double dm = a.mu - b.mu;
    return 0.5 * std::log(b.sigma2 / a.sigma2) + (a.sigma2 + dm * dm) / (2.0 * b.sigma2) - 0.5;
}

/// (D, V) of the log-ratio log(p_a/p_b) under a. The variance is
/// ((s_a^2/s_b^2 - 1)^2)/2 + s_a^2 (mu_a-mu_b)^2 / s_b^4 in closed form.
inline std::pair<double, double> gaussian_rev(const GaussianParams& a, const GaussianParams& b) {
    const double rho = a.sigma2 / b.sigma2;
    const double dm = a.mu - b.mu;
    const double V = 0.5 * (rho - 1.0) * (rho - 1.0) + a.sigma2 * dm * dm / (b.sigma2 * b.sigma2);
    return {gaussian_kl(a, b), V};
}

/// Canonical exponential family through callables: density h(x) exp(g.T(x) - A(g)).
/// Only the Gaussian instance ships with closed forms; other families plug in
/// their own T, A and derivatives.
struct ExpFamily {
    int dim = 0;
    std::function<void(double, double*)> T;                      // T(x) into dim slots
    std::function<double(const double*)> A;                      // cumulant
    std::function<void(const double*, double*)> gradA;           // dim slots
    std::function<void(const double*, double*)> hessA;           // dim*dim row-major
};

inline ExpFamily gaussian_family() {
    ExpFamily f;
    f.dim = 2;
    f.T = [](double x, double* out) {
        out[0] = x;
        out[1] = x * x;
    };
    f.A = [](const double* g) {
        return -g[0] * g[0] / (4.0 * g[1]) - 0.5 * std::log(-2.0 * g[1]);
    };
    f.gradA = [](const double* g, double* out) {
        out[0] = -g[0] / (2.0 * g[1]);
        out[1] = g[0] * g[0] / (4.0 * g[1] * g[1]) - 0.5 / g[1];
    };
    f.hessA = [](const double* g, double* out) {
        out[0] = -0.5 / g[1];
        out[1] = out[2] = 0.5 * g[0] / (g[1] * g[1]);
        out[3] = -0.5 * g[0] * g[0] / (g[1] * g[1] * g[1]) + 0.5 / (g[1] * g[1]);
    };
    return f;
}

/// Axis-aligned box in natural-parameter space; the compact convex Gamma of
/// the parametric model.
struct ParamBox {
    std::vector<double> lo, hi;

    ParamBox(std::vector<double> l, std::vector<double> h) : lo(std::move(l)), hi(std::move(h)) {
        if (lo.size() != hi.size() || lo.empty())
            throw std::invalid_argument("ParamBox: lo/hi size mismatch");
        for (size_t i = 0; i < lo.size(); ++i)
            if (!(lo[i] <= hi[i]))
                throw std::invalid_argument("ParamBox: lo must be <= hi coordinate-wise");
    }

    int dim() const { return static_cast<int>(lo.size()); }

    bool contains(const double* g, double tol = 0.0) const {
        for (int i = 0; i < dim(); ++i)
            if (g[i] < lo[static_cast<size_t>(i)] - tol || g[i] > hi[static_cast<size_t>(i)] + tol)
                return false;
        return true;
    }
};

struct MaxLoglikResult {
    double value = 0.0;             // max_gamma sum_i xi_gamma(x_i)
    std::vector<double> gamma_hat;
    double grad_norm = 0.0;         // projected per-sample gradient at the optimum
    bool boundary_active = false;
    bool converged = false;
};

/// Maximize S_n(gamma) = (gamma-gamma0).s - n A(gamma) + n A(gamma0) over the
/// box, s = sum_i T(x_i). Concave; projected Newton with box clipping.
inline MaxLoglikResult max_loglik_ratio_stats(const ExpFamily& fam, const double* suff_mean,
                                              std::int64_t n, const std::vector<double>& gamma0,
                                              const ParamBox& box,
                                              const std::vector<double>* warm = nullptr) {
    const int k = fam.dim;
    if (box.dim() != k || static_cast<int>(gamma0.size()) != k)
        throw std::invalid_argument("max_loglik_ratio: dimension mismatch");
    if (n < 1) throw std::invalid_argument("max_loglik_ratio: empty sample");

    // normalized objective: (gamma-gamma0).sbar - A(gamma) + A(gamma0).
    // Concave over a box: enumerate face candidates (each coordinate free or
    // pinned at lo/hi), solve the reduced stationarity by Newton, accept the
    // first candidate whose KKT sign conditions hold.
    const double A0 = fam.A(gamma0.data());
    auto value = [&](const double* x) {
        double v = A0 - fam.A(x);
        for (int i = 0; i < k; ++i) v += (x[i] - gamma0[static_cast<size_t>(i)]) * suff_mean[i];
        return v;
    };
    std::vector<double> start(static_cast<size_t>(k));
    if (warm && static_cast<int>(warm->size()) == k && box.contains(warm->data())) {
        start = *warm;
    } else {
        for (int i = 0; i < k; ++i)
            start[static_cast<size_t>(i)] =
                0.5 * (box.lo[static_cast<size_t>(i)] + box.hi[static_cast<size_t>(i)]);
    }

    std::vector<double> grad(static_cast<size_t>(k)), H(static_cast<size_t>(k * k));
    std::vector<double> g(static_cast<size_t>(k)), gtry(static_cast<size_t>(k));
    std::vector<double> best_g;
    double best_pg = 1e300;

    // candidate encoded base-3 per coordinate: 0 free, 1 at lo, 2 at hi
    int ncand = 1;
    for (int i = 0; i < k; ++i) ncand *= 3;
    for (int cand = 0; cand < ncand && best_pg > 1e-10; ++cand) {
        std::vector<int> state(static_cast<size_t>(k));
        int code = cand;
        std::vector<int> free;
        for (int i = 0; i < k; ++i, code /= 3) {
            state[static_cast<size_t>(i)] = code % 3;
            if (state[static_cast<size_t>(i)] == 0) free.push_back(i);
            g[static_cast<size_t>(i)] = state[static_cast<size_t>(i)] == 0
                                            ? start[static_cast<size_t>(i)]
                                            : (state[static_cast<size_t>(i)] == 1
                                                   ? box.lo[static_cast<size_t>(i)]
                                                   : box.hi[static_cast<size_t>(i)]);
        }
        const int nf = static_cast<int>(free.size());
        // Newton on the free coordinates (unconstrained within the domain)
        bool cand_ok = true;
        double fx = value(g.data());
        for (int it = 0; it < 60 && nf > 0; ++it) {
            fam.gradA(g.data(), grad.data());
            double gn = 0.0;
            for (int i : free)
                gn = std::max(gn, std::abs(suff_mean[i] - grad[static_cast<size_t>(i)]));
            if (gn <= 1e-12) break;
            fam.hessA(g.data(), H.data());
            std::vector<double> Hf(static_cast<size_t>(nf * nf)), dxf(static_cast<size_t>(nf));
            for (int a = 0; a < nf; ++a) {
                const int ia = free[static_cast<size_t>(a)];
                dxf[static_cast<size_t>(a)] = suff_mean[ia] - grad[static_cast<size_t>(ia)];
                for (int b = 0; b < nf; ++b)
                    Hf[static_cast<size_t>(a * nf + b)] =
                        H[static_cast<size_t>(ia * k + free[static_cast<size_t>(b)])];
            }
            if (!detail::lu_solve(Hf, dxf, nf)) { cand_ok = false; break; }
            double step = 1.0;
            bool moved = false;
            // near the optimum the value change drops below the FP resolution
            // of f; a small slack keeps the final quadratic steps acceptable
            const double slack = 1e-12 * (1.0 + std::abs(fx));
            for (int bt = 0; bt < 50; ++bt) {
                gtry = g;
                for (int a = 0; a < nf; ++a)
                    gtry[static_cast<size_t>(free[static_cast<size_t>(a)])] +=
                        step * dxf[static_cast<size_t>(a)];
                const double fn = value(gtry.data());
                if (std::isfinite(fn) && fn >= fx - slack) {
                    if (gtry == g) { moved = false; break; }  // bitwise stagnation
                    g = gtry;
                    fx = std::max(fx, fn);
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        if (!cand_ok) continue;
        // primal feasibility of the free block
        for (int i : free)
            if (g[static_cast<size_t>(i)] < box.lo[static_cast<size_t>(i)] - 1e-12 ||
                g[static_cast<size_t>(i)] > box.hi[static_cast<size_t>(i)] + 1e-12)
                cand_ok = false;
        if (!cand_ok) continue;
        // projected-gradient certificate (also encodes the dual sign checks)
        fam.gradA(g.data(), grad.data());
        double pg = 0.0;
        for (int i = 0; i < k; ++i) {
            double v = suff_mean[i] - grad[static_cast<size_t>(i)];
            if (state[static_cast<size_t>(i)] == 1 && v < 0.0) v = 0.0;
            if (state[static_cast<size_t>(i)] == 2 && v > 0.0) v = 0.0;
            pg = std::max(pg, std::abs(v));
        }
        if (pg < best_pg) {
            best_pg = pg;
            best_g = g;
        }
    }
    if (best_g.empty())
        throw std::runtime_error("max_loglik_ratio: no candidate face admitted a solution");
    g = best_g;
    double pgnorm = best_pg;
    bool boundary = false;
    for (int i = 0; i < k; ++i)
        if (g[static_cast<size_t>(i)] <= box.lo[static_cast<size_t>(i)] + 1e-14 ||
            g[static_cast<size_t>(i)] >= box.hi[static_cast<size_t>(i)] - 1e-14)
            boundary = true;
    const bool converged = pgnorm <= 1e-8;
    const double fx = value(g.data());

    MaxLoglikResult out;
    out.value = static_cast<double>(n) * fx;
    out.gamma_hat = std::move(g);
    out.grad_norm = pgnorm;
    out.boundary_active = boundary;
    out.converged = converged;
    if (!out.converged)
        throw std::runtime_error("max_loglik_ratio: projected Newton failed to certify");
    return out;
}

inline MaxLoglikResult max_loglik_ratio(std::span<const double> sample, const GaussianParams& g0,
                                        const ParamBox& box) {
    if (sample.empty()) throw std::invalid_argument("max_loglik_ratio: empty sample");
    const ExpFamily fam = gaussian_family();
    double s[2] = {0.0, 0.0};
    for (double x : sample) {
        s[0] += x;
        s[1] += x * x;
    }
    const double inv = 1.0 / static_cast<double>(sample.size());
    s[0] *= inv;
    s[1] *= inv;
    auto [g1, g2] = g0.natural();
    return max_loglik_ratio_stats(fam, s, static_cast<std::int64_t>(sample.size()), {g1, g2}, box);
}

/// One grid point that failed a check, for diagnostics.
struct GridViolation {
    double g1 = 0.0, g2 = 0.0;
    std::string which;
};

struct ConditionReport {
    bool gamma0_excluded = false;
    bool hess_A_pd = false;
    bool curvature_pd = false;
    bool variance_inequality_ok = false;
    std::vector<GridViolation> violations;  // capped
    std::string details;

    bool ok() const {
        return gamma0_excluded && hess_A_pd && curvature_pd && variance_inequality_ok;
    }
};

namespace detail {
inline double min_eig_2x2(double a, double b, double c) {
    // symmetric [[a, b], [b, c]]
    const double tr = a + c;
    const double det = a * c - b * b;
    const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
    return 0.5 * (tr - disc);
}
}  // namespace detail

/// Decidable pieces of the Gaussian-model assumptions on a 33x33 grid over
/// the natural-parameter box: positive definiteness of the two curvature
/// matrices and the strict variance inequality sigma^2 > (4 mu^2+1)/(3 mu+1).
/// The sub-Gaussian tail condition is not finitely checkable and is not
/// tested here.
inline ConditionReport check_conditions(const GaussianParams& g0, const ParamBox& box,
                                        int grid = 33) {
    if (box.dim() != 2) throw std::invalid_argument("check_conditions: Gaussian box must be 2-d");
    if (!(box.hi[1] < 0.0))
        throw std::invalid_argument("check_conditions: natural g2 must stay negative on the box");
    ConditionReport rep;
    auto [g01, g02] = g0.natural();
    rep.gamma0_excluded = !box.contains(std::array<double, 2>{g01, g02}.data());

    rep.hess_A_pd = rep.curvature_pd = rep.variance_inequality_ok = true;
    const double eig_tol = 1e-10;
    std::ostringstream notes;
    if (!rep.gamma0_excluded) notes << "box contains gamma0; ";

    for (int ia = 0; ia < grid; ++ia) {
        for (int ib = 0; ib < grid; ++ib) {
            const double t1 = grid == 1 ? 0.0 : static_cast<double>(ia) / (grid - 1);
            const double t2 = grid == 1 ? 0.0 : static_cast<double>(ib) / (grid - 1);
            const double g1 = box.lo[0] + t1 * (box.hi[0] - box.lo[0]);
            const double g2 = box.lo[1] + t2 * (box.hi[1] - box.lo[1]);

            const double hA11 = -0.5 / g2;
            const double hA12 = 0.5 * g1 / (g2 * g2);
            const double hA22 = -0.5 * g1 * g1 / (g2 * g2 * g2) + 0.5 / (g2 * g2);
            if (detail::min_eig_2x2(hA11, hA12, hA22) <= eig_tol) {
                rep.hess_A_pd = false;
                if (rep.violations.size() < 16) rep.violations.push_back({g1, g2, "hess_A"});
            }

            const double m11 = 0.25 / (g2 * g2);
            const double m12 = -0.5 * g1 / (g2 * g2 * g2);
            const double m22 =
                0.75 * g1 / (g2 * g2 * g2 * g2) - 0.5 / (g2 * g2 * g2) - 1.0 / (g2 * g2);
            if (detail::min_eig_2x2(m11, m12, m22) <= eig_tol) {
                rep.curvature_pd = false;
                if (rep.violations.size() < 16) rep.violations.push_back({g1, g2, "curvature"});
            }

            const double s2 = -0.5 / g2;
            const double mu = g1 * s2;
            const double bound = (4.0 * mu * mu + 1.0) / (3.0 * mu + 1.0);
            if (!(s2 > bound)) {
                rep.variance_inequality_ok = false;
                if (rep.violations.size() < 16) rep.violations.push_back({g1, g2, "variance"});
            }
        }
    }
    if (!rep.hess_A_pd) notes << "hess_A not PD somewhere; ";
    if (!rep.curvature_pd) notes << "curvature matrix not PD somewhere; ";
    if (!rep.variance_inequality_ok) notes << "variance inequality fails somewhere; ";
    rep.details = notes.str();
    return rep;
}

/// Streaming GSPRT with the parametric maximal log-likelihood statistic in
/// place of -n f(Q). Same stopping rule as the finite-alphabet engine.
class GaussianGsprt {
  public:
    GaussianGsprt(const GaussianParams& g0, const ParamBox& box, double A, double B,
                  std::int64_t n_max)
        : fam_(gaussian_family()), box_(box), A_(A), B_(B), n_max_(n_max) {
        if (!(A > 0.0) || !(B > 0.0))
            throw std::invalid_argument("GaussianGsprt: thresholds must be positive");
        auto [g1, g2] = g0.natural();
        gamma0_ = {g1, g2};
    }

    std::int64_t n() const { return n_; }
    double S_n() const { return S_; }

    std::optional<Decision> step(double x) {
        if (done_) throw std::logic_error("GaussianGsprt::step: decision already emitted");
        ++n_;
        sx_ += x;
        sxx_ += x * x;
        const double sbar[2] = {sx_ / static_cast<double>(n_), sxx_ / static_cast<double>(n_)};
        auto res = max_loglik_ratio_stats(fam_, sbar, n_, gamma0_, box_,
                                          warm_.empty() ? nullptr : &warm_);
        warm_ = res.gamma_hat;
        S_ = res.value;
        if (S_ > A_) { done_ = true; return Decision::H1; }
        if (S_ < -B_) { done_ = true; return Decision::H0; }
        if (n_ >= n_max_) { done_ = true; return Decision::Truncated; }
        return std::nullopt;
    }

    TestOutcome outcome(Decision d) const { return TestOutcome{d, n_, S_, n_}; }

  private:
    ExpFamily fam_;
    ParamBox box_;
    std::vector<double> gamma0_;
    double A_, B_;
    std::int64_t n_max_;
    std::int64_t n_ = 0;
    double sx_ = 0.0, sxx_ = 0.0;
    double S_ = 0.0;
    std::vector<double> warm_;
    bool done_ = false;
};

}  // namespace gsprt
