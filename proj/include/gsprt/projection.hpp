#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gsprt/distribution.hpp"
#include "gsprt/linear_family.hpp"

namespace gsprt {

/// Certified solution of a projection program over a LinearFamily.
/// mu holds one multiplier per folded constraint row (user rows first, then
/// the positivity bounds), zero on inactive rows.
struct ProjectionResult {
    std::vector<double> gamma;
    double f_value = 0.0;
    double lambda = 0.0;
    std::vector<double> mu;
    std::vector<int> active_set;
    double kkt_residual = 0.0;
    bool converged = false;
    int iterations = 0;

    Distribution gamma_dist() const { return Distribution(gamma); }
};

struct SquareMatrix {
    int n = 0;
    std::vector<double> a;

    explicit SquareMatrix(int size) : n(size), a(static_cast<size_t>(size * size), 0.0) {}
    double& at(int r, int c) { return a[static_cast<size_t>(r * n + c)]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r * n + c)]; }
};

struct SolveOptions {
    double tol = 1e-10;
    int max_iter = 10000;
    bool alt_order = false;                      // explore candidate sets in reversed order
    const std::vector<int>* warm_active = nullptr;
    const std::vector<double>* start = nullptr;  // strictly positive starting gamma
};

namespace detail {

enum class ProjKind { forward, reverse };

// Separable objectives. forward: min sum q_i log(p0_i/g_i); its g-dependent
// part is sum -q_i log g_i. reverse: min sum g_i log(g_i/p0_i).
struct Objective {
    ProjKind kind;
    const double* q;    // forward only
    const double* p0;
    int d;

    double grad(int i, double g) const {
        if (kind == ProjKind::forward) return q[i] == 0.0 ? 0.0 : -q[i] / g;
        return std::log(g / p0[i]) + 1.0;
    }
    double curv(int i, double g) const {
        if (kind == ProjKind::forward) return q[i] == 0.0 ? 0.0 : q[i] / (g * g);
        return 1.0 / g;
    }
    bool needs_positive(int i) const {
        return kind == ProjKind::reverse || q[i] != 0.0;
    }
    double value(const double* g) const {
        double s = 0.0;
        if (kind == ProjKind::forward) {
            for (int i = 0; i < d; ++i)
                if (q[i] > 0.0) s += q[i] * std::log(p0[i] / g[i]);
        } else {
            for (int i = 0; i < d; ++i)
                if (g[i] > 0.0) s += g[i] * std::log(g[i] / p0[i]);
        }
        return s;
    }
};

struct KktPoint {
    std::vector<double> gamma;
    double lambda = 0.0;
    std::vector<double> mu;  // aligned with the candidate active set
    bool ok = false;
    double inner_residual = 0.0;
};

// Newton on the square KKT system for a fixed candidate active set.
inline KktPoint solve_candidate(const Objective& obj, const LinearFamily& fam,
                                const std::vector<int>& act, const std::vector<double>& g0,
                                double lambda0) {
    const int d = obj.d;
    const int s = static_cast<int>(act.size());
    const int N = d + 1 + s;
    KktPoint pt;
    pt.gamma = g0;
    pt.lambda = lambda0;
    pt.mu.assign(static_cast<size_t>(s), 0.0);

    std::vector<double> r(static_cast<size_t>(N));
    std::vector<double> J(static_cast<size_t>(N * N));
    std::vector<double> step(static_cast<size_t>(N));

    auto residual = [&](const std::vector<double>& g, double lam, const std::vector<double>& mu,
                        std::vector<double>& out) {
        double norm = 0.0;
        for (int i = 0; i < d; ++i) {
            double v = obj.grad(i, g[static_cast<size_t>(i)]) + lam;
            for (int k = 0; k < s; ++k)
                v += mu[static_cast<size_t>(k)] *
                     fam.row(act[static_cast<size_t>(k)]).w[static_cast<size_t>(i)];
            out[static_cast<size_t>(i)] = v;
            norm = std::max(norm, std::abs(v));
        }
        double sum = -1.0;
        for (int i = 0; i < d; ++i) sum += g[static_cast<size_t>(i)];
        out[static_cast<size_t>(d)] = sum;
        norm = std::max(norm, std::abs(sum));
        for (int k = 0; k < s; ++k) {
            const auto& h = fam.row(act[static_cast<size_t>(k)]);
            double v = -h.xi;
            for (int i = 0; i < d; ++i) v += h.w[static_cast<size_t>(i)] * g[static_cast<size_t>(i)];
            out[static_cast<size_t>(d + 1 + k)] = v;
            norm = std::max(norm, std::abs(v));
        }
        return norm;
    };

    double rnorm = residual(pt.gamma, pt.lambda, pt.mu, r);
    int stall = 0;
    for (int it = 0; it < 60 && rnorm > 1e-13; ++it) {
        std::fill(J.begin(), J.end(), 0.0);
        for (int i = 0; i < d; ++i) {
            J[static_cast<size_t>(i * N + i)] = obj.curv(i, pt.gamma[static_cast<size_t>(i)]);
            J[static_cast<size_t>(i * N + d)] = 1.0;
            for (int k = 0; k < s; ++k)
                J[static_cast<size_t>(i * N + d + 1 + k)] =
                    fam.row(act[static_cast<size_t>(k)]).w[static_cast<size_t>(i)];
            J[static_cast<size_t>(d * N + i)] = 1.0;
            for (int k = 0; k < s; ++k)
                J[static_cast<size_t>((d + 1 + k) * N + i)] =
                    fam.row(act[static_cast<size_t>(k)]).w[static_cast<size_t>(i)];
        }
        for (int i = 0; i < N; ++i) step[static_cast<size_t>(i)] = -r[static_cast<size_t>(i)];
        if (!lu_solve(J, step, N)) { pt.ok = false; pt.inner_residual = rnorm; return pt; }

        // fraction-to-boundary on coordinates the objective needs positive
        double alpha = 1.0;
        for (int i = 0; i < d; ++i) {
            if (!obj.needs_positive(i)) continue;
            const double dg = step[static_cast<size_t>(i)];
            if (dg < 0.0)
                alpha = std::min(alpha, -0.995 * pt.gamma[static_cast<size_t>(i)] / dg);
        }

        std::vector<double> gnew = pt.gamma;
        std::vector<double> munew = pt.mu;
        double lamnew = pt.lambda;
        double rnew = rnorm;
        bool accepted = false;
        for (int half = 0; half < 12; ++half) {
            for (int i = 0; i < d; ++i)
                gnew[static_cast<size_t>(i)] =
                    pt.gamma[static_cast<size_t>(i)] + alpha * step[static_cast<size_t>(i)];
            lamnew = pt.lambda + alpha * step[static_cast<size_t>(d)];
            for (int k = 0; k < s; ++k)
                munew[static_cast<size_t>(k)] =
                    pt.mu[static_cast<size_t>(k)] + alpha * step[static_cast<size_t>(d + 1 + k)];
            rnew = residual(gnew, lamnew, munew, r);
            if (rnew < rnorm || half == 11) { accepted = true; break; }
            alpha *= 0.5;
        }
        (void)accepted;
        if (rnew >= rnorm) {
            if (++stall >= 3) { pt.gamma = gnew; pt.lambda = lamnew; pt.mu = munew; rnorm = rnew; break; }
        } else {
            stall = 0;
        }
        pt.gamma = gnew;
        pt.lambda = lamnew;
        pt.mu = munew;
        rnorm = rnew;
    }
    // residual() left `r` evaluated at the final point
    rnorm = residual(pt.gamma, pt.lambda, pt.mu, r);
    pt.inner_residual = rnorm;
    pt.ok = rnorm < 1e-9;
    return pt;
}

inline double full_residual(const Objective& obj, const LinearFamily& fam,
                            const std::vector<double>& gamma, double lambda,
                            const std::vector<double>& mu) {
    const int d = obj.d;
    double res = 0.0;
    for (int i = 0; i < d; ++i) {
        double v = obj.grad(i, gamma[static_cast<size_t>(i)]) + lambda;
        for (int k = 0; k < fam.n_rows(); ++k)
            v += mu[static_cast<size_t>(k)] * fam.row(k).w[static_cast<size_t>(i)];
        res = std::max(res, std::abs(v));
    }
    double sum = -1.0;
    for (int i = 0; i < d; ++i) sum += gamma[static_cast<size_t>(i)];
    res = std::max(res, std::abs(sum));
    for (int k = 0; k < fam.n_rows(); ++k) {
        const double sl = fam.slack(k, gamma.data());
        res = std::max(res, std::max(0.0, -sl));                       // primal feasibility
        res = std::max(res, std::abs(mu[static_cast<size_t>(k)] * sl));  // complementary slackness
        res = std::max(res, std::max(0.0, -mu[static_cast<size_t>(k)]));  // dual feasibility
    }
    return res;
}

// Log-barrier path following with an equality-constrained Newton inner loop.
// Last-resort path; returns a strictly feasible near-optimal point.
inline std::vector<double> barrier_solve(const Objective& obj, const LinearFamily& fam,
                                         std::vector<double> g) {
    const int d = obj.d;
    const int N = d + 1;
    std::vector<double> J(static_cast<size_t>(N * N)), rhs(static_cast<size_t>(N));
    for (double t = 1e-2; t > 1e-12; t *= 0.2) {
        for (int it = 0; it < 40; ++it) {
            std::fill(J.begin(), J.end(), 0.0);
            std::fill(rhs.begin(), rhs.end(), 0.0);
            for (int i = 0; i < d; ++i) {
                J[static_cast<size_t>(i * N + d)] = 1.0;
                J[static_cast<size_t>(d * N + i)] = 1.0;
                J[static_cast<size_t>(i * N + i)] = obj.curv(i, g[static_cast<size_t>(i)]);
                rhs[static_cast<size_t>(i)] = -obj.grad(i, g[static_cast<size_t>(i)]);
            }
            double sum = -1.0;
            for (int i = 0; i < d; ++i) sum += g[static_cast<size_t>(i)];
            rhs[static_cast<size_t>(d)] = -sum;
            for (int k = 0; k < fam.n_rows(); ++k) {
                const auto& h = fam.row(k);
                const double sl = fam.slack(k, g.data());
                for (int i = 0; i < d; ++i) {
                    rhs[static_cast<size_t>(i)] -= t * h.w[static_cast<size_t>(i)] / sl;
                    for (int j = 0; j < d; ++j)
                        J[static_cast<size_t>(i * N + j)] +=
                            t * h.w[static_cast<size_t>(i)] * h.w[static_cast<size_t>(j)] / (sl * sl);
                }
            }
            std::vector<double> Jw = J, dx = rhs;
            if (!lu_solve(Jw, dx, N)) return g;
            double alpha = 1.0;
            for (int k = 0; k < fam.n_rows(); ++k) {
                const auto& h = fam.row(k);
                double dslack = 0.0;
                for (int i = 0; i < d; ++i) dslack -= h.w[static_cast<size_t>(i)] * dx[static_cast<size_t>(i)];
                if (dslack < 0.0)
                    alpha = std::min(alpha, -0.9 * fam.slack(k, g.data()) / dslack);
            }
            double norm = 0.0;
            for (int i = 0; i < d; ++i) {
                g[static_cast<size_t>(i)] += alpha * dx[static_cast<size_t>(i)];
                norm = std::max(norm, std::abs(dx[static_cast<size_t>(i)]));
            }
            if (norm * alpha < 1e-13) break;
        }
    }
    return g;
}

}  // namespace detail

/// KKT certificate: max-norm of stationarity, feasibility, complementary
/// slackness and dual feasibility violations of a forward-projection result.
inline double kkt_residual(const Distribution& q, const ProjectionResult& r,
                           const Distribution& p0, const LinearFamily& fam) {
    detail::Objective obj{detail::ProjKind::forward, q.probs().data(), p0.probs().data(), q.d()};
    return detail::full_residual(obj, fam, r.gamma, r.lambda, r.mu);
}

namespace detail {

// Shared driver: warm/heuristic active-set iteration, then exhaustive
// candidate enumeration, then the barrier fallback.
inline ProjectionResult solve_projection(ProjKind kind, const double* q, const Distribution& p0,
                                         const LinearFamily& fam, const SolveOptions& opts) {
    const int d = fam.d();
    const int m = fam.n_rows();
    Objective obj{kind, q, p0.probs().data(), d};

    ProjectionResult out;
    out.mu.assign(static_cast<size_t>(m), 0.0);

    // Interior optimum: forward projects to q itself, reverse to p0.
    const double* unconstrained = (kind == ProjKind::forward) ? q : p0.probs().data();
    if (fam.contains_raw(unconstrained)) {
        out.gamma.assign(unconstrained, unconstrained + d);
        out.lambda = (kind == ProjKind::forward) ? 1.0 : std::numeric_limits<double>::quiet_NaN();
        if (kind == ProjKind::reverse) {
            // stationarity log(g/p0)+1+lambda = 0 at g = p0
            out.lambda = -1.0;
        }
        out.f_value = obj.value(out.gamma.data());
        out.kkt_residual = full_residual(obj, fam, out.gamma, out.lambda, out.mu);
        out.converged = out.kkt_residual <= opts.tol;
        return out;
    }

    // starting point: clip the unconstrained optimum away from zero
    std::vector<double> g0(static_cast<size_t>(d));
    if (opts.start) {
        g0 = *opts.start;
    } else {
        double sum = 0.0;
        for (int i = 0; i < d; ++i) {
            g0[static_cast<size_t>(i)] = std::max(unconstrained[i], fam.c0());
            sum += g0[static_cast<size_t>(i)];
        }
        for (int i = 0; i < d; ++i) g0[static_cast<size_t>(i)] /= sum;
    }
    const double lambda0 = (kind == ProjKind::forward) ? 1.0 : -1.0;

    auto package = [&](const KktPoint& pt, const std::vector<int>& act) {
        out.gamma = pt.gamma;
        out.lambda = pt.lambda;
        std::fill(out.mu.begin(), out.mu.end(), 0.0);
        out.active_set.clear();
        for (size_t k = 0; k < act.size(); ++k) {
            out.mu[static_cast<size_t>(act[k])] = std::max(pt.mu[k], 0.0);
            out.active_set.push_back(act[k]);
        }
        std::sort(out.active_set.begin(), out.active_set.end());
        out.f_value = obj.value(out.gamma.data());
        out.kkt_residual = full_residual(obj, fam, out.gamma, out.lambda, out.mu);
        out.converged = out.kkt_residual <= opts.tol;
    };

    // Phase 1: active-set iteration from the warm or heuristic seed.
    std::vector<int> act;
    if (opts.warm_active) {
        act = *opts.warm_active;
        std::sort(act.begin(), act.end());
    } else {
        int worst = -1;
        double wv = 1e-12;
        for (int k = 0; k < m; ++k) {
            const double v = -fam.slack(k, unconstrained);
            if (v > wv) { wv = v; worst = k; }
        }
        if (worst >= 0) act.push_back(worst);
    }

    std::set<std::vector<int>> visited;
    std::vector<double> gseed = g0;
    for (int round = 0; round < 60; ++round) {
        if (static_cast<int>(act.size()) > d) break;
        if (!visited.insert(act).second) break;  // cycle -> enumeration
        KktPoint pt = solve_candidate(obj, fam, act, gseed, lambda0);
        if (!pt.ok) break;
        // drop the most negative multiplier first
        int drop = -1;
        double mmin = -1e-12;
        for (size_t k = 0; k < act.size(); ++k)
            if (pt.mu[k] < mmin) { mmin = pt.mu[k]; drop = static_cast<int>(k); }
        if (drop >= 0) {
            act.erase(act.begin() + drop);
            continue;
        }
        bool pos_ok = true;
        for (int i = 0; i < d; ++i)
            if (obj.needs_positive(i) && !(pt.gamma[static_cast<size_t>(i)] > 0.0)) pos_ok = false;
        if (!pos_ok) break;
        int add = -1;
        double worst = 1e-12;
        for (int k = 0; k < m; ++k) {
            if (std::find(act.begin(), act.end(), k) != act.end()) continue;
            const double v = -fam.slack(k, pt.gamma.data());
            if (v > worst) { worst = v; add = k; }
        }
        if (add >= 0) {
            act.push_back(add);
            std::sort(act.begin(), act.end());
            gseed = g0;  // re-seed; the violated iterate may be far outside
            continue;
        }
        package(pt, act);
        if (out.converged) { out.iterations = round + 1; return out; }
        break;
    }

    // Phase 2: enumerate candidate active sets by size.
    for (int size = 0; size <= std::min(d, m); ++size) {
        std::vector<std::vector<int>> subsets;
        if (size == 0) {
            subsets.push_back({});
        } else {
            std::vector<int> idx(static_cast<size_t>(size));
            for (int i = 0; i < size; ++i) idx[static_cast<size_t>(i)] = i;
            do {
                subsets.push_back(idx);
            } while (next_subset(idx, m));
        }
        if (opts.alt_order) std::reverse(subsets.begin(), subsets.end());
        for (const auto& cand : subsets) {
            KktPoint pt = solve_candidate(obj, fam, cand, g0, lambda0);
            if (!pt.ok) continue;
            bool dual_ok = true;
            for (double mk : pt.mu)
                if (mk < -1e-11) { dual_ok = false; break; }
            if (!dual_ok) continue;
            if (fam.min_slack(pt.gamma.data()) < -1e-9) continue;
            package(pt, cand);
            if (out.converged) return out;
        }
    }

    // Phase 3: barrier fallback, then polish on the detected active face.
    std::vector<double> gb;
    try {
        gb = fam.interior_point().probs();
    } catch (const std::exception&) {
        gb = g0;
    }
    gb = barrier_solve(obj, fam, std::move(gb));
    act.clear();
    for (int k = 0; k < m; ++k)
        if (fam.slack(k, gb.data()) < 1e-6) act.push_back(k);
    if (static_cast<int>(act.size()) <= d) {
        KktPoint pt = solve_candidate(obj, fam, act, gb, lambda0);
        if (pt.ok) {
            package(pt, act);
            if (out.converged) return out;
        }
    }
    // best effort: report the barrier point with its residual
    out.gamma = gb;
    out.lambda = lambda0;
    std::fill(out.mu.begin(), out.mu.end(), 0.0);
    out.active_set = act;
    out.f_value = obj.value(gb.data());
    out.kkt_residual = full_residual(obj, fam, out.gamma, out.lambda, out.mu);
    out.converged = false;
    return out;
}

}  // namespace detail

/// Information projection of q: the unique minimizer of
/// sum_i q(i) log(p0(i)/gamma_i) over the family (Gamma in the configs).
inline ProjectionResult project(const Distribution& q, const Distribution& p0,
                                const LinearFamily& fam, const SolveOptions& opts = {}) {
    if (q.d() != fam.d() || p0.d() != fam.d())
        throw std::invalid_argument("project: dimension mismatch");
    if (!p0.strictly_positive())
        throw std::invalid_argument("project: p0 must be strictly positive");
    return detail::solve_projection(detail::ProjKind::forward, q.probs().data(), p0, fam, opts);
}

/// Reverse projection: minimizer of D(gamma || p0) over the family.
inline ProjectionResult project_reverse(const Distribution& p0, const LinearFamily& fam,
                                        const SolveOptions& opts = {}) {
    if (p0.d() != fam.d())
        throw std::invalid_argument("project_reverse: dimension mismatch");
    if (!p0.strictly_positive())
        throw std::invalid_argument("project_reverse: p0 must be strictly positive");
    return detail::solve_projection(detail::ProjKind::reverse, nullptr, p0, fam, opts);
}

/// f(q) = sum q(i) log(p0(i)/g_i(q)); the hot-path statistic is S_n = -n f(Q).
/// Keeps warm-start state across calls, which does not change results beyond
/// the solver tolerance.
class ProjectionContext {
  public:
    ProjectionContext(Distribution p0, const LinearFamily& fam, double tol = 1e-10)
        : p0_(std::move(p0)), fam_(&fam), tol_(tol) {
        if (p0_.d() != fam_->d())
            throw std::invalid_argument("ProjectionContext: dimension mismatch");
        qbuf_.assign(static_cast<size_t>(fam_->d()), 0.0);
    }

    const Distribution& p0() const { return p0_; }
    const LinearFamily& family() const { return *fam_; }

    double f_of_type(const EmpiricalType& t) {
        if (t.d() != fam_->d())
            throw std::invalid_argument("f_of_type: dimension mismatch");
        if (t.n <= 0) throw std::invalid_argument("f_of_type: empty type");
        const double inv = 1.0 / static_cast<double>(t.n);
        for (int i = 0; i < t.d(); ++i)
            qbuf_[static_cast<size_t>(i)] = static_cast<double>(t.counts[static_cast<size_t>(i)]) * inv;
        return f_raw(qbuf_.data());
    }

    double f_of(const Distribution& q) {
        if (q.d() != fam_->d()) throw std::invalid_argument("f_of: dimension mismatch");
        return f_raw(q.probs().data());
    }

    /// Full result for the last f_of/f_of_type call.
    const ProjectionResult& last() const { return last_; }

  private:
    double f_raw(const double* q) {
        SolveOptions opts;
        opts.tol = tol_;
        if (have_warm_) {
            opts.warm_active = &warm_act_;
            opts.start = warm_gamma_.empty() ? nullptr : &warm_gamma_;
        }
        last_ = detail::solve_projection(detail::ProjKind::forward, q, p0_, *fam_, opts);
        if (last_.converged) {
            warm_act_ = last_.active_set;
            bool pos = true;
            for (double v : last_.gamma)
                if (!(v > 0.0)) pos = false;
            warm_gamma_ = pos ? last_.gamma : std::vector<double>{};
            have_warm_ = true;
        } else {
            have_warm_ = false;
        }
        return last_.f_value;
    }

    Distribution p0_;
    const LinearFamily* fam_;
    double tol_;
    std::vector<double> qbuf_;
    std::vector<int> warm_act_;
    std::vector<double> warm_gamma_;
    bool have_warm_ = false;
    ProjectionResult last_;
};

inline double f_of_type(const Distribution& q, ProjectionContext& ctx) { return ctx.f_of(q); }

/// Lowest coordinate whose active-row coefficient stays away from xi;
/// the chart for the closed-form Jacobian excludes this symbol.
inline int distinguished_symbol(const LinearFamily& fam, int active_row) {
    const auto& h = fam.row(active_row);
    for (int j = 0; j < fam.d(); ++j)
        if (std::abs(h.w[static_cast<size_t>(j)] - h.xi) >= 1e-8) return j;
    throw std::domain_error("distinguished_symbol: every coefficient equals xi");
}

/// Closed-form (d-1)x(d-1) diagonal Jacobian at a single-active-row solution:
/// entries 1 + (q(j0)-g(j0))(w_i - xi)/(g(j0)(w(j0) - xi)) over i != j0.
inline SquareMatrix jacobian_closed_form(const ProjectionResult& r, const Distribution& q,
                                         const LinearFamily& fam) {
    if (r.active_set.size() != 1)
        throw std::domain_error("jacobian_closed_form: requires exactly one active constraint");
    const int row = r.active_set.front();
    const auto& h = fam.row(row);
    const int j0 = distinguished_symbol(fam, row);
    const int d = fam.d();
    SquareMatrix J(d - 1);
    const double denom = r.gamma[static_cast<size_t>(j0)] * (h.w[static_cast<size_t>(j0)] - h.xi);
    const double num = q[j0] - r.gamma[static_cast<size_t>(j0)];
    int rIdx = 0;
    for (int i = 0; i < d; ++i) {
        if (i == j0) continue;
        J.at(rIdx, rIdx) = 1.0 + num * (h.w[static_cast<size_t>(i)] - h.xi) / denom;
        ++rIdx;
    }
    return J;
}

namespace detail {

struct PerturbedSolves {
    std::vector<std::vector<double>> diff;   // per direction c != j0: centered dg/dt
    std::vector<double> dlambda;             // centered dlambda/dt per direction
    std::vector<std::vector<double>> dmu;    // centered dmu/dt per direction, full row vector
    std::vector<int> active;
    int j0 = 0;
};

inline PerturbedSolves central_differences(const Distribution& q, const Distribution& p0,
                                           const LinearFamily& fam, double h, double tol) {
    const int d = q.d();
    SolveOptions opts;
    opts.tol = tol;
    ProjectionResult base = project(q, p0, fam, opts);
    if (!base.converged)
        throw std::runtime_error("numerical jacobian: base projection did not converge");
    PerturbedSolves out;
    out.active = base.active_set;
    out.j0 = base.active_set.size() == 1 ? distinguished_symbol(fam, base.active_set.front()) : 0;

    for (int c = 0; c < d; ++c) {
        if (c == out.j0) continue;
        std::vector<double> qp = q.probs(), qm = q.probs();
        qp[static_cast<size_t>(c)] += h;
        qp[static_cast<size_t>(out.j0)] -= h;
        qm[static_cast<size_t>(c)] -= h;
        qm[static_cast<size_t>(out.j0)] += h;
        for (double v : qp)
            if (v < 0.0) throw std::domain_error("numerical jacobian: step leaves the simplex");
        for (double v : qm)
            if (v < 0.0) throw std::domain_error("numerical jacobian: step leaves the simplex");
        ProjectionResult rp = project(Distribution(qp), p0, fam, opts);
        ProjectionResult rm = project(Distribution(qm), p0, fam, opts);
        if (!rp.converged || !rm.converged)
            throw std::runtime_error("numerical jacobian: perturbed projection did not converge");
        if (rp.active_set != base.active_set || rm.active_set != base.active_set)
            throw std::runtime_error("numerical jacobian: active set changed under perturbation"
                                     " (step too large)");
        std::vector<double> dgdt(static_cast<size_t>(d));
        for (int i = 0; i < d; ++i)
            dgdt[static_cast<size_t>(i)] =
                (rp.gamma[static_cast<size_t>(i)] - rm.gamma[static_cast<size_t>(i)]) / (2.0 * h);
        out.diff.push_back(std::move(dgdt));
        out.dlambda.push_back((rp.lambda - rm.lambda) / (2.0 * h));
        std::vector<double> dm(static_cast<size_t>(fam.n_rows()));
        for (int k = 0; k < fam.n_rows(); ++k)
            dm[static_cast<size_t>(k)] =
                (rp.mu[static_cast<size_t>(k)] - rm.mu[static_cast<size_t>(k)]) / (2.0 * h);
        out.dmu.push_back(std::move(dm));
    }
    return out;
}

}  // namespace detail

/// Finite-difference twin of the closed-form Jacobian. Central differences of
/// the full KKT solution (g, lambda, mu) along mass-moving directions
/// e_c - e_j0 give, per coordinate i, the stationarity differential
///   dq(i) = J_ii dg_i + g_i (dlambda + sum_k dmu_k w_ki),
/// from which the diagonal is a one-dimensional least-squares fit over the
/// directions. In the interior g is locally the identity and the raw
/// difference matrix is returned.
inline SquareMatrix numerical_jacobian(const Distribution& q, const Distribution& p0,
                                       const LinearFamily& fam, double h, double tol = 1e-10) {
    if (!(h >= 1e-7 && h <= 1e-4))
        throw std::invalid_argument("numerical_jacobian: h must lie in [1e-7, 1e-4]");
    const int d = q.d();
    SolveOptions opts;
    opts.tol = tol;
    ProjectionResult base = project(q, p0, fam, opts);
    if (!base.converged) throw std::runtime_error("numerical_jacobian: projection did not converge");

    auto per = detail::central_differences(q, p0, fam, h, tol);
    const int nd = d - 1;

    if (per.active.empty()) {
        // interior: g is locally the identity on the simplex chart
        SquareMatrix J(nd);
        int col = 0;
        for (int c = 0; c < d; ++c) {
            if (c == per.j0) continue;
            int rowi = 0;
            for (int i = 0; i < d; ++i) {
                if (i == per.j0) continue;
                J.at(rowi, col) = per.diff[static_cast<size_t>(col)][static_cast<size_t>(i)];
                ++rowi;
            }
            ++col;
        }
        return J;
    }

    std::vector<int> coords;
    for (int i = 0; i < d; ++i)
        if (i != per.j0) coords.push_back(i);

    SquareMatrix J(nd);
    for (int r = 0; r < nd; ++r) {
        const int i = coords[static_cast<size_t>(r)];
        double num = 0.0, den = 0.0;
        for (int c = 0; c < nd; ++c) {
            double shift = per.dlambda[static_cast<size_t>(c)];
            for (int k : per.active)
                shift += per.dmu[static_cast<size_t>(c)][static_cast<size_t>(k)] *
                         fam.row(k).w[static_cast<size_t>(i)];
            const double dq = (coords[static_cast<size_t>(c)] == i) ? 1.0 : 0.0;
            const double lhs = dq - base.gamma[static_cast<size_t>(i)] * shift;
            const double dg = per.diff[static_cast<size_t>(c)][static_cast<size_t>(i)];
            num += lhs * dg;
            den += dg * dg;
        }
        if (den < 1e-20)
            throw std::domain_error("numerical_jacobian: g is locally constant along every"
                                    " tangent direction (face too small at this d)");
        J.at(r, r) = num / den;
    }
    return J;
}

/// Residual of the identity sum_j (q(j)/g_j(q)) dg_j/dq(i) = 0 along
/// mass-moving directions, evaluated by central differences.
inline double derivative_identity_residual(const Distribution& q, const Distribution& p0,
                                           const LinearFamily& fam, double h, double tol = 1e-10) {
    if (!(h >= 1e-7 && h <= 1e-4))
        throw std::invalid_argument("derivative_identity_residual: h must lie in [1e-7, 1e-4]");
    if (!q.strictly_positive())
        throw std::domain_error("derivative_identity_residual: q must be strictly positive");
    SolveOptions opts;
    opts.tol = tol;
    ProjectionResult base = project(q, p0, fam, opts);
    if (!base.converged)
        throw std::runtime_error("derivative_identity_residual: projection did not converge");
    auto per = detail::central_differences(q, p0, fam, h, tol);
    double worst = 0.0;
    for (const auto& dgdt : per.diff) {
        double s = 0.0;
        for (int j = 0; j < q.d(); ++j)
            s += q[j] / base.gamma[static_cast<size_t>(j)] * dgdt[static_cast<size_t>(j)];
        worst = std::max(worst, std::abs(s));
    }
    return worst;
}

}  // namespace gsprt
