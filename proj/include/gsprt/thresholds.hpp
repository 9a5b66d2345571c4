#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gsprt/distribution.hpp"
#include "gsprt/linear_family.hpp"
#include "gsprt/normal.hpp"
#include "gsprt/projection.hpp"

namespace gsprt {

struct ThresholdPair {
    double A = 0.0;
    double B = 0.0;
    std::vector<double> gamma_A;  // minimizer on the A side
    std::vector<double> gamma_B;  // minimizer on the B side
};

namespace detail {

using FamilyFn = std::function<double(const std::vector<double>&)>;
using FamilyGrad = std::function<void(const std::vector<double>&, std::vector<double>&)>;

// Frank-Wolfe over the polytope (vertex oracle), then Newton on the active
// face. Multi-started; used only for the threshold minimizations, not on the
// sampling hot path.
inline std::pair<double, std::vector<double>> minimize_over_family(
    const LinearFamily& fam, const FamilyFn& F, const FamilyGrad& gradF,
    const std::vector<std::vector<double>>& extra_starts) {
    const int d = fam.d();
    const auto verts = fam.vertices();
    if (verts.empty()) throw std::runtime_error("minimize_over_family: no feasible vertices");

    std::vector<std::vector<double>> starts = extra_starts;
    starts.push_back(fam.interior_point().probs());
    for (const auto& v : verts) starts.push_back(v);
    if (d <= 4) {
        // coarse barycentric restarts
        const int steps = 10;
        std::vector<int> comp(static_cast<size_t>(d), 0);
        std::function<void(int, int)> rec = [&](int pos, int left) {
            if (pos == d - 1) {
                comp[static_cast<size_t>(pos)] = left;
                std::vector<double> g(static_cast<size_t>(d));
                for (int i = 0; i < d; ++i)
                    g[static_cast<size_t>(i)] = static_cast<double>(comp[static_cast<size_t>(i)]) / steps;
                if (fam.contains_raw(g.data(), 1e-12)) starts.push_back(std::move(g));
                return;
            }
            for (int c = 0; c <= left; ++c) {
                comp[static_cast<size_t>(pos)] = c;
                rec(pos + 1, left - c);
            }
        };
        rec(0, steps);
    }

    double best = 1e300;
    std::vector<double> bestx;
    std::vector<double> g(static_cast<size_t>(d));

    auto line_search = [&](const std::vector<double>& x, const std::vector<double>& dir) {
        // ternary search on [0,1]
        double lo = 0.0, hi = 1.0;
        std::vector<double> tmp(static_cast<size_t>(d));
        auto eval = [&](double t) {
            for (int i = 0; i < d; ++i)
                tmp[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] + t * dir[static_cast<size_t>(i)];
            return F(tmp);
        };
        for (int it = 0; it < 80; ++it) {
            const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            if (eval(m1) <= eval(m2)) hi = m2; else lo = m1;
        }
        return 0.5 * (lo + hi);
    };

    for (const auto& s0 : starts) {
        std::vector<double> x = s0;
        double fx = F(x);
        for (int it = 0; it < 200; ++it) {
            gradF(x, g);
            const std::vector<double>* vbest = nullptr;
            double ip_best = 1e300;
            for (const auto& v : verts) {
                double ip = 0.0;
                for (int i = 0; i < d; ++i) ip += g[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
                if (ip < ip_best) { ip_best = ip; vbest = &v; }
            }
            double gap = 0.0;
            std::vector<double> dir(static_cast<size_t>(d));
            for (int i = 0; i < d; ++i) {
                dir[static_cast<size_t>(i)] = (*vbest)[static_cast<size_t>(i)] - x[static_cast<size_t>(i)];
                gap -= g[static_cast<size_t>(i)] * dir[static_cast<size_t>(i)];
            }
            if (gap < 1e-12 * (1.0 + std::abs(fx))) break;
            const double t = line_search(x, dir);
            if (t <= 0.0) break;
            for (int i = 0; i < d; ++i) x[static_cast<size_t>(i)] += t * dir[static_cast<size_t>(i)];
            const double fnew = F(x);
            if (fx - fnew < 1e-15 * (1.0 + std::abs(fx))) { fx = std::min(fx, fnew); break; }
            fx = fnew;
        }
        fx = F(x);
        if (fx < best) { best = fx; bestx = x; }
    }

    // polish on the active face of the incumbent
    std::vector<int> act;
    for (int k = 0; k < fam.n_rows(); ++k)
        if (fam.slack(k, bestx.data()) < 1e-7) act.push_back(k);
    const int s = static_cast<int>(act.size());
    // orthonormal basis of the tangent space {sum dx = 0, active rows dx = 0}
    std::vector<std::vector<double>> rowsp;
    rowsp.push_back(std::vector<double>(static_cast<size_t>(d), 1.0));
    for (int k : act) rowsp.push_back(fam.row(k).w);
    // Gram-Schmidt the row space
    std::vector<std::vector<double>> ortho;
    for (auto r : rowsp) {
        for (const auto& o : ortho) {
            double ip = 0.0;
            for (int i = 0; i < d; ++i) ip += r[static_cast<size_t>(i)] * o[static_cast<size_t>(i)];
            for (int i = 0; i < d; ++i) r[static_cast<size_t>(i)] -= ip * o[static_cast<size_t>(i)];
        }
        double nrm = 0.0;
        for (double v : r) nrm += v * v;
        if (nrm > 1e-16) {
            nrm = std::sqrt(nrm);
            for (double& v : r) v /= nrm;
            ortho.push_back(std::move(r));
        }
    }
    std::vector<std::vector<double>> basis;
    for (int i = 0; i < d; ++i) {
        std::vector<double> e(static_cast<size_t>(d), 0.0);
        e[static_cast<size_t>(i)] = 1.0;
        for (const auto& o : ortho) {
            double ip = 0.0;
            for (int j = 0; j < d; ++j) ip += e[static_cast<size_t>(j)] * o[static_cast<size_t>(j)];
            for (int j = 0; j < d; ++j) e[static_cast<size_t>(j)] -= ip * o[static_cast<size_t>(j)];
        }
        for (const auto& o : basis) {
            double ip = 0.0;
            for (int j = 0; j < d; ++j) ip += e[static_cast<size_t>(j)] * o[static_cast<size_t>(j)];
            for (int j = 0; j < d; ++j) e[static_cast<size_t>(j)] -= ip * o[static_cast<size_t>(j)];
        }
        double nrm = 0.0;
        for (double v : e) nrm += v * v;
        if (nrm > 1e-16) {
            nrm = std::sqrt(nrm);
            for (double& v : e) v /= nrm;
            basis.push_back(std::move(e));
        }
    }
    const int nb = static_cast<int>(basis.size());
    (void)s;
    if (nb > 0) {
        std::vector<double> x = bestx;
        auto feasible = [&](const std::vector<double>& y) { return fam.contains_raw(y.data(), 1e-12); };
        auto rgrad = [&](const std::vector<double>& y, std::vector<double>& out) {
            gradF(y, g);
            out.assign(static_cast<size_t>(nb), 0.0);
            for (int b = 0; b < nb; ++b)
                for (int i = 0; i < d; ++i)
                    out[static_cast<size_t>(b)] += g[static_cast<size_t>(i)] * basis[static_cast<size_t>(b)][static_cast<size_t>(i)];
        };
        std::vector<double> gz(static_cast<size_t>(nb)), gz2(static_cast<size_t>(nb));
        std::vector<double> H(static_cast<size_t>(nb * nb));
        double fx = F(x);
        for (int it = 0; it < 60; ++it) {
            rgrad(x, gz);
            double gn = 0.0;
            for (double v : gz) gn = std::max(gn, std::abs(v));
            if (gn < 1e-12 * (1.0 + std::abs(fx))) break;
            // numeric Hessian in the reduced space
            const double hh = 1e-6;
            std::vector<double> y = x;
            for (int b = 0; b < nb; ++b) {
                for (int i = 0; i < d; ++i)
                    y[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] + hh * basis[static_cast<size_t>(b)][static_cast<size_t>(i)];
                rgrad(y, gz2);
                for (int c = 0; c < nb; ++c)
                    H[static_cast<size_t>(c * nb + b)] = (gz2[static_cast<size_t>(c)] - gz[static_cast<size_t>(c)]) / hh;
            }
            std::vector<double> Hw = H, dz(static_cast<size_t>(nb));
            for (int b = 0; b < nb; ++b) dz[static_cast<size_t>(b)] = -gz[static_cast<size_t>(b)];
            bool newton_ok = lu_solve(Hw, dz, nb);
            double descent = 0.0;
            if (newton_ok)
                for (int b = 0; b < nb; ++b) descent += dz[static_cast<size_t>(b)] * gz[static_cast<size_t>(b)];
            if (!newton_ok || descent >= 0.0)
                for (int b = 0; b < nb; ++b) dz[static_cast<size_t>(b)] = -gz[static_cast<size_t>(b)];
            double step = 1.0;
            bool moved = false;
            for (int bt = 0; bt < 40; ++bt) {
                for (int i = 0; i < d; ++i) {
                    double v = x[static_cast<size_t>(i)];
                    for (int b = 0; b < nb; ++b)
                        v += step * dz[static_cast<size_t>(b)] * basis[static_cast<size_t>(b)][static_cast<size_t>(i)];
                    y[static_cast<size_t>(i)] = v;
                }
                if (feasible(y)) {
                    const double fy = F(y);
                    if (fy < fx) { x = y; fx = fy; moved = true; break; }
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        if (fx < best) { best = fx; bestx = x; }
    }
    return {best, bestx};
}

}  // namespace detail

/// Theorem-1 achievability thresholds:
/// A_n = n (min_gamma D(p_gamma||p0) - eps0), B_n = n (min_gamma D(p0||p_gamma) - eps1).
inline ThresholdPair first_order_thresholds(const Distribution& p0, const LinearFamily& fam,
                                            long n, double eps0, double eps1,
                                            double tol = 1e-10) {
    if (n < 1) throw std::invalid_argument("first_order_thresholds: n must be >= 1");
    SolveOptions opts;
    opts.tol = tol;
    ProjectionResult rev = project_reverse(p0, fam, opts);
    ProjectionResult fwd = project(p0, p0, fam, opts);
    if (!rev.converged || !fwd.converged)
        throw std::runtime_error("first_order_thresholds: projection did not converge");
    const double corner0 = rev.f_value;  // min D(p_gamma || p0)
    const double corner1 = fwd.f_value;  // min D(p0 || p_gamma)
    if (!(eps0 > 0.0 && eps0 < corner0))
        throw std::domain_error("first_order_thresholds: need 0 < eps0 < min D(p_gamma||p0) = " +
                                std::to_string(corner0));
    if (!(eps1 > 0.0 && eps1 < corner1))
        throw std::domain_error("first_order_thresholds: need 0 < eps1 < min D(p0||p_gamma) = " +
                                std::to_string(corner1));
    ThresholdPair out;
    out.A = static_cast<double>(n) * (corner0 - eps0);
    out.B = static_cast<double>(n) * (corner1 - eps1);
    out.gamma_A = rev.gamma;
    out.gamma_B = fwd.gamma;
    return out;
}

/// Theorem-2 achievability thresholds:
/// A_n = n min_gamma (D(p_gamma||p0) + PhiInv(eps-eta0) sqrt(V(p_gamma||p0)/n)),
/// B_n analogous with D(p0||p_gamma) and V(p0||p_gamma).
inline ThresholdPair second_order_thresholds(const Distribution& p0, const LinearFamily& fam,
                                             long n, double eps, double eta0, double eta1,
                                             double tol = 1e-10) {
    if (n < 1) throw std::invalid_argument("second_order_thresholds: n must be >= 1");
    if (!(eps > 0.0 && eps < 1.0 && eta0 > 0.0 && eta0 < eps && eta1 > 0.0 && eta1 < eps))
        throw std::domain_error("second_order_thresholds: need 0 < eta0, eta1 < eps < 1");
    const double cA = gaussian_quantile(eps - eta0) / std::sqrt(static_cast<double>(n));
    const double cB = gaussian_quantile(eps - eta1) / std::sqrt(static_cast<double>(n));
    const auto& q0 = p0.probs();
    const int d = p0.d();

    auto divA = [&](const std::vector<double>& g) {  // D(gamma||p0), V(gamma||p0)
        double D = 0.0, S = 0.0;
        for (int i = 0; i < d; ++i) {
            const double r = std::log(g[static_cast<size_t>(i)] / q0[static_cast<size_t>(i)]);
            D += g[static_cast<size_t>(i)] * r;
            S += g[static_cast<size_t>(i)] * r * r;
        }
        return std::pair<double, double>(D, std::max(S - D * D, 0.0));
    };
    auto divB = [&](const std::vector<double>& g) {  // D(p0||gamma), V(p0||gamma)
        double D = 0.0, S = 0.0;
        for (int i = 0; i < d; ++i) {
            const double r = std::log(q0[static_cast<size_t>(i)] / g[static_cast<size_t>(i)]);
            D += q0[static_cast<size_t>(i)] * r;
            S += q0[static_cast<size_t>(i)] * r * r;
        }
        return std::pair<double, double>(D, std::max(S - D * D, 0.0));
    };

    detail::FamilyFn FA = [&](const std::vector<double>& g) {
        auto [D, V] = divA(g);
        return D + cA * std::sqrt(V);
    };
    detail::FamilyGrad GA = [&](const std::vector<double>& g, std::vector<double>& out) {
        auto [D, V] = divA(g);
        const double sv = V > 1e-14 ? cA / (2.0 * std::sqrt(V)) : 0.0;
        for (int i = 0; i < d; ++i) {
            const double r = std::log(g[static_cast<size_t>(i)] / q0[static_cast<size_t>(i)]);
            const double dV = r * r + 2.0 * r - 2.0 * D * (r + 1.0);
            out[static_cast<size_t>(i)] = (r + 1.0) + sv * dV;
        }
    };
    detail::FamilyFn FB = [&](const std::vector<double>& g) {
        auto [D, V] = divB(g);
        return D + cB * std::sqrt(V);
    };
    detail::FamilyGrad GB = [&](const std::vector<double>& g, std::vector<double>& out) {
        auto [D, V] = divB(g);
        const double sv = V > 1e-14 ? cB / (2.0 * std::sqrt(V)) : 0.0;
        for (int i = 0; i < d; ++i) {
            const double r = std::log(q0[static_cast<size_t>(i)] / g[static_cast<size_t>(i)]);
            const double dD = -q0[static_cast<size_t>(i)] / g[static_cast<size_t>(i)];
            const double dV = 2.0 * (q0[static_cast<size_t>(i)] / g[static_cast<size_t>(i)]) * (D - r);
            out[static_cast<size_t>(i)] = dD + sv * dV;
        }
    };

    SolveOptions popts;
    popts.tol = tol;
    ProjectionResult rev = project_reverse(p0, fam, popts);
    ProjectionResult fwd = project(p0, p0, fam, popts);
    std::vector<std::vector<double>> starts;
    if (rev.converged) starts.push_back(rev.gamma);
    if (fwd.converged) starts.push_back(fwd.gamma);

    auto [minA, argA] = detail::minimize_over_family(fam, FA, GA, starts);
    auto [minB, argB] = detail::minimize_over_family(fam, FB, GB, starts);

    ThresholdPair out;
    out.A = static_cast<double>(n) * minA;
    out.B = static_cast<double>(n) * minB;
    out.gamma_A = std::move(argA);
    out.gamma_B = std::move(argB);
    if (!(out.A > 0.0 && out.B > 0.0))
        throw std::domain_error("second_order_thresholds: thresholds must be positive; n too"
                                " small for the requested eps/eta");
    return out;
}

}  // namespace gsprt
