#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gsprt/distribution.hpp"

namespace gsprt {

inline constexpr double kFeasTol = 1e-10;

/// One halfspace w . gamma <= xi.
struct Halfspace {
    std::vector<double> w;
    double xi = 0.0;
};

namespace detail {

/// Dense LU solve with partial pivoting for the small systems used throughout.
/// Returns false when the matrix is numerically singular.
inline bool lu_solve(std::vector<double>& A, std::vector<double>& x, int n) {
    std::vector<int> piv(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) piv[static_cast<size_t>(i)] = i;
    for (int k = 0; k < n; ++k) {
        int p = k;
        double amax = std::abs(A[static_cast<size_t>(k * n + k)]);
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(A[static_cast<size_t>(i * n + k)]);
            if (v > amax) { amax = v; p = i; }
        }
        if (amax < 1e-14) return false;
        if (p != k) {
            for (int j = 0; j < n; ++j)
                std::swap(A[static_cast<size_t>(k * n + j)], A[static_cast<size_t>(p * n + j)]);
            std::swap(x[static_cast<size_t>(k)], x[static_cast<size_t>(p)]);
        }
        for (int i = k + 1; i < n; ++i) {
            const double f = A[static_cast<size_t>(i * n + k)] / A[static_cast<size_t>(k * n + k)];
            A[static_cast<size_t>(i * n + k)] = 0.0;
            if (f == 0.0) continue;
            for (int j = k + 1; j < n; ++j)
                A[static_cast<size_t>(i * n + j)] -= f * A[static_cast<size_t>(k * n + j)];
            x[static_cast<size_t>(i)] -= f * x[static_cast<size_t>(k)];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = x[static_cast<size_t>(i)];
        for (int j = i + 1; j < n; ++j)
            s -= A[static_cast<size_t>(i * n + j)] * x[static_cast<size_t>(j)];
        x[static_cast<size_t>(i)] = s / A[static_cast<size_t>(i * n + i)];
    }
    return true;
}

// Enumerate k-subsets of {0..m-1} in lexicographic order.
inline bool next_subset(std::vector<int>& idx, int m) {
    const int k = static_cast<int>(idx.size());
    int i = k - 1;
    while (i >= 0 && idx[static_cast<size_t>(i)] == m - k + i) --i;
    if (i < 0) return false;
    ++idx[static_cast<size_t>(i)];
    for (int j = i + 1; j < k; ++j)
        idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
    return true;
}

}  // namespace detail

/// Convex uncertainty set given by linear inequalities on the simplex,
/// with the positivity margin gamma_i >= c0 folded into the constraint list.
/// Row layout: user rows first, then the d bound rows -gamma_i <= -c0.
class LinearFamily {
  public:
    LinearFamily(int d, std::vector<Halfspace> user_rows, double c0 = 1e-3)
        : d_(d), c0_(c0), n_user_(static_cast<int>(user_rows.size())) {
        if (d_ < 2) throw std::invalid_argument("LinearFamily: need d >= 2");
        if (!(c0_ > 0.0)) throw std::invalid_argument("LinearFamily: c0 must be > 0");
        if (user_rows.empty())
            throw std::invalid_argument("LinearFamily: need at least one constraint");
        for (const auto& h : user_rows)
            if (static_cast<int>(h.w.size()) != d_)
                throw std::invalid_argument("LinearFamily: constraint length != d");
        rows_ = std::move(user_rows);
        for (int i = 0; i < d_; ++i) {
            Halfspace b;
            b.w.assign(static_cast<size_t>(d_), 0.0);
            b.w[static_cast<size_t>(i)] = -1.0;
            b.xi = -c0_;
            rows_.push_back(std::move(b));
        }
    }

    int d() const { return d_; }
    double c0() const { return c0_; }
    int n_user() const { return n_user_; }
    int n_rows() const { return static_cast<int>(rows_.size()); }
    const Halfspace& row(int k) const { return rows_[static_cast<size_t>(k)]; }
    const std::vector<Halfspace>& rows() const { return rows_; }

    double slack(int k, const double* g) const {
        const auto& h = rows_[static_cast<size_t>(k)];
        double s = h.xi;
        for (int i = 0; i < d_; ++i) s -= h.w[static_cast<size_t>(i)] * g[i];
        return s;
    }

    /// Smallest slack over all rows (negative means infeasible).
    double min_slack(const double* g) const {
        double m = slack(0, g);
        for (int k = 1; k < n_rows(); ++k) m = std::min(m, slack(k, g));
        return m;
    }

    bool contains_raw(const double* g, double tol = kFeasTol) const {
        return min_slack(g) >= -tol;
    }

    bool contains(const Distribution& g, double tol = kFeasTol) const {
        if (g.d() != d_) throw std::invalid_argument("LinearFamily::contains: dimension mismatch");
        return contains_raw(g.probs().data(), tol);
    }

    /// Maximum of min-slack over the simplex, with its attaining point.
    /// Solved exactly by enumerating vertices of the epigraph polytope in
    /// (gamma, t); the scale is small enough that this beats an iterative LP.
    std::pair<double, std::vector<double>> max_slack_point() const {
        const int m = n_rows() + 1;  // slack rows plus the cap t <= 1
        const int nv = d_ + 1;       // variables (gamma, t)
        double best_t = -1e100;
        std::vector<double> best_g;
        std::vector<int> idx(static_cast<size_t>(d_));
        for (int i = 0; i < d_; ++i) idx[static_cast<size_t>(i)] = i;
        std::vector<double> A(static_cast<size_t>(nv * nv));
        std::vector<double> rhs(static_cast<size_t>(nv));
        do {
            // simplex equality plus d active rows
            std::fill(A.begin(), A.end(), 0.0);
            for (int j = 0; j < d_; ++j) A[static_cast<size_t>(j)] = 1.0;
            A[static_cast<size_t>(d_)] = 0.0;
            rhs[0] = 1.0;
            for (int r = 0; r < d_; ++r) {
                const int k = idx[static_cast<size_t>(r)];
                double* arow = &A[static_cast<size_t>((r + 1) * nv)];
                if (k < n_rows()) {
                    for (int j = 0; j < d_; ++j) arow[j] = rows_[static_cast<size_t>(k)].w[static_cast<size_t>(j)];
                    arow[d_] = 1.0;
                    rhs[static_cast<size_t>(r + 1)] = rows_[static_cast<size_t>(k)].xi;
                } else {
                    arow[d_] = 1.0;  // t <= 1
                    rhs[static_cast<size_t>(r + 1)] = 1.0;
                }
            }
            std::vector<double> Awork = A, x = rhs;
            if (!detail::lu_solve(Awork, x, nv)) continue;
            const double t = x[static_cast<size_t>(d_)];
            if (t <= best_t) continue;
            bool feas = true;
            for (int k = 0; k < n_rows() && feas; ++k)
                if (slack(k, x.data()) < t - 1e-9) feas = false;
            if (feas && t <= 1.0 + 1e-9) {
                best_t = t;
                best_g.assign(x.begin(), x.begin() + d_);
            }
        } while (detail::next_subset(idx, m));
        if (best_g.empty())
            throw std::runtime_error("LinearFamily: degenerate constraint system");
        return {best_t, best_g};
    }

    bool feasible(double tol = kFeasTol) const { return max_slack_point().first > tol; }

    /// Deterministic strictly-interior point (the max-slack point).
    Distribution interior_point() const {
        auto [t, g] = max_slack_point();
        if (t <= kFeasTol)
            throw std::runtime_error("LinearFamily: empty interior (max slack " +
                                     std::to_string(t) + ")");
        for (double& v : g) v = std::max(v, 0.0);
        return Distribution::normalized(std::move(g));
    }

    /// Vertices of the feasible polytope (deduplicated, deterministic order).
    std::vector<std::vector<double>> vertices(double tol = 1e-9) const {
        std::vector<std::vector<double>> out;
        if (d_ < 2) return out;
        const int m = n_rows();
        std::vector<int> idx(static_cast<size_t>(d_ - 1));
        for (int i = 0; i < d_ - 1; ++i) idx[static_cast<size_t>(i)] = i;
        std::vector<double> A(static_cast<size_t>(d_ * d_));
        std::vector<double> rhs(static_cast<size_t>(d_));
        do {
            std::fill(A.begin(), A.end(), 0.0);
            for (int j = 0; j < d_; ++j) A[static_cast<size_t>(j)] = 1.0;
            rhs[0] = 1.0;
            for (int r = 0; r < d_ - 1; ++r) {
                const int k = idx[static_cast<size_t>(r)];
                for (int j = 0; j < d_; ++j)
                    A[static_cast<size_t>((r + 1) * d_ + j)] =
                        rows_[static_cast<size_t>(k)].w[static_cast<size_t>(j)];
                rhs[static_cast<size_t>(r + 1)] = rows_[static_cast<size_t>(k)].xi;
            }
            std::vector<double> Awork = A, x = rhs;
            if (!detail::lu_solve(Awork, x, d_)) continue;
            if (!contains_raw(x.data(), tol)) continue;
            bool dup = false;
            for (const auto& v : out) {
                double dist = 0.0;
                for (int j = 0; j < d_; ++j) dist = std::max(dist, std::abs(v[static_cast<size_t>(j)] - x[static_cast<size_t>(j)]));
                if (dist < tol) { dup = true; break; }
            }
            if (!dup) out.push_back(x);
        } while (detail::next_subset(idx, m));
        return out;
    }

  private:
    int d_;
    double c0_;
    int n_user_;
    std::vector<Halfspace> rows_;
};

}  // namespace gsprt
