#pragma once

// Shared test utilities: an integration-based normal CDF oracle, random
// simplex points, and small statistics helpers. Everything here is
// independent of the library code paths it is used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "gsprt/distribution.hpp"
#include "gsprt/linear_family.hpp"
#include "gsprt/rng.hpp"

namespace testutil {

inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    // n must be even
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol) {
    double coarse = simpson(f, a, b, 64);
    for (int n = 128; n <= 1 << 20; n *= 2) {
        const double fine = simpson(f, a, b, n);
        if (std::abs(fine - coarse) < tol) return fine;
        coarse = fine;
    }
    return coarse;
}

/// Normal CDF by quadrature of the density, the oracle for gaussian_quantile.
inline double phi_quad(double x) {
    auto dens = [](double t) {
        return 0.3989422804014326779 * std::exp(-0.5 * t * t);
    };
    if (x < 0.0) return 0.5 - adaptive_simpson(dens, x, 0.0, 1e-13);
    return 0.5 + adaptive_simpson(dens, 0.0, x, 1e-13);
}

/// Invert phi_quad by bisection; oracle for quantile values.
inline double quantile_quad(double z) {
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (phi_quad(mid) < z) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Uniform (Dirichlet(1)) point on the simplex via normalized exponentials.
inline std::vector<double> random_simplex(gsprt::Philox& rng, int d) {
    std::vector<double> v(static_cast<size_t>(d));
    double sum = 0.0;
    for (int i = 0; i < d; ++i) {
        v[static_cast<size_t>(i)] = -std::log(rng.next_double());
        sum += v[static_cast<size_t>(i)];
    }
    for (auto& x : v) x /= sum;
    return v;
}

inline std::vector<double> random_positive_simplex(gsprt::Philox& rng, int d, double floor) {
    for (;;) {
        auto v = random_simplex(rng, d);
        bool ok = true;
        for (double x : v)
            if (x < floor) ok = false;
        if (ok) return v;
    }
}

inline double linf(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

struct Instance {
    gsprt::Distribution p0;
    gsprt::LinearFamily fam;
    gsprt::Distribution q;
};

/// Random feasible (p0, Gamma, q) triple: 1-3 halfspaces anchored at interior
/// points so the family stays nonempty, c0 in [1e-3, 0.02].
inline Instance random_instance(gsprt::Philox& rng, int d) {
    const auto p0v = random_positive_simplex(rng, d, 0.03);
    for (;;) {
        const double c0 = 1e-3 + rng.next_double() * 0.019;
        const auto anchor = random_positive_simplex(rng, d, 2.5 * c0);
        const int l = 1 + static_cast<int>(rng.next_u64() % 3);
        std::vector<gsprt::Halfspace> rows;
        for (int k = 0; k < l; ++k) {
            gsprt::Halfspace h;
            h.w.resize(static_cast<size_t>(d));
            for (int i = 0; i < d; ++i)
                h.w[static_cast<size_t>(i)] = 2.0 * rng.next_double() - 1.0;
            h.xi = 0.02 + 0.2 * rng.next_double();  // slack at the anchor
            for (int i = 0; i < d; ++i)
                h.xi += h.w[static_cast<size_t>(i)] * anchor[static_cast<size_t>(i)];
            rows.push_back(std::move(h));
        }
        gsprt::LinearFamily fam(d, std::move(rows), c0);
        if (!fam.feasible()) continue;
        const auto qv = random_positive_simplex(rng, d, 1e-4);
        return Instance{gsprt::Distribution(p0v), std::move(fam), gsprt::Distribution(qv)};
    }
}

/// Running-example family gamma_1 <= 0.3, gamma_i >= 0.05 at d = 3.
inline gsprt::LinearFamily running_family() {
    return gsprt::LinearFamily(3, {gsprt::Halfspace{{1.0, 0.0, 0.0}, 0.3}}, 0.05);
}

inline gsprt::Distribution running_p0() { return gsprt::Distribution({0.5, 0.3, 0.2}); }

/// Dense barycentric grid minimization of a function over the family,
/// the brute-force twin of the projection solver at d = 3.
inline std::pair<double, std::vector<double>> grid_minimize(
    const gsprt::LinearFamily& fam, const std::function<double(const std::vector<double>&)>& F,
    int steps) {
    double best = 1e300;
    std::vector<double> argbest;
    std::vector<double> g(3);
    for (int i = 0; i <= steps; ++i) {
        for (int j = 0; j <= steps - i; ++j) {
            g[0] = static_cast<double>(i) / steps;
            g[1] = static_cast<double>(j) / steps;
            g[2] = 1.0 - g[0] - g[1];
            if (!fam.contains_raw(g.data(), 1e-12)) continue;
            const double v = F(g);
            if (v < best) {
                best = v;
                argbest = g;
            }
        }
    }
    return {best, argbest};
}

}  // namespace testutil
