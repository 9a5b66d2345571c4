#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gsprt {

inline constexpr double kProbSumTol = 1e-12;

/// Probability vector on the finite alphabet {0..d-1}, d >= 2.
/// Entries are validated on construction; renormalization happens only on
/// explicit request via normalized().
class Distribution {
  public:
    explicit Distribution(std::vector<double> probs) : p_(std::move(probs)) {
        if (p_.size() < 2)
            throw std::invalid_argument("Distribution: alphabet size must be >= 2");
        double sum = 0.0;
        for (double v : p_) {
            if (!(v >= 0.0))
                throw std::invalid_argument("Distribution: negative or non-finite entry");
            sum += v;
        }
        if (std::abs(sum - 1.0) > kProbSumTol)
            throw std::invalid_argument("Distribution: entries sum to " + std::to_string(sum) +
                                        ", expected 1 within 1e-12");
    }

    static Distribution normalized(std::vector<double> v) {
        double sum = 0.0;
        for (double x : v) {
            if (!(x >= 0.0))
                throw std::invalid_argument("Distribution::normalized: negative entry");
            sum += x;
        }
        if (!(sum > 0.0))
            throw std::invalid_argument("Distribution::normalized: zero mass");
        for (double& x : v) x /= sum;
        return Distribution(std::move(x_fixup(std::move(v))));
    }

    static Distribution uniform(int d) {
        return Distribution(std::vector<double>(static_cast<size_t>(d), 1.0 / d));
    }

    int d() const { return static_cast<int>(p_.size()); }
    double operator[](int i) const { return p_[static_cast<size_t>(i)]; }
    const std::vector<double>& probs() const { return p_; }

    bool strictly_positive() const {
        for (double v : p_)
            if (v <= 0.0) return false;
        return true;
    }

    bool operator==(const Distribution& o) const { return p_ == o.p_; }

  private:
    // After dividing by the sum the entries may still miss 1 by a few ulp;
    // absorb the residue into the largest entry so the constructor check holds.
    static std::vector<double> x_fixup(std::vector<double> v) {
        double sum = 0.0;
        size_t imax = 0;
        for (size_t i = 0; i < v.size(); ++i) {
            sum += v[i];
            if (v[i] > v[imax]) imax = i;
        }
        v[imax] += 1.0 - sum;
        return v;
    }

    std::vector<double> p_;
};

/// Histogram of an observed sequence: counts per symbol plus total n.
struct EmpiricalType {
    std::vector<std::int64_t> counts;
    std::int64_t n = 0;

    explicit EmpiricalType(int d) : counts(static_cast<size_t>(d), 0) {}
    EmpiricalType(std::vector<std::int64_t> c, std::int64_t total)
        : counts(std::move(c)), n(total) {
        std::int64_t s = 0;
        for (auto v : counts) {
            if (v < 0) throw std::invalid_argument("EmpiricalType: negative count");
            s += v;
        }
        if (s != n) throw std::invalid_argument("EmpiricalType: counts do not sum to n");
    }

    int d() const { return static_cast<int>(counts.size()); }

    void add(int symbol) {
        if (symbol < 0 || symbol >= d())
            throw std::out_of_range("EmpiricalType::add: symbol out of range");
        ++counts[static_cast<size_t>(symbol)];
        ++n;
    }

    /// Q(i) = counts[i]/n. Requires n > 0.
    Distribution as_distribution() const {
        if (n <= 0) throw std::logic_error("EmpiricalType: no samples yet");
        std::vector<double> q(counts.size());
        for (size_t i = 0; i < counts.size(); ++i)
            q[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
        return Distribution(std::move(q));
    }
};

inline EmpiricalType updated(EmpiricalType t, int symbol) {
    t.add(symbol);
    return t;
}

namespace detail {
// Shared preamble for the divergence functions.
inline void check_pair(const Distribution& p, const Distribution& q) {
    if (p.d() != q.d())
        throw std::invalid_argument("divergence: dimension mismatch");
    for (int i = 0; i < p.d(); ++i)
        if (p[i] > 0.0 && q[i] == 0.0)
            throw std::domain_error("divergence: infinite (p has mass where q vanishes)");
}
}  // namespace detail

/// KL divergence sum_i p(i) log(p(i)/q(i)) in nats, with 0*log(0/.) = 0.
inline double kl_divergence(const Distribution& p, const Distribution& q) {
    detail::check_pair(p, q);
    double s = 0.0;
    for (int i = 0; i < p.d(); ++i)
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
    return s < 0.0 ? 0.0 : s;  // clamp -0 and rounding residue of the identity case
}

/// Relative entropy variance V(p||q) = Var_p[log p(X)/q(X)] in nats^2.
inline double relative_entropy_variance(const Distribution& p, const Distribution& q) {
    detail::check_pair(p, q);
    double mean = 0.0, sq = 0.0;
    for (int i = 0; i < p.d(); ++i) {
        if (p[i] <= 0.0) continue;
        const double r = std::log(p[i] / q[i]);
        mean += p[i] * r;
        sq += p[i] * r * r;
    }
    const double v = sq - mean * mean;
    return v < 0.0 ? 0.0 : v;
}

}  // namespace gsprt
