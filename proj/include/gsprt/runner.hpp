#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>

#include "gsprt/distribution.hpp"
#include "gsprt/linear_family.hpp"
#include "gsprt/projection.hpp"

namespace gsprt {

enum class Decision { H0, H1, Truncated };

inline const char* to_string(Decision d) {
    switch (d) {
        case Decision::H0: return "H0";
        case Decision::H1: return "H1";
        default: return "truncated";
    }
}

struct TestOutcome {
    Decision decision = Decision::Truncated;
    std::int64_t tau = 0;
    double S_tau = 0.0;
    std::int64_t trajectory_len = 0;
};

struct GsprtState {
    EmpiricalType type;
    double S_n = 0.0;
    double A = 0.0;
    double B = 0.0;
    std::int64_t n_max = 0;
    bool done = false;

    GsprtState(int d, double a, double b, std::int64_t nmax)
        : type(d), A(a), B(b), n_max(nmax) {
        if (!(A > 0.0) || !(B > 0.0))
            throw std::invalid_argument("GsprtState: thresholds A and B must be positive");
        if (n_max < 1) throw std::invalid_argument("GsprtState: n_max must be >= 1");
    }
};

/// Streaming GSPRT on a finite alphabet: S_n = -n f(Q), stop on S_n > A or
/// S_n < -B, truncate at n_max. Exact equality with a threshold continues
/// sampling.
class FiniteGsprt {
  public:
    FiniteGsprt(const Distribution& p0, const LinearFamily& fam, double A, double B,
                std::int64_t n_max, double tol = 1e-10)
        : ctx_(p0, fam, tol), st_(fam.d(), A, B, n_max) {}

    const GsprtState& state() const { return st_; }

    std::optional<Decision> step(int symbol) {
        if (st_.done) throw std::logic_error("FiniteGsprt::step: decision already emitted");
        st_.type.add(symbol);
        const double f = ctx_.f_of_type(st_.type);
        st_.S_n = -static_cast<double>(st_.type.n) * f;
        if (st_.S_n > st_.A) {
            st_.done = true;
            return Decision::H1;
        }
        if (st_.S_n < -st_.B) {
            st_.done = true;
            return Decision::H0;
        }
        if (st_.type.n >= st_.n_max) {
            st_.done = true;
            return Decision::Truncated;
        }
        return std::nullopt;
    }

    TestOutcome outcome(Decision d) const {
        return TestOutcome{d, st_.type.n, st_.S_n, st_.type.n};
    }

  private:
    ProjectionContext ctx_;
    GsprtState st_;
};

/// Fold a fixed symbol stream through the test. An exhausted stream counts as
/// truncation at the stream length.
inline TestOutcome run(std::span<const int> stream, const Distribution& p0,
                       const LinearFamily& fam, double A, double B, std::int64_t n_max) {
    FiniteGsprt t(p0, fam, A, B, n_max);
    for (int x : stream) {
        if (auto d = t.step(x)) return t.outcome(*d);
    }
    TestOutcome out = t.outcome(Decision::Truncated);
    out.tau = static_cast<std::int64_t>(stream.size());
    return out;
}

}  // namespace gsprt
