#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "gsprt/distribution.hpp"
#include "gsprt/linear_family.hpp"
#include "gsprt/projection.hpp"

namespace gsprt {

/// Deterministic, re-runnable checks of the standing assumptions on
/// (p0, Gamma): p0 outside the set, nonempty interior with the positivity
/// margin, a single active constraint at the projection of p0, and the
/// closed-form Jacobian having full rank there.
struct AssumptionReport {
    bool p0_outside = false;
    bool interior_nonempty = false;
    bool margin_ok = false;
    bool single_active = false;
    int active_at_projection = -1;  // row index; -1 none, -2 multiple
    bool distinguished_symbol_ok = false;
    bool jacobian_full_rank = false;
    bool projection_converged = false;
    std::string details;

    bool ok() const {
        return p0_outside && interior_nonempty && margin_ok && single_active &&
               distinguished_symbol_ok && jacobian_full_rank && projection_converged;
    }
};

inline AssumptionReport validate(const LinearFamily& fam, const Distribution& p0) {
    if (p0.d() != fam.d()) throw std::invalid_argument("validate: dimension mismatch");
    if (!p0.strictly_positive())
        throw std::invalid_argument("validate: p0 must be strictly positive");

    AssumptionReport rep;
    std::ostringstream notes;

    rep.margin_ok = fam.c0() > 0.0;
    rep.p0_outside = !fam.contains(p0);
    if (!rep.p0_outside) notes << "p0 satisfies every constraint; ";

    const auto [slack, point] = fam.max_slack_point();
    rep.interior_nonempty = slack > kFeasTol;
    if (!rep.interior_nonempty) {
        notes << "empty interior (max slack " << slack << "); ";
        rep.details = notes.str();
        return rep;  // nothing downstream is meaningful
    }
    (void)point;

    if (rep.p0_outside) {
        ProjectionResult pr = project(p0, p0, fam);
        rep.projection_converged = pr.converged;
        if (!pr.converged) notes << "projection of p0 did not converge; ";
        if (pr.active_set.size() == 1) {
            rep.single_active = true;
            rep.active_at_projection = pr.active_set.front();
            try {
                (void)distinguished_symbol(fam, rep.active_at_projection);
                rep.distinguished_symbol_ok = true;
            } catch (const std::domain_error&) {
                notes << "active row has every coefficient equal to xi; ";
            }
            if (rep.distinguished_symbol_ok) {
                SquareMatrix J = jacobian_closed_form(pr, p0, fam);
                rep.jacobian_full_rank = true;
                for (int i = 0; i < J.n; ++i)
                    if (std::abs(J.at(i, i)) < 1e-10) rep.jacobian_full_rank = false;
                if (!rep.jacobian_full_rank) notes << "Jacobian has a vanishing diagonal entry; ";
            }
        } else if (pr.active_set.empty()) {
            rep.active_at_projection = -1;
            notes << "no active constraint at the projection of p0; ";
        } else {
            rep.active_at_projection = -2;
            notes << pr.active_set.size()
                  << " active constraints at the projection of p0; second-order outputs"
                     " unavailable; ";
        }
    }

    rep.details = notes.str();
    return rep;
}

inline Distribution interior_point(const LinearFamily& fam) { return fam.interior_point(); }

}  // namespace gsprt
