#pragma once

#include <limits>
#include <span>
#include <vector>

#include "lyap/geometry.hpp"

namespace lyap {

struct RegularityReport {
    double min_gradient_norm = std::numeric_limits<double>::infinity();
    Vector argmin;
    std::vector<Vector> projected;
    int seeds_reaching_critical = 0;  ///< seeds whose projection ran into Crit(f)
    double tolerance = 0.0;
    bool pass = false;
};

/// Projects each seed onto M and records min |grad f| over the projections. Zero is
/// reported as a regular value iff that minimum exceeds `tol`. A seed whose projection
/// path runs into Crit(f) contributes the gradient norm where the flow stopped.
inline RegularityReport check_regular_value(const ScalarField& F, std::span<const Vector> seeds, double tol,
                                            const FootPointOptions& opts = {}) {
    if (seeds.empty()) throw InvalidArgument("check_regular_value: no seeds");
    RegularityReport rep;
    rep.tolerance = tol;
    for (const auto& seed : seeds) {
        Vector q;
        try {
            q = foot_point(F, seed, opts);
        } catch (const CriticalPointError& e) {
            ++rep.seeds_reaching_critical;
            if (e.gradient_norm() < rep.min_gradient_norm) {
                rep.min_gradient_norm = e.gradient_norm();
                rep.argmin = seed;
            }
            continue;
        } catch (const Error& e) {
            throw NewtonError(std::string("check_regular_value: seed failed to project onto M: ") + e.what());
        }
        const double g = F.gradient(q).norm();
        if (g < rep.min_gradient_norm) {
            rep.min_gradient_norm = g;
            rep.argmin = q;
        }
        rep.projected.push_back(std::move(q));
    }
    rep.pass = rep.min_gradient_norm > tol;
    return rep;
}

}  // namespace lyap
