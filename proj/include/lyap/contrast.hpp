#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "lyap/dynamics.hpp"

namespace lyap {

/// Trapping interval of a one-dimensional potential found by a grid scan.
struct Barrier {
    double left = 0.0;   ///< argmax of U on [-a, 0)
    double right = 0.0;  ///< argmax of U on (0, a]
    double height = 0.0;  ///< min(U(left), U(right))
    double radius = 0.0;
    int scan_points = 0;
};

/// Scans `points` equispaced samples of [-a, a]. Motions starting inside (left, right) with
/// energy below `height` cannot reach either endpoint.
template <class Fn>
Barrier locate_barrier(const Fn& U, double radius, int points) {
    if (!(radius > 0.0)) throw InvalidArgument("locate_barrier: radius must be positive");
    if (points < 3) throw InvalidArgument("locate_barrier: need at least 3 scan points");
    Barrier b;
    b.radius = radius;
    b.scan_points = points;
    double best_left = -std::numeric_limits<double>::infinity();
    double best_right = best_left;
    for (int i = 0; i < points; ++i) {
        const double x = -radius + 2.0 * radius * i / double(points - 1);
        const double u = U(x);
        if (x < 0.0 && u > best_left) {
            best_left = u;
            b.left = x;
        } else if (x > 0.0 && u > best_right) {
            best_right = u;
            b.right = x;
        }
    }
    if (!(best_left > 0.0) || !(best_right > 0.0))
        throw InvalidArgument("locate_barrier: no positive barrier on both sides of the origin");
    b.height = std::min(best_left, best_right);
    return b;
}

struct BoundedOrbit {
    double x0 = 0.0;
    double v0 = 0.0;
    double energy = 0.0;
    double min_x = 0.0;
    double max_x = 0.0;
    double max_transverse = 0.0;  ///< max |y| for two-dimensional demos
    double energy_drift = 0.0;
    bool inside = false;
};

struct BoundedOrbitReport {
    std::string potential;
    Barrier barrier;
    double t_end = 0.0;
    std::vector<BoundedOrbit> orbits;
    bool all_inside = false;
};

struct ContrastOptions {
    double radius = 2.0;
    int scan_points = 20001;
    int trajectories = 10;
    double t_end = 1000.0;
    IntegratorOptions integrator{Scheme::verlet4, 0.01, 0, 1e6};
};

/// Sub-barrier motions of a plain potential whose first coordinate follows the Painleve
/// profile. Starts are spread over the inner half of the trapping interval with energies
/// between 10% and 80% of the barrier height; every internal step is checked.
inline BoundedOrbitReport bounded_orbit_demo(const PlainPotential& U, const ContrastOptions& opts = {}) {
    const int n = U.dimension();
    if (n != 1 && n != 2) throw InvalidArgument("bounded_orbit_demo: expected a one- or two-dimensional potential");
    if (opts.trajectories < 1) throw InvalidArgument("bounded_orbit_demo: need at least one trajectory");
    auto first_coordinate = [&](double s) {
        Vector x = Vector::Zero(n);
        x[0] = s;
        return U.value(x) - (n == 2 ? U.value(Vector::Zero(n)) : 0.0);
    };
    BoundedOrbitReport rep;
    rep.potential = U.label();
    rep.barrier = locate_barrier(first_coordinate, opts.radius, opts.scan_points);
    rep.t_end = opts.t_end;
    const auto& b = rep.barrier;
    rep.all_inside = true;
    for (int i = 0; i < opts.trajectories; ++i) {
        BoundedOrbit orb;
        const double frac = (i + 0.5) / opts.trajectories;
        orb.x0 = 0.5 * b.left + frac * 0.5 * (b.right - b.left);
        const double level = opts.trajectories > 1 ? 0.1 + 0.7 * i / double(opts.trajectories - 1) : 0.5;
        const double u0 = first_coordinate(orb.x0);
        orb.energy = std::max(level * b.height, u0);
        if (orb.energy >= b.height) throw InvalidArgument("bounded_orbit_demo: start lies above the barrier");
        orb.v0 = (i % 2 == 0 ? 1.0 : -1.0) * std::sqrt(2.0 * (orb.energy - u0));

        PhaseState s0{Vector::Zero(n), Vector::Zero(n)};
        s0.x[0] = orb.x0;
        s0.v[0] = orb.v0;
        const Trajectory traj = integrate_newton(U, s0, opts.t_end, opts.integrator);
        orb.min_x = orb.max_x = orb.x0;
        for (const auto& s : traj.states) {
            orb.min_x = std::min(orb.min_x, s.x[0]);
            orb.max_x = std::max(orb.max_x, s.x[0]);
            if (n == 2) orb.max_transverse = std::max(orb.max_transverse, std::abs(s.x[1]));
        }
        orb.energy_drift = traj.energy_drift;
        orb.inside = orb.min_x > b.left && orb.max_x < b.right;
        rep.all_inside = rep.all_inside && orb.inside;
        rep.orbits.push_back(orb);
    }
    return rep;
}

}  // namespace lyap
