#pragma once

#include <cmath>
#include <string>

#include "lyap/fields.hpp"

namespace lyap {

/// Fixed-step symplectic schemes for x'' = a(x).
enum class Scheme {
    verlet,   ///< velocity Verlet, second order
    verlet4,  ///< triple-jump composition of velocity Verlet, fourth order
};

inline std::string to_string(Scheme s) { return s == Scheme::verlet ? "verlet" : "verlet4"; }

inline Scheme scheme_from_string(const std::string& name) {
    if (name == "verlet") return Scheme::verlet;
    if (name == "verlet4") return Scheme::verlet4;
    throw InvalidArgument("unknown integrator scheme '" + name + "'");
}

namespace detail {

/// One velocity Verlet step. `acc` holds a(x) on entry and on exit.
template <class Accel>
void verlet_step(const Accel& accel, Vector& x, Vector& v, Vector& acc, double dt) {
    v.noalias() += (0.5 * dt) * acc;
    x.noalias() += dt * v;
    acc = accel(x);
    v.noalias() += (0.5 * dt) * acc;
}

}  // namespace detail

template <class Accel>
void symplectic_step(Scheme scheme, const Accel& accel, Vector& x, Vector& v, Vector& acc, double dt) {
    if (scheme == Scheme::verlet) {
        detail::verlet_step(accel, x, v, acc, dt);
        return;
    }
    // Yoshida weights: w1 = 1/(2 - 2^{1/3}), w0 = 1 - 2 w1.
    static const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
    static const double w0 = 1.0 - 2.0 * w1;
    detail::verlet_step(accel, x, v, acc, w1 * dt);
    detail::verlet_step(accel, x, v, acc, w0 * dt);
    detail::verlet_step(accel, x, v, acc, w1 * dt);
}

}  // namespace lyap
