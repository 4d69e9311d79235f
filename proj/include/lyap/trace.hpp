#pragma once

#include <cstddef>
#include <vector>

#include "lyap/fields.hpp"

namespace lyap {

/// Tubular coordinates (r, y) of one family member along its tau grid, with
/// finite-difference derivatives.
struct CoordinateTrace {
    double epsilon = 0.0;
    std::vector<double> tau;
    std::vector<double> r;
    std::vector<Vector> y;
    std::vector<double> r_dot;
    std::vector<Vector> y_dot;
    std::vector<Vector> y_ddot;

    std::size_t size() const noexcept { return tau.size(); }
    double spacing() const { return tau.size() > 1 ? (tau.back() - tau.front()) / double(tau.size() - 1) : 0.0; }
    /// Second differences are central (not one-sided) at this sample.
    bool interior(std::size_t i) const noexcept { return i >= 1 && i + 1 < tau.size(); }
};

namespace detail {

/// Second-order first derivative on a uniform grid (one-sided at the ends).
template <class T>
std::vector<T> first_difference(const std::vector<T>& u, double h) {
    const std::size_t n = u.size();
    std::vector<T> d(n);
    if (n < 3) {
        for (std::size_t i = 0; i < n; ++i) d[i] = n == 2 ? T((u[1] - u[0]) / h) : T(u[0] * 0.0);
        return d;
    }
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
    return d;
}

/// Second-order second derivative on a uniform grid (one-sided at the ends).
template <class T>
std::vector<T> second_difference(const std::vector<T>& u, double h) {
    const std::size_t n = u.size();
    std::vector<T> d(n);
    if (n < 4) {
        for (std::size_t i = 0; i < n; ++i) d[i] = n == 3 ? T((u[2] - 2.0 * u[1] + u[0]) / (h * h)) : T(u[0] * 0.0);
        return d;
    }
    const double h2 = h * h;
    d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
    d[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
    return d;
}

}  // namespace detail

/// Fills the derivative fields of a trace from its samples.
inline CoordinateTrace make_trace(double eps, std::vector<double> tau, std::vector<double> r, std::vector<Vector> y) {
    if (tau.size() != r.size() || tau.size() != y.size())
        throw InvalidArgument("make_trace: sample arrays have different lengths");
    CoordinateTrace t;
    t.epsilon = eps;
    t.tau = std::move(tau);
    t.r = std::move(r);
    t.y = std::move(y);
    const double h = t.spacing();
    if (t.size() > 1 && !(h > 0.0)) throw InvalidArgument("make_trace: grid must be strictly increasing");
    t.r_dot = detail::first_difference(t.r, h);
    t.y_dot = detail::first_difference(t.y, h);
    t.y_ddot = detail::second_difference(t.y, h);
    return t;
}

}  // namespace lyap
