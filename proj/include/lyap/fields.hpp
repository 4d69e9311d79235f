#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Dense>
#include <json.hpp>

#include "lyap/errors.hpp"

namespace lyap {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline bool all_finite(const Vector& x) { return x.allFinite(); }

inline void require_dimension(const Vector& x, int n, const char* who) {
    if (x.size() != n)
        throw DimensionError(std::string(who) + ": expected dimension " + std::to_string(n) +
                             ", got " + std::to_string(x.size()));
}

/// Smooth scalar field f: R^n -> R with its gradient. M = {f = 0}.
class ScalarField {
public:
    using ValueFn = std::function<double(const Vector&)>;
    using GradientFn = std::function<Vector(const Vector&)>;
    using HessianFn = std::function<Matrix(const Vector&)>;

    ScalarField(int dimension, ValueFn value, GradientFn gradient, HessianFn hessian = {},
                std::string label = "field")
        : n_(dimension),
          value_(std::move(value)),
          gradient_(std::move(gradient)),
          hessian_(std::move(hessian)),
          label_(std::move(label)) {
        if (n_ <= 0) throw InvalidArgument("ScalarField: dimension must be positive");
    }

    int dimension() const noexcept { return n_; }
    const std::string& label() const noexcept { return label_; }
    bool has_hessian() const noexcept { return static_cast<bool>(hessian_); }

    double value(const Vector& x) const { return value_(x); }
    Vector gradient(const Vector& x) const { return gradient_(x); }

    /// Analytic Hessian when supplied, otherwise central differences of the gradient.
    Matrix hessian(const Vector& x) const {
        if (hessian_) return hessian_(x);
        const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.norm());
        Matrix H(n_, n_);
        Vector xp = x, xm = x;
        for (int j = 0; j < n_; ++j) {
            xp[j] = x[j] + h;
            xm[j] = x[j] - h;
            H.col(j) = (gradient_(xp) - gradient_(xm)) / (2.0 * h);
            xp[j] = xm[j] = x[j];
        }
        return 0.5 * (H + H.transpose());
    }

private:
    int n_;
    ValueFn value_;
    GradientFn gradient_;
    HessianFn hessian_;
    std::string label_;
};

/// One-dimensional profile g with g(0) = 0 and g > 0 elsewhere.
class Profile {
public:
    using Fn = std::function<double(double)>;

    Profile(Fn value, Fn derivative, Fn second = {}, Fn inverse = {}, std::string label = "profile")
        : value_(std::move(value)),
          derivative_(std::move(derivative)),
          second_(std::move(second)),
          inverse_(std::move(inverse)),
          label_(std::move(label)) {}

    /// g(s) = s^k for a positive even integer k.
    static Profile power(int k) {
        if (k <= 0) throw InvalidArgument("Profile::power: exponent must be positive");
        if (k % 2 != 0) throw InvalidArgument("Profile::power: exponent must be even so that g >= 0");
        const double kd = k;
        return Profile(
            [k](double s) { return ipow(s, k); },
            [k, kd](double s) { return kd * ipow(s, k - 1); },
            [k, kd](double s) { return kd * (kd - 1.0) * ipow(s, k - 2); },
            [kd](double t) {
                if (t < 0.0) throw InvalidArgument("Profile inverse: argument must be >= 0");
                return std::pow(t, 1.0 / kd);
            },
            "s^" + std::to_string(k));
    }

    double value(double s) const { return value_(s); }
    double derivative(double s) const { return derivative_(s); }
    bool has_second() const noexcept { return static_cast<bool>(second_); }
    double second(double s) const {
        if (!second_) throw InvalidArgument("Profile: no second derivative for " + label_);
        return second_(s);
    }

    /// Inverse of g restricted to [0, inf); used for |f| <= g^{-1}(level) bounds.
    bool has_inverse() const noexcept { return static_cast<bool>(inverse_); }
    double inverse(double t) const {
        if (!inverse_) throw InvalidArgument("Profile: no inverse for " + label_);
        return inverse_(t);
    }

    const std::string& label() const noexcept { return label_; }

private:
    static double ipow(double s, int k) {
        double r = 1.0;
        for (int i = 0; i < k; ++i) r *= s;
        return r;
    }

    Fn value_;
    Fn derivative_;
    Fn second_;
    Fn inverse_;
    std::string label_;
};

/// U = g o f.
class CompositePotential {
public:
    CompositePotential(ScalarField field, Profile profile, std::string label = "composite")
        : field_(std::move(field)), profile_(std::move(profile)), label_(std::move(label)) {}

    int dimension() const noexcept { return field_.dimension(); }
    const ScalarField& field() const noexcept { return field_; }
    const Profile& profile() const noexcept { return profile_; }
    const std::string& label() const noexcept { return label_; }

    double value(const Vector& x) const { return profile_.value(field_.value(x)); }

    Vector gradient(const Vector& x) const {
        return profile_.derivative(field_.value(x)) * field_.gradient(x);
    }

private:
    ScalarField field_;
    Profile profile_;
    std::string label_;
};

/// Potential given directly, without the g o f structure (Painleve, Laloy, free particle).
class PlainPotential {
public:
    using ValueFn = ScalarField::ValueFn;
    using GradientFn = ScalarField::GradientFn;

    PlainPotential(int dimension, ValueFn value, GradientFn gradient, std::string label)
        : n_(dimension), value_(std::move(value)), gradient_(std::move(gradient)), label_(std::move(label)) {
        if (n_ <= 0) throw InvalidArgument("PlainPotential: dimension must be positive");
    }

    static PlainPotential zero(int n) {
        return PlainPotential(
            n, [](const Vector&) { return 0.0; }, [n](const Vector&) { return Vector(Vector::Zero(n)); },
            "zero");
    }

    int dimension() const noexcept { return n_; }
    const std::string& label() const noexcept { return label_; }
    double value(const Vector& x) const { return value_(x); }
    Vector gradient(const Vector& x) const { return gradient_(x); }

private:
    int n_;
    ValueFn value_;
    GradientFn gradient_;
    std::string label_;
};

template <class P>
concept Potential = requires(const P& p, const Vector& x) {
    { p.dimension() } -> std::convertible_to<int>;
    { p.value(x) } -> std::convertible_to<double>;
    { p.gradient(x) } -> std::convertible_to<Vector>;
};

template <Potential P>
double eval_potential(const P& potential, const Vector& x) {
    require_dimension(x, potential.dimension(), "eval_potential");
    return potential.value(x);
}

template <Potential P>
Vector grad_potential(const P& potential, const Vector& x) {
    require_dimension(x, potential.dimension(), "grad_potential");
    return potential.gradient(x);
}

/// Default central-difference step: eps^{1/3} (1 + |x|).
inline double default_fd_step(const Vector& x) {
    return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.norm());
}

/// max_i |analytic_i - central_difference_i| / (1 + |analytic_i|).
template <class F>
    requires requires(const F& f, const Vector& x) {
        { f.value(x) } -> std::convertible_to<double>;
        { f.gradient(x) } -> std::convertible_to<Vector>;
    }
double fd_gradient_check(const F& fn, const Vector& x, std::optional<double> step = std::nullopt) {
    const double h = step.value_or(default_fd_step(x));
    if (!(h > 0.0)) throw InvalidArgument("fd_gradient_check: step must be positive");
    const Vector analytic = fn.gradient(x);
    if (analytic.size() != x.size()) throw DimensionError("fd_gradient_check: gradient size mismatch");
    if (!analytic.allFinite()) throw NonFiniteError("fd_gradient_check: non-finite analytic gradient");
    double worst = 0.0;
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = fn.value(probe);
        probe[i] = x[i] - h;
        const double down = fn.value(probe);
        probe[i] = x[i];
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NonFiniteError("fd_gradient_check: non-finite evaluation near x");
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(analytic[i] - fd) / (1.0 + std::abs(analytic[i])));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Gallery

/// f(x) = sum a_i x_i^2 + sum b_i x_i + c.
inline ScalarField quadric_field(Vector quadratic, Vector linear, double constant, std::string label) {
    if (quadratic.size() != linear.size())
        throw InvalidArgument("quadric_field: quadratic and linear coefficient sizes differ");
    const int n = static_cast<int>(quadratic.size());
    if (n == 0) throw InvalidArgument("quadric_field: empty coefficient list");
    return ScalarField(
        n,
        [quadratic, linear, constant](const Vector& x) {
            return (quadratic.array() * x.array().square()).sum() + linear.dot(x) + constant;
        },
        [quadratic, linear](const Vector& x) { return Vector(2.0 * quadratic.cwiseProduct(x) + linear); },
        [quadratic](const Vector&) { return Matrix((2.0 * quadratic).asDiagonal()); }, std::move(label));
}

namespace detail {

/// exp(-1/|s|) sin(1/|s|), extended by 0 at the origin.
inline double painleve_value(double s) {
    const double a = std::abs(s);
    if (a < 1e-12) return 0.0;
    const double u = 1.0 / a;
    return std::exp(-u) * std::sin(u);
}

inline double painleve_derivative(double s) {
    const double a = std::abs(s);
    if (a < 1e-12) return 0.0;
    const double u = 1.0 / a;
    const double dU_du = std::exp(-u) * (std::cos(u) - std::sin(u));
    const double du_ds = -(s > 0.0 ? 1.0 : -1.0) * u * u;
    return dU_du * du_ds;
}

inline Vector json_vector(const nlohmann::json& j, const char* key) {
    if (!j.is_array()) throw InvalidArgument(std::string("gallery: parameter '") + key + "' must be an array");
    Vector out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw InvalidArgument(std::string("gallery: parameter '") + key + "' must hold numbers");
        out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return out;
}

inline int json_exponent(const nlohmann::json& params, int fallback) {
    if (!params.contains("exponent")) return fallback;
    const auto& e = params.at("exponent");
    if (!e.is_number()) throw InvalidArgument("gallery: exponent must be a number");
    const double k = e.get<double>();
    if (!(k > 0.0)) throw InvalidArgument("gallery: exponent must be positive");
    if (k != std::floor(k)) throw InvalidArgument("gallery: exponent must be an integer");
    return static_cast<int>(k);
}

inline double json_number(const nlohmann::json& params, const char* key, double fallback) {
    if (!params.contains(key)) return fallback;
    const auto& e = params.at(key);
    if (!e.is_number()) throw InvalidArgument(std::string("gallery: parameter '") + key + "' must be a number");
    return e.get<double>();
}

}  // namespace detail

inline PlainPotential painleve_potential() {
    return PlainPotential(
        1, [](const Vector& x) { return detail::painleve_value(x[0]); },
        [](const Vector& x) {
            Vector g(1);
            g[0] = detail::painleve_derivative(x[0]);
            return g;
        },
        "painleve");
}

/// P(x) - P(y) - y^2 with P the Painleve profile.
inline PlainPotential laloy_potential() {
    return PlainPotential(
        2,
        [](const Vector& x) {
            return detail::painleve_value(x[0]) - detail::painleve_value(x[1]) - x[1] * x[1];
        },
        [](const Vector& x) {
            Vector g(2);
            g[0] = detail::painleve_derivative(x[0]);
            g[1] = -detail::painleve_derivative(x[1]) - 2.0 * x[1];
            return g;
        },
        "laloy");
}

using GalleryPotential = std::variant<CompositePotential, PlainPotential>;

/// Named potentials. Composite entries use g(s) = s^k with an even exponent k.
///
///   gutter             f = x_0 in R^n (n = "dimension", default 2), k = 4
///   ellipsoid          f = sum a_i x_i^2 - 1, a = "coefficients" (default 1,2,3), k = 4
///   circle             f = |x|^2 - R^2, R = "radius" (default 1), n = 2, k = 2
///   custom-polynomial  f = sum a_i x_i^2 + sum b_i x_i + c ("quadratic", "linear", "constant"), k = 2
///   painleve, laloy    plain potentials, not of the g o f form
inline GalleryPotential gallery_lookup(const std::string& name, const nlohmann::json& params = nlohmann::json::object()) {
    using detail::json_exponent;
    using detail::json_number;
    using detail::json_vector;
    const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;
    if (!p.is_object()) throw InvalidArgument("gallery: parameters must be a key-value object");

    if (name == "gutter") {
        const double dim = json_number(p, "dimension", 2.0);
        if (dim < 1.0 || dim != std::floor(dim)) throw InvalidArgument("gallery: gutter dimension must be a positive integer");
        const int n = static_cast<int>(dim);
        Vector b = Vector::Zero(n);
        b[0] = 1.0;
        return CompositePotential(quadric_field(Vector::Zero(n), b, 0.0, "gutter"),
                                  Profile::power(json_exponent(p, 4)), "gutter");
    }
    if (name == "ellipsoid") {
        Vector a(3);
        a << 1.0, 2.0, 3.0;
        if (p.contains("coefficients")) a = json_vector(p.at("coefficients"), "coefficients");
        if (a.size() == 0 || (a.array() <= 0.0).any())
            throw InvalidArgument("gallery: ellipsoid coefficients must be positive");
        return CompositePotential(quadric_field(a, Vector::Zero(a.size()), -1.0, "ellipsoid"),
                                  Profile::power(json_exponent(p, 4)), "ellipsoid");
    }
    if (name == "circle") {
        const double radius = json_number(p, "radius", 1.0);
        if (!(radius > 0.0)) throw InvalidArgument("gallery: circle radius must be positive");
        return CompositePotential(quadric_field(Vector::Ones(2), Vector::Zero(2), -radius * radius, "circle"),
                                  Profile::power(json_exponent(p, 2)), "circle");
    }
    if (name == "custom-polynomial") {
        if (!p.contains("quadratic")) throw InvalidArgument("gallery: custom-polynomial requires 'quadratic'");
        const Vector a = json_vector(p.at("quadratic"), "quadratic");
        const Vector b = p.contains("linear") ? json_vector(p.at("linear"), "linear") : Vector(Vector::Zero(a.size()));
        return CompositePotential(quadric_field(a, b, json_number(p, "constant", 0.0), "custom-polynomial"),
                                  Profile::power(json_exponent(p, 2)), "custom-polynomial");
    }
    if (name == "painleve") return painleve_potential();
    if (name == "laloy") return laloy_potential();
    throw InvalidArgument("gallery: unknown potential '" + name + "'");
}

inline CompositePotential gallery_composite(const std::string& name,
                                            const nlohmann::json& params = nlohmann::json::object()) {
    auto g = gallery_lookup(name, params);
    if (auto* c = std::get_if<CompositePotential>(&g)) return std::move(*c);
    throw InvalidArgument("gallery: '" + name + "' is not of the form g o f");
}

}  // namespace lyap
