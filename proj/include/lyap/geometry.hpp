#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lyap/fields.hpp"
#include "lyap/trace.hpp"

namespace lyap {

struct FlowOptions {
    double initial_step = 0.01;  ///< RK4 step before refinement
    double tolerance = 1e-13;    ///< |x_N - x_2N| <= tolerance (1 + |x|)
    int max_doublings = 16;
    double critical_tolerance = 1e-8;  ///< |grad f| at or below this counts as Crit(f)
};

namespace detail {

/// grad f / |grad f|^2, refusing points near Crit(f).
inline Vector transversal_field(const ScalarField& F, const Vector& x, double crit_tol, double& min_norm) {
    const Vector g = F.gradient(x);
    const double n2 = g.squaredNorm();
    const double n = std::sqrt(n2);
    min_norm = std::min(min_norm, n);
    if (!(n > crit_tol)) throw CriticalPointError("transversal flow approached a critical point of f", n);
    return g / n2;
}

inline Vector rk4_flow(const ScalarField& F, Vector x, double t, long steps, double crit_tol, double& min_norm) {
    const double h = t / static_cast<double>(steps);
    for (long i = 0; i < steps; ++i) {
        const Vector k1 = transversal_field(F, x, crit_tol, min_norm);
        const Vector k2 = transversal_field(F, x + 0.5 * h * k1, crit_tol, min_norm);
        const Vector k3 = transversal_field(F, x + 0.5 * h * k2, crit_tol, min_norm);
        const Vector k4 = transversal_field(F, x + h * k3, crit_tol, min_norm);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

}  // namespace detail

/// phi(t, x0) for d phi/dt = grad f / |grad f|^2. Fixed-step RK4, step count doubled until
/// two successive solutions agree. A path on which |grad f| collapses by three orders of
/// magnitude without converging is reported as reaching Crit(f).
inline Vector transversal_flow(const ScalarField& F, const Vector& x0, double t, const FlowOptions& opts = {}) {
    require_dimension(x0, F.dimension(), "transversal_flow");
    if (t == 0.0) return x0;
    long steps = std::max(2L, static_cast<long>(std::ceil(std::abs(t) / opts.initial_step)));
    double min_norm = std::numeric_limits<double>::infinity();
    Vector coarse = detail::rk4_flow(F, x0, t, steps, opts.critical_tolerance, min_norm);
    for (int k = 0; k < opts.max_doublings; ++k) {
        steps *= 2;
        min_norm = std::numeric_limits<double>::infinity();
        Vector fine = detail::rk4_flow(F, x0, t, steps, opts.critical_tolerance, min_norm);
        if ((fine - coarse).norm() <= opts.tolerance * (1.0 + fine.norm())) return fine;
        coarse = std::move(fine);
    }
    if (min_norm < 1e-3 * F.gradient(x0).norm())
        throw CriticalPointError("transversal flow approached a critical point of f", min_norm);
    throw FlowError("transversal flow did not converge under step refinement");
}

/// |f(phi(t, x0)) - t - f(x0)|; zero for the exact flow.
inline double flow_identity_residual(const ScalarField& F, const Vector& x0, double t, const FlowOptions& opts = {}) {
    return std::abs(F.value(transversal_flow(F, x0, t, opts)) - t - F.value(x0));
}

struct FootPointOptions {
    FlowOptions flow;
    double tolerance = 1e-12;  ///< |f(result)|
    int max_newton = 50;
};

/// Point of M reached by flowing x for time -f(x), polished by Newton steps along grad f.
inline Vector foot_point(const ScalarField& F, const Vector& x, const FootPointOptions& opts = {}) {
    require_dimension(x, F.dimension(), "foot_point");
    const double fx = F.value(x);
    if (std::abs(fx) <= opts.tolerance) return x;
    Vector q = transversal_flow(F, x, -fx, opts.flow);
    for (int it = 0; it <= opts.max_newton; ++it) {
        const double fq = F.value(q);
        if (std::abs(fq) <= opts.tolerance) return q;
        if (it == opts.max_newton) break;
        const Vector g = F.gradient(q);
        const double g2 = g.squaredNorm();
        if (!(std::sqrt(g2) > opts.flow.critical_tolerance))
            throw NewtonError("foot_point: Newton polish reached a critical point");
        q -= (fq / g2) * g;
    }
    throw NewtonError("foot_point: Newton polish did not converge in " + std::to_string(opts.max_newton) + " iterations");
}

/// Graph chart of M centered at p: psi(y) = p + E y + s(y) n, f(psi(y)) = 0.
class MChart {
public:
    MChart(ScalarField field, Vector center, Vector normal, Matrix tangent, double radius, Vector w,
           FlowOptions flow = {})
        : field_(std::move(field)),
          p_(std::move(center)),
          normal_(std::move(normal)),
          E_(std::move(tangent)),
          radius_(radius),
          w_(std::move(w)),
          flow_(flow) {}

    const ScalarField& field() const noexcept { return field_; }
    int dimension() const noexcept { return field_.dimension(); }
    const Vector& center() const noexcept { return p_; }
    const Vector& normal() const noexcept { return normal_; }
    /// Columns E_1..E_{n-1}, orthonormal, orthogonal to grad f(p).
    const Matrix& tangent_basis() const noexcept { return E_; }
    double radius() const noexcept { return radius_; }
    /// Chart coordinates of v.
    const Vector& velocity() const noexcept { return w_; }
    const FlowOptions& flow_options() const noexcept { return flow_; }

    Vector psi(const Vector& y) const {
        if (y.size() != E_.cols()) throw DimensionError("MChart::psi: coordinate dimension mismatch");
        if (y.norm() > radius_ * (1.0 + 1e-12))
            throw ChartError("MChart::psi: coordinates outside the chart radius");
        const Vector base = p_ + E_ * y;
        double s = 0.0;
        for (int it = 0; it < 50; ++it) {
            const Vector q = base + s * normal_;
            const double fq = field_.value(q);
            const double slope = field_.gradient(q).dot(normal_);
            if (!(std::abs(slope) > flow_.critical_tolerance))
                throw ChartError("MChart::psi: chart folds (normal derivative vanishes)");
            const double ds = fq / slope;
            s -= ds;
            if (std::abs(ds) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(s)) || fq == 0.0) {
                const Vector out = base + s * normal_;
                if (std::abs(field_.value(out)) > 1e-12) break;
                return out;
            }
        }
        throw NewtonError("MChart::psi: Newton failed inside the chart radius");
    }

    /// Psi(r, y) = phi(r, psi(y)).
    Vector Psi(double r, const Vector& y) const { return transversal_flow(field_, psi(y), r, flow_); }

    /// Tangent-plane coordinates of a point of M.
    Vector coordinates_of(const Vector& on_M) const { return E_.transpose() * (on_M - p_); }

private:
    ScalarField field_;
    Vector p_;
    Vector normal_;
    Matrix E_;
    double radius_;
    Vector w_;
    FlowOptions flow_;
};

/// 0.5 |grad f(p)| / max |Hess f| over p and p +- 0.1 along each axis; capped at 1e3.
inline double default_chart_radius(const ScalarField& F, const Vector& p) {
    const double g = F.gradient(p).norm();
    double hmax = 0.0;
    auto probe = [&](const Vector& x) {
        const Eigen::JacobiSVD<Matrix> svd(F.hessian(x));
        hmax = std::max(hmax, svd.singularValues()(0));
    };
    probe(p);
    for (int i = 0; i < F.dimension(); ++i) {
        Vector d = Vector::Zero(F.dimension());
        d[i] = 0.1;
        probe(p + d);
        probe(p - d);
    }
    if (hmax <= 0.0) return 1e3;
    return std::min(1e3, 0.5 * g / hmax);
}

struct ChartOptions {
    double on_manifold = 1e-10;
    double tangent = 1e-6;
    FlowOptions flow;
};

/// Chart of M at p with the first tangent basis vector along v.
inline MChart build_m_chart(const ScalarField& F, const Vector& p, const Vector& v,
                            std::optional<double> radius = std::nullopt, const ChartOptions& opts = {}) {
    const int n = F.dimension();
    require_dimension(p, n, "build_m_chart");
    require_dimension(v, n, "build_m_chart");
    if (n < 2) throw ChartError("build_m_chart: M is a point set when n = 1");
    if (std::abs(F.value(p)) > opts.on_manifold) throw ChartError("build_m_chart: center is not on M");
    const Vector g = F.gradient(p);
    const double gn = g.norm();
    if (!(gn > opts.flow.critical_tolerance)) throw ChartError("build_m_chart: center is a critical point of f");
    const Vector normal = g / gn;
    const double vn = v.norm();
    if (vn > 0.0 && std::abs(normal.dot(v)) / vn > opts.tangent)
        throw ChartError("build_m_chart: velocity is not tangent to M");

    std::vector<Vector> basis;
    basis.push_back(normal);
    Matrix E(n, n - 1);
    int filled = 0;
    auto orthogonalize = [&](Vector u) {
        for (const auto& b : basis) u -= b.dot(u) * b;
        for (const auto& b : basis) u -= b.dot(u) * b;
        return u;
    };
    if (vn > 0.0) {
        const Vector e1 = orthogonalize(v);
        basis.push_back(e1 / e1.norm());
        E.col(filled++) = basis.back();
    }
    while (filled < n - 1) {
        Vector best;
        double best_norm = -1.0;
        for (int i = 0; i < n; ++i) {
            Vector c = orthogonalize(Vector::Unit(n, i));
            if (c.norm() > best_norm + 1e-12) {
                best_norm = c.norm();
                best = std::move(c);
            }
        }
        basis.push_back(best / best_norm);
        E.col(filled++) = basis.back();
    }
    const Vector w = E.transpose() * v;
    const double delta = radius.value_or(default_chart_radius(F, p));
    if (!(delta > 0.0)) throw ChartError("build_m_chart: radius must be positive");
    return MChart(F, p, normal, E, delta, w, opts.flow);
}

struct TubularCoords {
    double r = 0.0;
    Vector y;
    Vector foot;
    double roundtrip_error = 0.0;  ///< |Psi(r, y) - x|
};

/// r = f(x); y = chart coordinates of the foot point. Throws TubeError outside the chart tube.
inline TubularCoords tubular_coords(const MChart& chart, const Vector& x, double roundtrip_tolerance = 1e-8) {
    const auto& F = chart.field();
    require_dimension(x, F.dimension(), "tubular_coords");
    TubularCoords tc;
    tc.r = F.value(x);
    FootPointOptions fopts;
    fopts.flow = chart.flow_options();
    try {
        tc.foot = foot_point(F, x, fopts);
    } catch (const Error& e) {
        throw TubeError(std::string("tubular_coords: no foot point: ") + e.what());
    }
    tc.y = chart.coordinates_of(tc.foot);
    if (tc.y.norm() > chart.radius()) throw TubeError("tubular_coords: foot point outside the chart domain");
    try {
        tc.roundtrip_error = (chart.Psi(tc.r, tc.y) - x).norm();
    } catch (const Error& e) {
        throw TubeError(std::string("tubular_coords: chart reconstruction failed: ") + e.what());
    }
    if (tc.roundtrip_error > roundtrip_tolerance * (1.0 + x.norm()))
        throw TubeError("tubular_coords: chart reconstruction misses the point (folded tube)");
    return tc;
}

/// Curvilinear frame of Psi at (r, y): partial Psi / partial r = h_r e_r, partial Psi / partial y^k = h_k e_k.
struct FrameData {
    double h_r = 0.0;
    Vector e_r;
    Vector h;        ///< h_k
    Matrix e;        ///< columns e_k
    Vector dual_r;   ///< e^r
    Matrix dual;     ///< columns e^k
    Vector de_r_dr;  ///< partial e_r / partial r
    Matrix de_r_dy;  ///< columns partial e_r / partial y^a
    /// d2Psi[a * (n-1) + b] = partial^2 Psi / partial y^a partial y^b
    std::vector<Vector> d2Psi_dydy;
    double gram_condition = 0.0;

    const Vector& d2Psi(int a, int b) const { return d2Psi_dydy[static_cast<std::size_t>(a * h.size() + b)]; }
};

inline double default_frame_step(const MChart& chart) { return 1e-4 * (1.0 + chart.center().norm()); }

namespace detail {

/// Central-difference Jacobian [partial_r Psi, partial_y Psi] at (r, y).
inline Matrix psi_jacobian(const MChart& chart, double r, const Vector& y, double h) {
    const int n = chart.dimension();
    Matrix J(n, n);
    J.col(0) = (chart.Psi(r + h, y) - chart.Psi(r - h, y)) / (2.0 * h);
    Vector yp = y, ym = y;
    for (int k = 0; k + 1 < n; ++k) {
        yp[k] = y[k] + h;
        ym[k] = y[k] - h;
        J.col(k + 1) = (chart.Psi(r, yp) - chart.Psi(r, ym)) / (2.0 * h);
        yp[k] = ym[k] = y[k];
    }
    return J;
}

}  // namespace detail

inline FrameData frame_data(const MChart& chart, double r, const Vector& y, std::optional<double> step = std::nullopt) {
    const int n = chart.dimension();
    const int m = n - 1;
    if (y.size() != m) throw DimensionError("frame_data: coordinate dimension mismatch");
    const double h = step.value_or(default_frame_step(chart));
    if (!(h > 0.0)) throw InvalidArgument("frame_data: step must be positive");

    const Matrix J = detail::psi_jacobian(chart, r, y, h);
    FrameData fd;
    fd.h_r = J.col(0).norm();
    fd.e_r = J.col(0) / fd.h_r;
    fd.h.resize(m);
    fd.e.resize(n, m);
    for (int k = 0; k < m; ++k) {
        fd.h[k] = J.col(k + 1).norm();
        fd.e.col(k) = J.col(k + 1) / fd.h[k];
    }
    if (!(fd.h_r > 0.0) || !(fd.h.array() > 0.0).all()) throw ChartError("frame_data: vanishing scale factor");

    Matrix A(n, n);
    A.col(0) = fd.e_r;
    A.rightCols(m) = fd.e;
    const Eigen::SelfAdjointEigenSolver<Matrix> gram(A.transpose() * A);
    const double lo = gram.eigenvalues().minCoeff();
    const double hi = gram.eigenvalues().maxCoeff();
    fd.gram_condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (fd.gram_condition > 1e8) throw ChartError("frame_data: degenerate frame (Gram condition > 1e8)");
    const Matrix D = A.inverse().transpose();  // <D_i, A_j> = delta_ij
    fd.dual_r = D.col(0);
    fd.dual = D.rightCols(m);

    auto unit_r = [&](double rr, const Vector& yy) {
        const Vector pr = (chart.Psi(rr + h, yy) - chart.Psi(rr - h, yy)) / (2.0 * h);
        return Vector(pr / pr.norm());
    };
    fd.de_r_dr = (unit_r(r + h, y) - unit_r(r - h, y)) / (2.0 * h);
    fd.de_r_dy.resize(n, m);
    fd.d2Psi_dydy.assign(static_cast<std::size_t>(m * m), Vector::Zero(n));
    Vector yp = y, ym = y;
    for (int a = 0; a < m; ++a) {
        yp[a] = y[a] + h;
        ym[a] = y[a] - h;
        fd.de_r_dy.col(a) = (unit_r(r, yp) - unit_r(r, ym)) / (2.0 * h);
        const Matrix Jp = detail::psi_jacobian(chart, r, yp, h);
        const Matrix Jm = detail::psi_jacobian(chart, r, ym, h);
        for (int b = 0; b < m; ++b)
            fd.d2Psi_dydy[static_cast<std::size_t>(a * m + b)] = (Jp.col(b + 1) - Jm.col(b + 1)) / (2.0 * h);
        yp[a] = ym[a] = y[a];
    }
    return fd;
}

inline FrameData frame_data(const MChart& chart, const TubularCoords& rc, std::optional<double> step = std::nullopt) {
    return frame_data(chart, rc.r, rc.y, step);
}

/// Smallest eigenvalue of dPsi^T dPsi, i.e. min over unit u of |dPsi(u)|^2, at x.
inline double pullback_metric_at(const MChart& chart, const Vector& x, std::optional<double> step = std::nullopt) {
    const TubularCoords tc = tubular_coords(chart, x);
    const Matrix J = detail::psi_jacobian(chart, tc.r, tc.y, step.value_or(default_frame_step(chart)));
    const Eigen::SelfAdjointEigenSolver<Matrix> es(J.transpose() * J);
    return es.eigenvalues().minCoeff();
}

/// Grid estimate of m = min |dPsi(u)|^2 over the given points and unit vectors u.
inline double pullback_metric_min(const MChart& chart, std::span<const Vector> points,
                                  std::optional<double> step = std::nullopt) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : points) m = std::min(m, pullback_metric_at(chart, x, step));
    if (!(m > 0.0)) throw ChartError("pullback_metric_min: degenerate frame on the region");
    return m;
}

/// Same estimate over a cartesian grid (resolution points per axis) clipped to the closed
/// ball of radius `region_radius` around the chart center. Not a certified minimum.
inline double pullback_metric_min(const MChart& chart, double region_radius, int resolution,
                                  std::optional<double> step = std::nullopt) {
    if (resolution < 2) throw InvalidArgument("pullback_metric_min: resolution must be >= 2");
    if (!(region_radius >= 0.0)) throw InvalidArgument("pullback_metric_min: radius must be non-negative");
    const int n = chart.dimension();
    std::vector<Vector> pts;
    std::vector<int> idx(n, 0);
    while (true) {
        Vector offset(n);
        for (int i = 0; i < n; ++i)
            offset[i] = region_radius * (-1.0 + 2.0 * idx[i] / static_cast<double>(resolution - 1));
        if (offset.norm() <= region_radius * (1.0 + 1e-12)) pts.push_back(chart.center() + offset);
        int k = 0;
        while (k < n && ++idx[k] == resolution) idx[k++] = 0;
        if (k == n) break;
    }
    if (pts.empty()) pts.push_back(chart.center());
    return pullback_metric_min(chart, pts, step);
}

/// Left side of the tangential equations of motion in tubular coordinates at each sample:
///   (h_r/h_k) <e^k, d_r e_r> r'^2 + (1/h_k) <e^k, d_a d_b Psi> y'^a y'^b
///     + 2 (h_r/h_k) <e^k, d_a e_r> y'^a r' + y''^k
/// Coefficients come from frame_data at (r(tau), y(tau)), rates from the trace's differences.
inline std::vector<Vector> curvilinear_residual(const MChart& chart, const CoordinateTrace& trace,
                                                std::span<const std::size_t> samples,
                                                std::optional<double> step = std::nullopt) {
    const int m = chart.dimension() - 1;
    std::vector<Vector> out;
    out.reserve(samples.size());
    for (std::size_t i : samples) {
        if (i >= trace.size() || !trace.interior(i))
            throw StencilError("curvilinear_residual: sample " + std::to_string(i) + " too close to the grid boundary");
        const FrameData fd = frame_data(chart, trace.r[i], trace.y[i], step);
        const double rd = trace.r_dot[i];
        const Vector& yd = trace.y_dot[i];
        Vector res(m);
        for (int k = 0; k < m; ++k) {
            const Vector& ek = fd.dual.col(k);
            const double ratio = fd.h_r / fd.h[k];
            double quad = 0.0;
            double mixed = 0.0;
            for (int a = 0; a < m; ++a) {
                for (int b = 0; b < m; ++b) quad += ek.dot(fd.d2Psi(a, b)) * yd[a] * yd[b];
                mixed += ek.dot(fd.de_r_dy.col(a)) * yd[a];
            }
            res[k] = ratio * ek.dot(fd.de_r_dr) * rd * rd + quad / fd.h[k] + 2.0 * ratio * mixed * rd +
                     trace.y_ddot[i][k];
        }
        out.push_back(std::move(res));
    }
    return out;
}

}  // namespace lyap
