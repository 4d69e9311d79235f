#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lyap/dynamics.hpp"
#include "lyap/geometry.hpp"
#include "lyap/trace.hpp"

namespace lyap {

/// (r, y) of every family sample. Throws TubeError naming the member and tau on the first
/// sample that does not admit tubular coordinates.
inline std::vector<CoordinateTrace> coordinate_traces(const MChart& chart, const FamilyResult& family) {
    std::vector<CoordinateTrace> traces;
    traces.reserve(family.members.size());
    for (std::size_t j = 0; j < family.members.size(); ++j) {
        const auto& traj = family.members[j];
        std::vector<double> r(traj.size());
        std::vector<Vector> y(traj.size());
        for (std::size_t i = 0; i < traj.size(); ++i) {
            try {
                const TubularCoords tc = tubular_coords(chart, traj.states[i].x);
                r[i] = tc.r;
                y[i] = tc.y;
            } catch (const Error& e) {
                throw TubeError("member " + std::to_string(j) + " at tau = " + std::to_string(traj.times[i]) +
                                " leaves the chart tube: " + e.what());
            }
        }
        traces.push_back(make_trace(traj.epsilon, traj.times, std::move(r), std::move(y)));
    }
    return traces;
}

struct Lemma3Member {
    double epsilon = 0.0;
    double sup_r = 0.0;
    double r_bound = 0.0;  ///< g^{-1}(eps^2 |v|^2 / 2)
    double max_rate = 0.0;  ///< max over tau of max(|r'|, |y'^k|)
    bool r_ok = false;
    bool rate_ok = false;
};

struct Lemma3Report {
    std::vector<Lemma3Member> members;
    double m_estimate = 0.0;
    double rate_bound = 0.0;  ///< m^{-1/2} |v|
    double slack = 0.0;
    bool r_monotone = false;  ///< sup |r_j| non-increasing in j
    bool pass = false;
};

/// Transversal coordinate shrinks with eps and coordinate rates stay bounded independently of eps.
inline Lemma3Report lemma3_report(const std::vector<CoordinateTrace>& traces, double m_estimate, const Profile& g,
                                  double speed, double slack) {
    if (!(m_estimate > 0.0)) throw InvalidArgument("lemma3_report: m estimate must be positive");
    Lemma3Report rep;
    rep.m_estimate = m_estimate;
    rep.rate_bound = speed / std::sqrt(m_estimate);
    rep.slack = slack;
    rep.r_monotone = true;
    bool all_ok = true;
    for (std::size_t j = 0; j < traces.size(); ++j) {
        const auto& t = traces[j];
        Lemma3Member m;
        m.epsilon = t.epsilon;
        for (double r : t.r) m.sup_r = std::max(m.sup_r, std::abs(r));
        for (std::size_t i = 0; i < t.size(); ++i) {
            m.max_rate = std::max(m.max_rate, std::abs(t.r_dot[i]));
            if (t.y_dot[i].size() > 0) m.max_rate = std::max(m.max_rate, t.y_dot[i].cwiseAbs().maxCoeff());
        }
        m.r_bound = g.inverse(0.5 * t.epsilon * t.epsilon * speed * speed);
        m.r_ok = m.sup_r <= m.r_bound * (1.0 + slack);
        m.rate_ok = m.max_rate <= rep.rate_bound * (1.0 + slack);
        if (j > 0 && m.sup_r > rep.members.back().sup_r) rep.r_monotone = false;
        all_ok = all_ok && m.r_ok && m.rate_ok;
        rep.members.push_back(m);
    }
    rep.pass = all_ok && rep.r_monotone;
    return rep;
}

struct Cor4Report {
    double C = 0.0;
    std::vector<double> member_max;  ///< max over interior tau of |y''|
    double ratio = 1.0;              ///< max / min over members
    double factor = 4.0;
    std::vector<std::size_t> excluded_samples;  ///< boundary samples without a central stencil
    bool uniform = false;
};

/// C = max |y''| over members and interior samples; uniform iff the per-member maxima differ by at
/// most `factor`. Maxima below `noise_floor` count as zero acceleration.
inline Cor4Report cor4_bound(const std::vector<CoordinateTrace>& traces, double factor = 4.0,
                             double noise_floor = 1e-8) {
    if (traces.empty()) throw InvalidArgument("cor4_bound: no traces");
    Cor4Report rep;
    rep.factor = factor;
    const std::size_t n = traces.front().size();
    if (n < 3) throw StencilError("cor4_bound: grid too short for a central stencil");
    rep.excluded_samples = {0, n - 1};
    for (const auto& t : traces) {
        double mx = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t.interior(i)) mx = std::max(mx, t.y_ddot[i].norm());
        rep.member_max.push_back(mx);
    }
    rep.C = *std::max_element(rep.member_max.begin(), rep.member_max.end());
    const double lo = *std::min_element(rep.member_max.begin(), rep.member_max.end());
    if (rep.C <= noise_floor) rep.ratio = 1.0;
    else if (lo <= 0.0) rep.ratio = std::numeric_limits<double>::infinity();
    else rep.ratio = rep.C / lo;
    rep.uniform = rep.ratio <= factor;
    return rep;
}

struct LimitCurve {
    std::vector<double> tau;
    std::vector<Vector> x;         ///< smallest-eps member projected onto M
    std::vector<Vector> velocity;  ///< central differences of x
    Vector initial_velocity;       ///< five-point central difference at tau = 0
    double initial_velocity_error = 0.0;  ///< |x'(0) - v|
    double source_epsilon = 0.0;
    bool verified = false;

    std::size_t origin_index() const {
        for (std::size_t i = 0; i < tau.size(); ++i)
            if (tau[i] == 0.0) return i;
        throw InvalidArgument("limit curve has no sample at tau = 0");
    }
};

struct ConvergenceReport {
    std::vector<double> epsilons;
    std::vector<double> distances;        ///< d_j = sup |x_j - x_{j+1}|
    std::vector<bool> non_increasing;     ///< entry j (j >= 1): d_j <= d_{j-1}; entry 0 unused
    std::vector<double> rates;            ///< log(d_{j-1} / d_j) / log(eps_{j-1} / eps_j)
    std::vector<double> max_violation;    ///< max |f(x_j)| before projection
    std::vector<double> violation_bound;  ///< g^{-1}(eps_j^2 |v|^2 / 2)
    double tolerance = 0.0;
    double noise_floor = 0.0;
    bool cauchy = false;
};

/// Projects one rescaled trajectory onto M and differentiates it.
inline LimitCurve project_limit(const Trajectory& member, const ScalarField& F, const Vector& v) {
    if (member.size() < 5) throw StencilError("project_limit: need at least 5 samples");
    LimitCurve lim;
    lim.tau = member.times;
    lim.source_epsilon = member.epsilon;
    lim.x.reserve(member.size());
    for (const auto& s : member.states) lim.x.push_back(foot_point(F, s.x));
    const double h = (lim.tau.back() - lim.tau.front()) / double(lim.tau.size() - 1);
    lim.velocity = detail::first_difference(lim.x, h);
    const std::size_t o = lim.origin_index();
    if (o < 2 || o + 2 >= lim.x.size()) throw StencilError("project_limit: tau = 0 too close to the boundary");
    lim.initial_velocity = (-lim.x[o + 2] + 8.0 * lim.x[o + 1] - 8.0 * lim.x[o - 1] + lim.x[o - 2]) / (12.0 * h);
    lim.initial_velocity_error = (lim.initial_velocity - v).norm();
    return lim;
}

/// Cauchy diagnostic over consecutive members and the projected smallest-eps member as limit.
/// Cauchy passes iff d_j is non-increasing from j = 1 on (up to `noise_floor`) and the last
/// distance is at most `tol_limit`. A failing diagnostic still emits the limit, unverified.
inline std::pair<LimitCurve, ConvergenceReport> extract_limit(const FamilyResult& family, const CompositePotential& U,
                                                              const Vector& v, double tol_limit,
                                                              double noise_floor = 1e-12) {
    const std::size_t J = family.members.size();
    if (J < 3) throw InvalidArgument("extract_limit: need at least 3 family members");
    const auto& F = U.field();
    ConvergenceReport rep;
    rep.epsilons = family.epsilons;
    rep.tolerance = tol_limit;
    rep.noise_floor = noise_floor;
    for (std::size_t j = 0; j + 1 < J; ++j) {
        const auto& a = family.members[j];
        const auto& b = family.members[j + 1];
        if (a.size() != b.size()) throw InvalidArgument("extract_limit: members are not on a common grid");
        double d = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a.states[i].x - b.states[i].x).norm());
        rep.distances.push_back(d);
    }
    rep.non_increasing.assign(rep.distances.size(), true);
    rep.rates.assign(rep.distances.size(), std::numeric_limits<double>::quiet_NaN());
    bool monotone = true;
    for (std::size_t j = 1; j < rep.distances.size(); ++j) {
        rep.non_increasing[j] = rep.distances[j] <= rep.distances[j - 1] + noise_floor;
        if (j >= 2) monotone = monotone && rep.non_increasing[j];
        if (rep.distances[j] > 0.0 && rep.distances[j - 1] > 0.0)
            rep.rates[j] = std::log(rep.distances[j - 1] / rep.distances[j]) /
                           std::log(family.epsilons[j - 1] / family.epsilons[j]);
    }
    const double speed = v.norm();
    for (std::size_t j = 0; j < J; ++j) {
        double worst = 0.0;
        for (const auto& s : family.members[j].states) worst = std::max(worst, std::abs(F.value(s.x)));
        rep.max_violation.push_back(worst);
        const double level = 0.5 * family.epsilons[j] * family.epsilons[j] * speed * speed;
        rep.violation_bound.push_back(U.profile().has_inverse() ? U.profile().inverse(level)
                                                                : std::numeric_limits<double>::quiet_NaN());
    }
    rep.cauchy = monotone && rep.distances.back() <= tol_limit;

    LimitCurve lim = project_limit(family.members.back(), F, v);
    lim.verified = rep.cauchy;
    return {std::move(lim), std::move(rep)};
}

enum class Verdict { unstable, indeterminate };

inline std::string to_string(Verdict v) { return v == Verdict::unstable ? "UNSTABLE" : "INDETERMINATE"; }

struct EscapeEvidence {
    int member = 0;
    double epsilon = 0.0;
    double initial_speed = 0.0;  ///< eps_j |v|
    double escape_time = 0.0;    ///< tau* / eps_j
    std::size_t physical_index = 0;
    Vector position;             ///< x^{eps_j}(tau* / eps_j)
    double displacement = 0.0;   ///< |position - p|
    double rescaled_gap = 0.0;   ///< |x_{eps_j}(tau*) - x(tau*)|
};

struct InstabilityCertificate {
    Vector p;
    double R = 0.0;
    double tau_star = 0.0;
    std::size_t tau_star_index = 0;
    double threshold = 0.0;  ///< R / 2
    double tol_R = 0.0;
    std::vector<double> gaps;  ///< |x_{eps_j}(tau*) - x(tau*)| for every member
    std::optional<int> j0;
    std::vector<EscapeEvidence> evidence;  ///< members j >= j0
    Verdict verdict = Verdict::indeterminate;
    std::string reason;
};

struct CertifyOptions {
    std::optional<double> tol_R;  ///< default 10 * grid spacing * |v|
};

/// Escape evidence: R = max_{[0,T]} |x(tau) - p| at tau*, j0 with |x_{eps_j}(tau*) - x(tau*)| < R/2
/// for all j >= j0, and the physical runs at t = tau*/eps_j outside B(p, R/2).
/// Throws CertificationError for a degenerate limit (R <= tol_R).
inline InstabilityCertificate certify_instability(const FamilyResult& family, const LimitCurve& limit,
                                                  const std::vector<Trajectory>& physical,
                                                  const CertifyOptions& opts = {}) {
    if (family.members.empty()) throw InvalidArgument("certify_instability: empty family");
    if (physical.size() != family.members.size())
        throw InvalidArgument("certify_instability: one physical run per family member is required");
    const std::size_t o = limit.origin_index();
    InstabilityCertificate cert;
    cert.p = limit.x[o];
    const auto& first = family.members.front();
    const Vector& v = first.states[first.origin_index()].v;
    const double spacing = (limit.tau.back() - limit.tau.front()) / double(limit.tau.size() - 1);
    cert.tol_R = opts.tol_R.value_or(10.0 * spacing * v.norm());

    for (std::size_t i = o; i < limit.tau.size(); ++i) {
        const double d = (limit.x[i] - cert.p).norm();
        if (d > cert.R) {
            cert.R = d;
            cert.tau_star = limit.tau[i];
            cert.tau_star_index = i;
        }
    }
    if (!(cert.R > cert.tol_R))
        throw CertificationError("certify_instability: degenerate limit, R = " + std::to_string(cert.R) +
                                 " does not exceed tol_R = " + std::to_string(cert.tol_R));
    cert.threshold = 0.5 * cert.R;

    const std::size_t J = family.members.size();
    for (std::size_t j = 0; j < J; ++j) {
        const auto& m = family.members[j];
        if (m.size() != limit.tau.size()) throw InvalidArgument("certify_instability: member grid differs from limit grid");
        cert.gaps.push_back((m.states[cert.tau_star_index].x - limit.x[cert.tau_star_index]).norm());
    }
    std::optional<int> j0;
    for (int j = static_cast<int>(J) - 1; j >= 0 && cert.gaps[static_cast<std::size_t>(j)] < cert.threshold; --j) j0 = j;
    cert.j0 = j0;
    if (!j0) {
        cert.reason = "no j0 within the schedule: the smallest eps member is not within R/2 of the limit at tau*";
        return cert;
    }

    const std::size_t k_star = cert.tau_star_index - o;
    bool escaped = true;
    for (std::size_t j = static_cast<std::size_t>(*j0); j < J; ++j) {
        const auto& run = physical[j];
        const double eps = family.epsilons[j];
        if (run.kind != TrajectoryKind::physical) throw InvalidArgument("certify_instability: expected physical runs");
        if (k_star >= run.size()) throw InvalidArgument("certify_instability: physical run shorter than tau*/eps");
        EscapeEvidence ev;
        ev.member = static_cast<int>(j);
        ev.epsilon = eps;
        ev.initial_speed = run.states.front().v.norm();
        ev.escape_time = cert.tau_star / eps;
        ev.physical_index = k_star;
        if (std::abs(run.times[k_star] - ev.escape_time) > 1e-9 * (1.0 + ev.escape_time))
            throw InvalidArgument("certify_instability: physical grid does not sample tau*/eps");
        ev.position = run.states[k_star].x;
        ev.displacement = (ev.position - cert.p).norm();
        ev.rescaled_gap = cert.gaps[j];
        escaped = escaped && ev.displacement >= cert.threshold;
        cert.evidence.push_back(std::move(ev));
    }
    if (!limit.verified) {
        cert.reason = "limit not verified by the Cauchy diagnostic";
    } else if (!escaped) {
        cert.reason = "a physical run stays inside B(p, R/2) at tau*/eps";
    } else {
        cert.verdict = Verdict::unstable;
        cert.reason = "escape from B(p, R/2) with initial speeds eps_j |v| -> 0";
    }
    return cert;
}

/// Re-evaluates the stored escape positions; no integration involved.
inline bool recheck_certificate(const InstabilityCertificate& cert) {
    if (cert.verdict != Verdict::unstable || !cert.j0) return false;
    for (const auto& ev : cert.evidence)
        if ((ev.position - cert.p).norm() < cert.threshold) return false;
    return !cert.evidence.empty();
}

/// Re-evaluates the escape positions from stored physical trajectories.
inline bool recheck_certificate(const InstabilityCertificate& cert, const std::vector<Trajectory>& physical) {
    if (!recheck_certificate(cert)) return false;
    for (const auto& ev : cert.evidence) {
        const auto& run = physical.at(static_cast<std::size_t>(ev.member));
        if (ev.physical_index >= run.size()) return false;
        if ((run.states[ev.physical_index].x - cert.p).norm() < cert.threshold) return false;
    }
    return true;
}

}  // namespace lyap
