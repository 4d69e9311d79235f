#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lyap/fields.hpp"
#include "lyap/integrators.hpp"

namespace lyap {

struct PhaseState {
    Vector x;
    Vector v;
};

enum class TrajectoryKind { physical, rescaled };

/// Sampled solution of x'' = -grad U (physical) or x'' = -eps^-2 grad U (rescaled).
struct Trajectory {
    TrajectoryKind kind = TrajectoryKind::rescaled;
    double epsilon = 1.0;
    std::vector<double> times;
    std::vector<PhaseState> states;
    double step = 0.0;  ///< internal integration step
    Scheme scheme = Scheme::verlet4;
    double energy_drift = 0.0;  ///< relative drift of the conserved energy over the samples

    std::size_t size() const noexcept { return times.size(); }
    int dimension() const { return states.empty() ? 0 : static_cast<int>(states.front().x.size()); }

    /// Index of the sample at time zero.
    std::size_t origin_index() const {
        for (std::size_t i = 0; i < times.size(); ++i)
            if (times[i] == 0.0) return i;
        throw InvalidArgument("trajectory has no sample at time zero");
    }
};

struct IntegratorOptions {
    Scheme scheme = Scheme::verlet4;
    /// c in dtau = c * eps (rescaled) and dt = c (physical).
    double step_factor = 0.01;
    /// Output samples: on [-T, T] for rescaled runs (odd), on [0, t_end] for physical runs.
    /// Zero for physical runs keeps every internal step.
    int samples = 401;
    double blowup_radius = 1e6;
};

namespace detail {

/// Integrates forward with internal steps that divide the output spacing exactly.
template <class Accel>
std::vector<PhaseState> integrate_sampled(const Accel& accel, const Vector& x0, const Vector& v0, double spacing,
                                          int intervals, double max_step, Scheme scheme, double blowup_radius,
                                          double time_unit, double& step_used) {
    const long substeps = std::max(1L, static_cast<long>(std::ceil(spacing / max_step - 1e-9)));
    const double dt = spacing / static_cast<double>(substeps);
    step_used = dt;
    std::vector<PhaseState> out;
    out.reserve(static_cast<std::size_t>(intervals) + 1);
    Vector x = x0, v = v0;
    Vector acc = accel(x);
    out.push_back({x, v});
    for (int i = 0; i < intervals; ++i) {
        for (long s = 0; s < substeps; ++s) {
            symplectic_step(scheme, accel, x, v, acc, dt);
            if (!x.allFinite() || !v.allFinite() || x.norm() > blowup_radius) {
                const double last = (static_cast<double>(i) * spacing + static_cast<double>(s) * dt) * time_unit;
                throw BlowUpError("integration blew up", last);
            }
        }
        out.push_back({x, v});
    }
    return out;
}

}  // namespace detail

template <Potential P>
double physical_energy(const P& potential, const PhaseState& s) {
    return 0.5 * s.v.squaredNorm() + potential.value(s.x);
}

/// H_eps(x, v) = |v|^2 / 2 + eps^-2 U(x).
template <Potential P>
double rescaled_energy(const P& potential, const PhaseState& s, double eps) {
    return 0.5 * s.v.squaredNorm() + potential.value(s.x) / (eps * eps);
}

namespace detail {

template <class Energy>
double relative_drift(const Trajectory& traj, const Energy& energy) {
    const double h0 = energy(traj.states[traj.origin_index()]);
    double worst = 0.0;
    for (const auto& s : traj.states) worst = std::max(worst, std::abs(energy(s) - h0));
    return worst / std::max(std::abs(h0), 1e-300);
}

}  // namespace detail

/// Physical Cauchy problem x'' = -grad U(x), sampled on [0, t_end].
template <Potential P>
Trajectory integrate_newton(const P& potential, const PhaseState& s0, double t_end,
                            const IntegratorOptions& opts = {}, double epsilon = 1.0) {
    if (!(t_end > 0.0)) throw InvalidArgument("integrate_newton: t_end must be positive");
    if (!(opts.step_factor > 0.0)) throw InvalidArgument("integrate_newton: dt must be positive");
    require_dimension(s0.x, potential.dimension(), "integrate_newton");
    require_dimension(s0.v, potential.dimension(), "integrate_newton");
    const int intervals = opts.samples > 1
                              ? opts.samples - 1
                              : static_cast<int>(std::ceil(t_end / opts.step_factor - 1e-9));
    const double spacing = t_end / intervals;
    auto accel = [&potential](const Vector& x) { return Vector(-potential.gradient(x)); };

    Trajectory traj;
    traj.kind = TrajectoryKind::physical;
    traj.epsilon = epsilon;
    traj.scheme = opts.scheme;
    traj.states = detail::integrate_sampled(accel, s0.x, s0.v, spacing, intervals, opts.step_factor, opts.scheme,
                                            opts.blowup_radius, 1.0, traj.step);
    traj.times.resize(traj.states.size());
    for (std::size_t i = 0; i < traj.times.size(); ++i) traj.times[i] = static_cast<double>(i) * spacing;
    traj.energy_drift = detail::relative_drift(traj, [&](const PhaseState& s) { return physical_energy(potential, s); });
    return traj;
}

/// Rescaled problem x'' = -eps^-2 grad U(x), x(0) = p, x'(0) = v, on a symmetric grid over [-T, T].
/// The backward half is the forward solution from (p, -v) with time and velocity reflected.
template <Potential P>
Trajectory integrate_rescaled(const P& potential, const Vector& p, const Vector& v, double eps, double horizon,
                              const IntegratorOptions& opts = {}) {
    if (!(eps > 0.0)) throw InvalidArgument("integrate_rescaled: epsilon must be positive");
    if (!(horizon > 0.0)) throw InvalidArgument("integrate_rescaled: horizon must be positive");
    if (!(opts.step_factor > 0.0)) throw InvalidArgument("integrate_rescaled: step factor must be positive");
    if (opts.samples < 3 || opts.samples % 2 == 0)
        throw InvalidArgument("integrate_rescaled: sample count must be odd and >= 3");
    require_dimension(p, potential.dimension(), "integrate_rescaled");
    require_dimension(v, potential.dimension(), "integrate_rescaled");

    const int half = (opts.samples - 1) / 2;
    const double spacing = horizon / half;
    const double inv_eps2 = 1.0 / (eps * eps);
    auto accel = [&potential, inv_eps2](const Vector& x) { return Vector(-inv_eps2 * potential.gradient(x)); };

    Trajectory traj;
    traj.kind = TrajectoryKind::rescaled;
    traj.epsilon = eps;
    traj.scheme = opts.scheme;
    const double max_step = opts.step_factor * eps;
    double step = 0.0;
    std::vector<PhaseState> forward, backward;
    try {
        forward = detail::integrate_sampled(accel, p, v, spacing, half, max_step, opts.scheme, opts.blowup_radius,
                                            1.0, step);
        backward = detail::integrate_sampled(accel, p, Vector(-v), spacing, half, max_step, opts.scheme,
                                             opts.blowup_radius, -1.0, step);
    } catch (const BlowUpError& e) {
        throw BlowUpError(std::string("integrate_rescaled: integrator failure (solutions exist globally): ") +
                              e.what(),
                          e.last_valid_time());
    }
    traj.step = step;

    traj.times.reserve(2 * half + 1);
    traj.states.reserve(2 * half + 1);
    for (int i = half; i >= 1; --i) {
        traj.times.push_back(-static_cast<double>(i) * spacing);
        const auto& s = backward[static_cast<std::size_t>(i)];
        traj.states.push_back({s.x, Vector(-s.v)});
    }
    for (int i = 0; i <= half; ++i) {
        traj.times.push_back(static_cast<double>(i) * spacing);
        traj.states.push_back(forward[static_cast<std::size_t>(i)]);
    }
    traj.energy_drift =
        detail::relative_drift(traj, [&](const PhaseState& s) { return rescaled_energy(potential, s, eps); });
    return traj;
}

/// tau = eps t, dx/dtau = (dx/dt) / eps. With `horizon`, keeps samples with tau <= horizon.
inline Trajectory rescale_trajectory(const Trajectory& physical, double eps, std::optional<double> horizon = std::nullopt) {
    if (physical.kind != TrajectoryKind::physical) throw InvalidArgument("rescale_trajectory: expected a physical trajectory");
    if (!(eps > 0.0)) throw InvalidArgument("rescale_trajectory: epsilon must be positive");
    if (physical.times.empty()) throw InvalidArgument("rescale_trajectory: empty trajectory");
    if (horizon && physical.times.back() * eps < *horizon * (1.0 - 1e-12))
        throw InvalidArgument("rescale_trajectory: grid too short for the requested horizon");
    Trajectory out;
    out.kind = TrajectoryKind::rescaled;
    out.epsilon = eps;
    out.scheme = physical.scheme;
    out.step = physical.step * eps;
    for (std::size_t i = 0; i < physical.size(); ++i) {
        const double tau = physical.times[i] * eps;
        if (horizon && tau > *horizon * (1.0 + 1e-12)) break;
        out.times.push_back(tau);
        out.states.push_back({physical.states[i].x, Vector(physical.states[i].v / eps)});
    }
    return out;
}

struct EnergyReport {
    std::vector<double> values;
    double initial = 0.0;
    double drift = 0.0;  ///< max |H(tau) - H(0)| / max(|H(0)|, 1e-300)
};

template <Potential P>
EnergyReport energy_audit(const Trajectory& traj, const P& potential, double eps) {
    if (traj.kind != TrajectoryKind::rescaled) throw InvalidArgument("energy_audit: expected a rescaled trajectory");
    EnergyReport rep;
    rep.values.reserve(traj.size());
    for (const auto& s : traj.states) rep.values.push_back(rescaled_energy(potential, s, eps));
    rep.initial = rep.values[traj.origin_index()];
    double worst = 0.0;
    for (double h : rep.values) worst = std::max(worst, std::abs(h - rep.initial));
    rep.drift = worst / std::max(std::abs(rep.initial), 1e-300);
    return rep;
}

/// Speed, sublevel and ball bounds along a rescaled trajectory.
struct BoundsCheck {
    double max_speed = 0.0;
    double max_potential = 0.0;
    double max_displacement = 0.0;
    double speed_bound = 0.0;
    double potential_bound = 0.0;
    /// max over samples of |x(tau) - p| / (|tau| |v|)
    double worst_ball_ratio = 0.0;
    bool speed_ok = false;
    bool potential_ok = false;
    bool ball_ok = false;
    double slack = 0.0;
    double slack_used = 0.0;  ///< largest relative excess over the unslackened bounds, clipped at 0
    std::string violation;

    bool pass() const noexcept { return speed_ok && potential_ok && ball_ok; }
};

/// |x'| <= |v|, U(x) <= eps^2 |v|^2 / 2 and |x(tau) - p| <= |tau| |v|, each relaxed by (1 + slack).
template <Potential P>
BoundsCheck lemma1_monitor(const Trajectory& traj, const P& potential, const Vector& v, double eps, double slack) {
    if (traj.kind != TrajectoryKind::rescaled) throw InvalidArgument("lemma1_monitor: expected a rescaled trajectory");
    const Vector& p = traj.states[traj.origin_index()].x;
    const double speed0 = v.norm();
    BoundsCheck b;
    b.slack = slack;
    b.speed_bound = speed0;
    b.potential_bound = 0.5 * eps * eps * speed0 * speed0;
    b.ball_ok = true;
    double excess = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& s = traj.states[i];
        const double speed = s.v.norm();
        const double u = potential.value(s.x);
        const double disp = (s.x - p).norm();
        b.max_speed = std::max(b.max_speed, speed);
        b.max_potential = std::max(b.max_potential, u);
        b.max_displacement = std::max(b.max_displacement, disp);
        const double ball = std::abs(traj.times[i]) * speed0;
        if (ball > 0.0) {
            b.worst_ball_ratio = std::max(b.worst_ball_ratio, disp / ball);
            excess = std::max(excess, disp / ball - 1.0);
        } else if (disp > 0.0) {
            b.worst_ball_ratio = std::numeric_limits<double>::infinity();
            excess = std::numeric_limits<double>::infinity();
        }
        if (disp > ball * (1.0 + slack) && b.ball_ok) {
            b.ball_ok = false;
            b.violation = "ball bound violated at tau = " + std::to_string(traj.times[i]);
        }
    }
    b.speed_ok = b.max_speed <= b.speed_bound * (1.0 + slack);
    b.potential_ok = b.max_potential <= b.potential_bound * (1.0 + slack);
    if (b.speed_bound > 0.0) excess = std::max(excess, b.max_speed / b.speed_bound - 1.0);
    else if (b.max_speed > 0.0) excess = std::numeric_limits<double>::infinity();
    if (b.potential_bound > 0.0) excess = std::max(excess, b.max_potential / b.potential_bound - 1.0);
    else if (b.max_potential > 0.0) excess = std::numeric_limits<double>::infinity();
    b.slack_used = std::max(0.0, excess);
    if (!b.speed_ok) b.violation = "speed bound violated: max |x'| = " + std::to_string(b.max_speed);
    else if (!b.potential_ok) b.violation = "sublevel bound violated: max U = " + std::to_string(b.max_potential);
    return b;
}

struct Tolerances {
    double on_manifold = 1e-10;  ///< |f(p)| after snapping
    double snap = 1e-6;          ///< largest distance |p - foot(p)| snapped onto M instead of rejected
    double tangent = 1e-6;       ///< |<grad f(p), v>| / (|grad f(p)| |v|)
    double slack = 1e-6;
    double limit = 1e-2;         ///< Cauchy threshold on the last consecutive sup distance
    double min_epsilon = 1e-4;
};

/// Initial data, horizon and epsilon schedule for one experiment.
struct Scenario {
    CompositePotential potential;
    Vector p;
    Vector v;
    double horizon = 1.0;
    double eps0 = 0.1;
    double ratio = 0.5;
    int count = 6;
    IntegratorOptions integrator;
    Tolerances tolerances;
    std::optional<double> chart_radius;

    double epsilon(int j) const { return eps0 * std::pow(ratio, j); }
};

/// Checks the scenario invariants; `allow_zero_velocity` admits the degenerate v = 0 case.
inline void validate_scenario(const Scenario& s, bool allow_zero_velocity = false) {
    const auto& F = s.potential.field();
    const int n = F.dimension();
    if (s.p.size() != n) throw ScenarioError("base point has wrong dimension", "p");
    if (s.v.size() != n) throw ScenarioError("direction has wrong dimension", "v");
    if (!s.p.allFinite()) throw ScenarioError("base point is not finite", "p");
    if (!s.v.allFinite()) throw ScenarioError("direction is not finite", "v");
    if (!(s.horizon > 0.0)) throw ScenarioError("horizon must be positive", "horizon");
    if (!(s.eps0 > 0.0)) throw ScenarioError("eps0 must be positive", "eps0");
    if (!(s.ratio > 0.0 && s.ratio < 1.0)) throw ScenarioError("ratio must lie in (0, 1)", "ratio");
    if (s.count < 1) throw ScenarioError("count must be at least 1", "count");
    if (s.epsilon(s.count - 1) < s.tolerances.min_epsilon * (1.0 - 1e-12))
        throw ScenarioError("schedule reaches epsilon below the supported minimum", "count");
    if (std::abs(F.value(s.p)) > s.tolerances.on_manifold) throw ScenarioError("base point is not on M", "p");
    const double vn = s.v.norm();
    if (vn == 0.0) {
        if (!allow_zero_velocity) throw ScenarioError("direction must be non-zero", "v");
        return;
    }
    const Vector g = F.gradient(s.p);
    const double gn = g.norm();
    if (gn == 0.0) throw ScenarioError("base point is a critical point of f", "p");
    if (std::abs(g.dot(s.v)) / (gn * vn) > s.tolerances.tangent)
        throw ScenarioError("direction is not tangent to M at p", "v");
}

struct FamilyResult {
    std::vector<double> epsilons;
    std::vector<Trajectory> members;
    std::vector<BoundsCheck> bounds;
    std::vector<EnergyReport> energy;
};

namespace detail {

/// Runs task(j) for j in [0, count) on up to `jobs` threads; rethrows the first failure.
template <class Task>
void parallel_for(int count, int jobs, const Task& task) {
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int j = 0; j < count; ++j) task(j);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> workers;
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (int j = next++; j < count; j = next++) {
                    try {
                        task(j);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

/// Members eps_j = eps0 ratio^j, j = 0..count-1, all on the same tau grid.
inline FamilyResult run_family(const Scenario& s, int jobs = 1) {
    validate_scenario(s, /*allow_zero_velocity=*/true);
    const int J = s.count;
    FamilyResult fam;
    fam.epsilons.resize(J);
    fam.members.resize(J);
    fam.bounds.resize(J);
    fam.energy.resize(J);
    for (int j = 0; j < J; ++j) fam.epsilons[j] = s.epsilon(j);
    detail::parallel_for(J, jobs, [&](int j) {
        const double eps = fam.epsilons[j];
        try {
            fam.members[j] = integrate_rescaled(s.potential, s.p, s.v, eps, s.horizon, s.integrator);
        } catch (const Error& e) {
            throw FamilyError("family member " + std::to_string(j) + " failed: " + e.what(), j);
        }
        fam.energy[j] = energy_audit(fam.members[j], s.potential, eps);
        fam.bounds[j] = lemma1_monitor(fam.members[j], s.potential, s.v, eps, s.tolerances.slack);
    });
    return fam;
}

/// Physical runs x^eps paired with each family member, sampled at t = tau / eps_j for tau in [0, T].
inline std::vector<Trajectory> physical_runs(const Scenario& s, const FamilyResult& fam, int jobs = 1) {
    std::vector<Trajectory> runs(fam.epsilons.size());
    const int half = (s.integrator.samples - 1) / 2;
    detail::parallel_for(static_cast<int>(runs.size()), jobs, [&](int j) {
        const double eps = fam.epsilons[j];
        IntegratorOptions opts = s.integrator;
        opts.samples = half + 1;
        try {
            runs[j] = integrate_newton(s.potential, PhaseState{s.p, Vector(eps * s.v)}, s.horizon / eps, opts, eps);
        } catch (const Error& e) {
            throw FamilyError("physical run " + std::to_string(j) + " failed: " + e.what(), j);
        }
    });
    return runs;
}

}  // namespace lyap
