// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "lyap/lyap.hpp"

using namespace lyap;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

ScenarioFile load(const char* name) {
    return parse_scenario(std::string(LYAP_SCENARIO_DIR) + "/" + name + ".json");
}

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Outcome gutter_exactness() {
    const auto s = load("gutter").scenario;
    const auto traj = integrate_rescaled(s.potential, s.p, s.v, 0.05, 1.0, s.integrator);
    double sup = 0;
    for (std::size_t i = 0; i < traj.size(); ++i)
        sup = std::max(sup, (traj.states[i].x - vec({0, traj.times[i]})).norm());
    return {sup <= 1e-10, fmt("sup |x_eps - (0, tau)| = %.3g (<= 1e-10)", sup)};
}

Outcome lemma1_suite() {
    bool ok = true;
    std::string detail;
    for (const char* name : {"gutter", "circle", "ellipsoid"}) {
        const auto fam = run_family(load(name).scenario);
        double worst = 0;
        for (const auto& b : fam.bounds) {
            ok = ok && b.pass() && b.slack <= 1e-6;
            worst = std::max(worst, b.slack_used);
        }
        detail += std::string(name) + fmt(" %.0f members, max excess %.2g; ", double(fam.members.size()), worst);
    }
    return {ok, detail + "slack 1e-6"};
}

Outcome energy_audit_suite() {
    bool ok = true;
    double worst = 0;
    for (const char* name : {"gutter", "circle", "ellipsoid"}) {
        const auto s = load(name).scenario;
        const auto fam = run_family(s);
        for (std::size_t j = 0; j < fam.members.size(); ++j) {
            const auto e = energy_audit(fam.members[j], s.potential, fam.epsilons[j]);
            worst = std::max(worst, e.drift);
            ok = ok && e.drift <= 1e-8 &&
                 fam.members[j].step <= s.integrator.step_factor * fam.epsilons[j] * (1 + 1e-12);
        }
    }
    return {ok, fmt("max relative drift %.3g (<= 1e-8) with dtau <= 0.01 eps", worst)};
}

Outcome flow_identity_suite() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    double worst_flow = 0, worst_sep = 0;
    int samples = 0;
    for (const char* name : {"gutter", "circle", "ellipsoid"}) {
        const auto s = load(name).scenario;
        const auto& F = s.potential.field();
        const MChart chart = build_m_chart(F, s.p, s.v, 0.5);
        const int m = F.dimension() - 1;
        auto random_y = [&] {
            Vector y(m);
            for (auto& c : y) c = 0.8 * chart.radius() * unit(rng) / std::sqrt(double(m));
            return y;
        };
        for (int i = 0; i < 1000; ++i) {
            const Vector x = chart.Psi(0.3 * unit(rng), random_y());
            worst_flow = std::max(worst_flow, flow_identity_residual(F, x, 0.3 * unit(rng)));
            const double r = 0.3 * unit(rng);
            worst_sep = std::max(worst_sep, std::abs(s.potential.value(chart.Psi(r, random_y())) -
                                                     s.potential.profile().value(r)));
            ++samples;
        }
    }
    return {worst_flow <= 1e-9 && worst_sep <= 1e-9,
            fmt("flow identity %.3g, |U(Psi) - g(r)| %.3g over %.0f points (<= 1e-9)", worst_flow, worst_sep,
                double(samples))};
}

Outcome circle_limit() {
    const auto s = load("circle").scenario;
    const auto fam = run_family(s);
    const auto [lim, conv] = extract_limit(fam, s.potential, s.v, s.tolerances.limit);
    bool mono = true;
    for (std::size_t j = 1; j < conv.distances.size(); ++j) mono = mono && conv.distances[j] <= conv.distances[j - 1];
    double sup = 0;
    for (std::size_t i = 0; i < lim.tau.size(); ++i)
        sup = std::max(sup, (lim.x[i] - vec({std::cos(lim.tau[i]), std::sin(lim.tau[i])})).norm());
    const double dv = (lim.initial_velocity - vec({0, 1})).norm();
    return {mono && sup <= 1e-2 && dv <= 1e-2,
            std::string("d_j non-increasing: ") + (mono ? "yes" : "no") +
                fmt("; sup |x - (cos, sin)| = %.3g; |x'(0) - v| = %.3g (<= 1e-2)", sup, dv)};
}

Outcome certificates() {
    std::string detail;
    bool ok = true;
    {
        const auto s = load("circle").scenario;
        const auto fam = run_family(s);
        const auto lim = extract_limit(fam, s.potential, s.v, s.tolerances.limit).first;
        const auto phys = physical_runs(s, fam);
        const auto cert = certify_instability(fam, lim, phys);
        const double R_exact = 2 * std::sin(0.5);
        ok = ok && cert.verdict == Verdict::unstable && std::abs(cert.R - R_exact) <= 2e-2 &&
             recheck_certificate(cert, phys);
        detail += "circle " + to_string(cert.verdict) + fmt(" R = %.6f (2 sin(1/2) = %.6f); ", cert.R, R_exact);
    }
    {
        const auto s = load("ellipsoid").scenario;
        const auto fam = run_family(s);
        const auto lim = extract_limit(fam, s.potential, s.v, s.tolerances.limit).first;
        const auto phys = physical_runs(s, fam);
        const auto cert = certify_instability(fam, lim, phys);
        // Reference limit: eps = 1e-3 on a step fine enough for the quartic well.
        const auto ref = integrate_rescaled(s.potential, s.p, s.v, 1e-3, s.horizon, s.integrator);
        const Vector x_ref = foot_point(s.potential.field(), ref.states[cert.tau_star_index].x);
        int j0_ref = -1;
        for (int j = int(fam.members.size()) - 1; j >= 0; --j) {
            if ((fam.members[std::size_t(j)].states[cert.tau_star_index].x - x_ref).norm() >= cert.R / 2) break;
            j0_ref = j;
        }
        const int j0 = cert.j0.value_or(-1);
        ok = ok && cert.verdict == Verdict::unstable && j0 >= 0 && j0 <= 3 && j0_ref >= 0 && j0_ref <= 3 &&
             recheck_certificate(cert, phys);
        detail += "ellipsoid " + to_string(cert.verdict) +
                  fmt(" R = %.4f, j0 = %.0f, j0 vs eps = 1e-3 reference = %.0f (<= 3)", cert.R, double(j0), double(j0_ref));
    }
    return {ok, detail};
}

Outcome lemma3_cor4() {
    const auto s = load("circle").scenario;
    const auto fam = run_family(s);
    const MChart chart = build_m_chart(s.potential.field(), s.p, s.v, pipeline_chart_radius(s));
    const auto traces = coordinate_traces(chart, fam);
    bool ok = true;
    double worst = 0;
    for (std::size_t j = 0; j < traces.size(); ++j) {
        double sup = 0;
        for (double r : traces[j].r) sup = std::max(sup, std::abs(r));
        const double bound = fam.epsilons[j] / std::sqrt(2.0);
        worst = std::max(worst, sup / bound);
        ok = ok && sup <= bound * (1 + 1e-6);
    }
    const auto c4 = cor4_bound(traces);
    ok = ok && c4.ratio <= 4.0;
    return {ok, fmt("max sup|r| / (eps/sqrt2) = %.6f (<= 1 + 1e-6); max|y''| ratio across j = %.3f (<= 4)", worst,
                    c4.ratio)};
}

Outcome curvilinear_residual_check() {
    const auto st = residual_study(load("circle").scenario, 0.05, 1601, 20);
    return {st.max_residual <= 1e-3 && st.ratio >= 3.0,
            fmt("max residual %.3g (<= 1e-3), halved %.3g, shrink factor %.2f (>= 3)", st.max_residual,
                st.max_residual_halved, st.ratio)};
}

Outcome stability_contrast() {
    const auto rep = bounded_orbit_demo(std::get<PlainPotential>(gallery_lookup("painleve")));
    bool energies = true;
    for (const auto& o : rep.orbits) energies = energies && o.energy < rep.barrier.height;
    return {rep.all_inside && energies && rep.orbits.size() == 10 && rep.t_end >= 1000.0,
            fmt("barrier (%.4f, %.4f) height %.4g; %.0f sub-barrier orbits stay inside over t in [0, 1000]",
                rep.barrier.left, rep.barrier.right, rep.barrier.height, double(rep.orbits.size()))};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const Criterion criteria[] = {
        {1, "gutter exactness", 1, gutter_exactness},
        {2, "Lemma 1 bounds", 60, lemma1_suite},
        {3, "energy audit", 60, energy_audit_suite},
        {4, "flow identity and potential separation", 120, flow_identity_suite},
        {5, "circle limit", 120, circle_limit},
        {6, "instability certificates", 300, certificates},
        {7, "coordinate bounds and acceleration uniformity", 120, lemma3_cor4},
        {8, "curvilinear residual", 120, curvilinear_residual_check},
        {9, "stability contrast", 60, stability_contrast},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = out.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("criterion %d %s: %s  %s [%.2f s, budget %.0f s%s]\n", c.id, c.name, pass ? "PASS" : "FAIL",
                    out.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d of 9 criteria passed\n", 9 - failures);
    return failures == 0 ? 0 : 1;
}
