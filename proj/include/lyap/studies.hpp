#pragma once

#include <random>
#include <vector>

#include <json.hpp>

#include "lyap/analysis.hpp"
#include "lyap/io.hpp"
#include "lyap/pipeline.hpp"
#include "lyap/regularity.hpp"

namespace lyap {

struct ResidualStudy {
    std::vector<double> tau;
    std::vector<double> residual;         ///< |residual| with trace spacing h and frame step s
    std::vector<double> residual_halved;  ///< same samples, spacing h/2 and frame step s/2
    double max_residual = 0.0;
    double max_residual_halved = 0.0;
    double ratio = 0.0;  ///< max_residual / max_residual_halved
};

/// Evaluates the tangential curvilinear equations along one rescaled trajectory at `points`
/// interior samples, then again with every finite-difference step halved.
inline ResidualStudy residual_study(const Scenario& s, double eps, int samples, int points) {
    if (points < 1) throw InvalidArgument("residual_study: need at least one sample point");
    if (samples < 5 || samples % 2 == 0) throw InvalidArgument("residual_study: samples must be odd and >= 5");
    const MChart chart = build_m_chart(s.potential.field(), s.p, s.v, pipeline_chart_radius(s));
    auto trace_for = [&](int n) {
        IntegratorOptions opts = s.integrator;
        opts.samples = n;
        const Trajectory traj = integrate_rescaled(s.potential, s.p, s.v, eps, s.horizon, opts);
        FamilyResult single;
        single.epsilons = {eps};
        single.members = {traj};
        return coordinate_traces(chart, single).front();
    };
    const CoordinateTrace coarse = trace_for(samples);
    const CoordinateTrace fine = trace_for(2 * samples - 1);

    std::vector<std::size_t> idx_coarse, idx_fine;
    for (int k = 0; k < points; ++k) {
        const auto i = static_cast<std::size_t>(std::llround((k + 1.0) * (samples - 1) / (points + 1.0)));
        idx_coarse.push_back(i);
        idx_fine.push_back(2 * i);
    }
    const double h = default_frame_step(chart);
    const auto rc = curvilinear_residual(chart, coarse, idx_coarse, h);
    const auto rf = curvilinear_residual(chart, fine, idx_fine, 0.5 * h);

    ResidualStudy st;
    for (int k = 0; k < points; ++k) {
        st.tau.push_back(coarse.tau[idx_coarse[static_cast<std::size_t>(k)]]);
        st.residual.push_back(rc[static_cast<std::size_t>(k)].norm());
        st.residual_halved.push_back(rf[static_cast<std::size_t>(k)].norm());
        st.max_residual = std::max(st.max_residual, st.residual.back());
        st.max_residual_halved = std::max(st.max_residual_halved, st.residual_halved.back());
    }
    st.ratio = st.max_residual_halved > 0.0 ? st.max_residual / st.max_residual_halved
                                            : std::numeric_limits<double>::infinity();
    return st;
}

inline nlohmann::json to_json(const ResidualStudy& st) {
    return {{"tau", st.tau},
            {"residual", st.residual},
            {"residual_halved", st.residual_halved},
            {"max_residual", st.max_residual},
            {"max_residual_halved", st.max_residual_halved},
            {"ratio", io::number(st.ratio)}};
}

struct PropertyCheck {
    nlohmann::json report;
    bool pass = false;
};

/// Field and flow properties on random points of the tube around p: gradient against central
/// differences, regularity of zero, flow identity f(phi(t, x)) = t + f(x), and U(Psi(r, y)) = g(r).
inline PropertyCheck property_check(const Scenario& s, int samples = 200, unsigned seed = 12345) {
    const auto& U = s.potential;
    const auto& F = U.field();
    const int n = F.dimension();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double spread = std::max(0.1, 0.5 * s.horizon * s.v.norm());

    double worst_fd = 0.0;
    std::vector<Vector> seeds;
    for (int i = 0; i < samples; ++i) {
        Vector x = s.p;
        for (int k = 0; k < n; ++k) x[k] += spread * unit(rng);
        worst_fd = std::max(worst_fd, fd_gradient_check(U, x));
        if (i < 50) seeds.push_back(x);
    }
    PropertyCheck out;
    bool ok = worst_fd <= 1e-6;
    out.report["gradient_fd"] = {{"max_discrepancy", worst_fd}, {"pass", worst_fd <= 1e-6}};

    try {
        const auto reg = check_regular_value(F, seeds, 1e-3);
        out.report["regularity"] = io::to_json(reg);
        ok = ok && reg.pass;
    } catch (const Error& e) {
        out.report["regularity"] = {{"error", e.what()}, {"pass", false}};
        ok = false;
    }

    double worst_flow = 0.0, worst_sep = 0.0;
    int skipped = 0;
    try {
        const MChart chart = build_m_chart(F, s.p, s.v, pipeline_chart_radius(s));
        std::uniform_real_distribution<double> time(-0.3, 0.3);
        const double r_span = 0.1;
        for (int i = 0; i < samples; ++i) {
            Vector y(n - 1);
            for (int k = 0; k + 1 < n; ++k) y[k] = 0.5 * chart.radius() * unit(rng) / std::sqrt(double(n - 1));
            try {
                const Vector q = chart.psi(y);
                worst_flow = std::max(worst_flow, flow_identity_residual(F, q, time(rng)));
                const double r = r_span * unit(rng);
                worst_sep = std::max(worst_sep, std::abs(U.value(chart.Psi(r, y)) - U.profile().value(r)));
            } catch (const Error&) {
                ++skipped;
            }
        }
        out.report["flow_identity"] = {{"max_residual", worst_flow}, {"pass", worst_flow <= 1e-9}};
        out.report["potential_separation"] = {{"max_residual", worst_sep}, {"pass", worst_sep <= 1e-9}};
        out.report["skipped_points"] = skipped;
        ok = ok && worst_flow <= 1e-9 && worst_sep <= 1e-9;
    } catch (const Error& e) {
        out.report["chart_error"] = e.what();
        ok = false;
    }
    out.report["pass"] = ok;
    out.pass = ok;
    return out;
}

}  // namespace lyap
