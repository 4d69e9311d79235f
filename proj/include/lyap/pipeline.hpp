#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lyap/analysis.hpp"
#include "lyap/io.hpp"
#include "lyap/scenario.hpp"

namespace lyap {

struct StageStatus {
    std::string name;
    std::string status;  ///< ok | failed | skipped
    std::string message;
    double seconds = 0.0;
};

struct RunReport {
    std::vector<StageStatus> stages;
    std::vector<std::string> manifest;
    std::string verdict;  ///< UNSTABLE | INDETERMINATE | ERROR | empty when no certificate was requested
    int exit_code = 1;

    const StageStatus* stage(const std::string& name) const {
        for (const auto& s : stages)
            if (s.name == name) return &s;
        return nullptr;
    }
};

enum class PipelineStop { family, limit, certify };

struct PipelineOptions {
    std::filesystem::path out = "out";
    int jobs = 1;
    bool svg = true;
    PipelineStop stop = PipelineStop::certify;
};

/// Everything the pipeline computed, for callers that want more than the files.
struct PipelineResult {
    RunReport run;
    std::optional<FamilyResult> family;
    std::vector<Trajectory> physical;
    std::optional<MChart> chart;
    std::vector<CoordinateTrace> traces;
    std::optional<Lemma3Report> lemma3;
    std::optional<Cor4Report> cor4;
    std::optional<LimitCurve> limit;
    std::optional<ConvergenceReport> convergence;
    std::optional<InstabilityCertificate> certificate;
    nlohmann::json report;
};

/// Chart radius used by the pipeline: the scenario's value, otherwise the curvature heuristic
/// widened to the ball B(p, T |v|) that the trajectories may visit. Containment is checked
/// afterwards by computing tubular coordinates of every sample.
inline double pipeline_chart_radius(const Scenario& s) {
    if (s.chart_radius) return *s.chart_radius;
    return std::max(default_chart_radius(s.potential.field(), s.p), 1.05 * s.horizon * s.v.norm());
}

namespace detail {

class StageTimer {
public:
    StageTimer(RunReport& run, std::string name) : run_(run), start_(std::chrono::steady_clock::now()) {
        run_.stages.push_back({std::move(name), "ok", "", 0.0});
    }
    ~StageTimer() {
        run_.stages.back().seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    void fail(const std::string& message) {
        run_.stages.back().status = "failed";
        run_.stages.back().message = message;
    }
    void note(const std::string& message) { run_.stages.back().message = message; }

private:
    RunReport& run_;
    std::chrono::steady_clock::time_point start_;
};

inline void emit(RunReport& run, const std::filesystem::path& out, const std::string& name, const std::string& text) {
    io::write_text(out / name, text);
    run.manifest.push_back(name);
}

inline nlohmann::json scenario_summary(const ScenarioFile& sf) {
    const auto& s = sf.scenario;
    return {{"potential", {{"kind", sf.potential_kind}, {"params", sf.potential_params}}},
            {"p", io::to_json(s.p)},
            {"v", io::to_json(s.v)},
            {"p_snapped", sf.p_snapped},
            {"horizon", s.horizon},
            {"schedule", {{"eps0", s.eps0}, {"ratio", s.ratio}, {"count", s.count}}},
            {"integrator",
             {{"scheme", to_string(s.integrator.scheme)},
              {"step_factor", s.integrator.step_factor},
              {"samples", s.integrator.samples}}}};
}

inline std::string trajectories_svg(const FamilyResult& fam, const LimitCurve* limit) {
    io::SvgPlot plot("Rescaled trajectories", "x0", "x1");
    plot.equal_aspect();
    for (std::size_t j = 0; j < fam.members.size(); ++j) {
        io::SvgPlot::Series s;
        s.color = io::palette(j);
        s.label = "eps = " + io::format_number(fam.epsilons[j]).substr(0, 10);
        for (const auto& st : fam.members[j].states) {
            s.x.push_back(st.x[0]);
            s.y.push_back(st.x.size() > 1 ? st.x[1] : 0.0);
        }
        plot.add(std::move(s));
    }
    if (limit) {
        io::SvgPlot::Series s;
        s.color = "black";
        s.label = "limit";
        for (const auto& x : limit->x) {
            s.x.push_back(x[0]);
            s.y.push_back(x.size() > 1 ? x[1] : 0.0);
        }
        plot.add(std::move(s));
    }
    return plot.render();
}

inline std::string convergence_svg(const ConvergenceReport& rep) {
    io::SvgPlot plot("Consecutive sup distances", "eps_j", "d_j");
    plot.log_x().log_y();
    io::SvgPlot::Series s;
    s.color = io::palette(0);
    s.markers = true;
    s.label = "d_j";
    for (std::size_t j = 0; j < rep.distances.size(); ++j) {
        s.x.push_back(rep.epsilons[j]);
        s.y.push_back(rep.distances[j]);
    }
    plot.add(std::move(s));
    return plot.render();
}

inline std::string violation_svg(const ConvergenceReport& rep) {
    io::SvgPlot plot("Constraint violation", "eps", "max |f|");
    plot.log_x().log_y();
    io::SvgPlot::Series observed, bound;
    observed.color = io::palette(0);
    observed.markers = true;
    observed.label = "observed";
    bound.color = io::palette(3);
    bound.label = "energy bound";
    for (std::size_t j = 0; j < rep.epsilons.size(); ++j) {
        observed.x.push_back(rep.epsilons[j]);
        observed.y.push_back(rep.max_violation[j]);
        bound.x.push_back(rep.epsilons[j]);
        bound.y.push_back(rep.violation_bound[j]);
    }
    plot.add(std::move(observed));
    plot.add(std::move(bound));
    return plot.render();
}

}  // namespace detail

/// family -> coordinates -> limit -> certificate, writing traj/coords/limit CSVs, report.json,
/// run.json and figures. Exit code 0 iff the certificate says UNSTABLE (or the requested
/// earlier stop completed), 2 when indeterminate, 1 on error.
inline PipelineResult run_pipeline(const ScenarioFile& sf, const PipelineOptions& opts = {}) {
    namespace fs = std::filesystem;
    PipelineResult res;
    RunReport& run = res.run;
    const Scenario& s = sf.scenario;
    const fs::path out = opts.out;
    fs::create_directories(out);
    nlohmann::json& report = res.report;
    report["scenario"] = detail::scenario_summary(sf);

    auto finish = [&](int code, std::string verdict) -> PipelineResult& {
        run.exit_code = code;
        run.verdict = std::move(verdict);
        report["verdict"] = run.verdict;
        detail::emit(run, out, "report.json", report.dump(2) + "\n");
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& st : run.stages)
            stages.push_back({{"name", st.name}, {"status", st.status}, {"message", st.message}, {"seconds", st.seconds}});
        run.manifest.push_back("run.json");
        const nlohmann::json runj = {
            {"stages", stages}, {"manifest", run.manifest}, {"verdict", run.verdict}, {"exit_code", run.exit_code}};
        io::write_text(out / "run.json", runj.dump(2) + "\n");
        return res;
    };

    // family
    {
        detail::StageTimer t(run, "family");
        try {
            res.family = run_family(s, opts.jobs);
        } catch (const Error& e) {
            t.fail(e.what());
        }
    }
    if (!res.family) return finish(1, "ERROR");
    const FamilyResult& fam = *res.family;
    {
        nlohmann::json members = nlohmann::json::array();
        for (std::size_t j = 0; j < fam.members.size(); ++j) {
            members.push_back({{"j", j},
                               {"epsilon", fam.epsilons[j]},
                               {"step", fam.members[j].step},
                               {"bounds", io::to_json(fam.bounds[j])},
                               {"energy", io::to_json(fam.energy[j])}});
            detail::emit(run, out, "traj_eps" + std::to_string(j) + ".csv",
                         io::trajectory_csv(fam.members[j], s.potential));
        }
        report["family"] = members;
    }

    // coordinates: chart, traces and the rate/acceleration reports
    {
        detail::StageTimer t(run, "coordinates");
        try {
            res.chart = build_m_chart(s.potential.field(), s.p, s.v, pipeline_chart_radius(s));
            res.traces = coordinate_traces(*res.chart, fam);
            std::vector<Vector> visited;
            for (const auto& m : fam.members)
                for (std::size_t i = 0; i < m.size(); i += 8) visited.push_back(m.states[i].x);
            const double m_est = pullback_metric_min(*res.chart, visited);
            if (s.potential.profile().has_inverse())
                res.lemma3 = lemma3_report(res.traces, m_est, s.potential.profile(), s.v.norm(), s.tolerances.slack);
            res.cor4 = cor4_bound(res.traces);
            for (std::size_t j = 0; j < res.traces.size(); ++j)
                detail::emit(run, out, "coords_eps" + std::to_string(j) + ".csv", io::coords_csv(res.traces[j]));
            report["chart"] = {{"radius", res.chart->radius()}, {"w", io::to_json(res.chart->velocity())}};
            if (res.lemma3) report["lemma3"] = io::to_json(*res.lemma3);
            report["cor4"] = io::to_json(*res.cor4);
        } catch (const Error& e) {
            t.fail(e.what());
            report["coordinates_error"] = e.what();
        }
    }

    if (opts.stop == PipelineStop::family) {
        if (opts.svg) detail::emit(run, out, "figures/trajectories.svg", detail::trajectories_svg(fam, nullptr));
        return finish(0, "");
    }

    // limit
    {
        detail::StageTimer t(run, "limit");
        if (fam.members.size() < 3) {
            t.fail("need at least 3 family members for the Cauchy diagnostic");
        } else {
            try {
                auto [lim, conv] = extract_limit(fam, s.potential, s.v, s.tolerances.limit);
                res.limit = std::move(lim);
                res.convergence = std::move(conv);
                if (!res.convergence->cauchy) t.note("Cauchy diagnostic failed; limit emitted unverified");
            } catch (const Error& e) {
                t.fail(e.what());
            }
        }
    }
    if (!res.limit) return finish(1, "ERROR");
    report["convergence"] = io::to_json(*res.convergence);
    report["limit"] = io::to_json(*res.limit);
    detail::emit(run, out, "limit.csv", io::limit_csv(*res.limit));
    if (opts.svg) {
        detail::emit(run, out, "figures/trajectories.svg", detail::trajectories_svg(fam, &*res.limit));
        detail::emit(run, out, "figures/convergence.svg", detail::convergence_svg(*res.convergence));
        detail::emit(run, out, "figures/violation.svg", detail::violation_svg(*res.convergence));
    }
    if (opts.stop == PipelineStop::limit) return finish(res.limit->verified ? 0 : 2, "");

    // certificate
    {
        detail::StageTimer t(run, "certificate");
        try {
            res.physical = physical_runs(s, fam, opts.jobs);
            res.certificate = certify_instability(fam, *res.limit, res.physical);
            if (res.certificate->verdict == Verdict::unstable && !recheck_certificate(*res.certificate, res.physical))
                throw CertificationError("certificate failed re-validation from stored trajectories");
            t.note(res.certificate->reason);
        } catch (const Error& e) {
            t.fail(e.what());
            report["certificate_error"] = e.what();
        }
    }
    if (!res.certificate) return finish(1, "ERROR");
    report["certificate"] = io::to_json(*res.certificate);
    const bool unstable = res.certificate->verdict == Verdict::unstable;
    return finish(unstable ? 0 : 2, to_string(res.certificate->verdict));
}

}  // namespace lyap
