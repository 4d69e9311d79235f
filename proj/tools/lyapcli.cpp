// Command-line front end: scenario files in, CSV/JSON/SVG artifacts out.
//
// Exit codes: 0 success (certify: UNSTABLE), 2 indeterminate, 1 error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lyap/lyap.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonFlags {
    std::string scenario;
    std::string out;
    int jobs = 1;
    std::optional<double> eps0, ratio, horizon, step_factor;
    std::optional<int> count;
    std::optional<bool> svg;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_scenario = true) {
    auto* opt = cmd->add_option("--scenario", f.scenario, "scenario JSON file");
    if (needs_scenario) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "output directory (overrides the scenario's 'output')");
    cmd->add_option("--jobs", f.jobs, "worker threads for family members")->check(CLI::PositiveNumber);
    cmd->add_option("--eps0", f.eps0, "largest epsilon of the schedule");
    cmd->add_option("--ratio", f.ratio, "epsilon ratio between members, in (0, 1)");
    cmd->add_option("--count", f.count, "number of family members");
    cmd->add_option("--horizon", f.horizon, "rescaled horizon T");
    cmd->add_option("--step-factor", f.step_factor, "c in dtau = c * eps");
    cmd->add_flag("--svg,!--no-svg", f.svg, "write SVG figures");
}

/// Loads the scenario with command-line overrides applied before validation.
lyap::ScenarioFile load(const CommonFlags& f) {
    std::ifstream in(f.scenario, std::ios::binary);
    if (!in) throw lyap::ScenarioError("cannot open scenario file '" + f.scenario + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error&) {
        return lyap::parse_scenario_text(text);  // rethrows with line information
    }
    if (doc.is_object()) {
        auto& sch = doc["schedule"];
        if (sch.is_null()) sch = json::object();
        if (f.eps0) sch["eps0"] = *f.eps0;
        if (f.ratio) sch["ratio"] = *f.ratio;
        if (f.count) sch["count"] = *f.count;
        if (sch.empty()) doc.erase("schedule");
        if (f.horizon) doc["horizon"] = *f.horizon;
        if (f.step_factor) doc["integrator"]["step_factor"] = *f.step_factor;
    }
    lyap::ScenarioFile sf = lyap::scenario_from_json(doc);
    if (!f.out.empty()) sf.output_dir = f.out;
    if (f.svg) sf.svg = *f.svg;
    return sf;
}

void write_json(const fs::path& path, const json& j) { lyap::io::write_text(path, j.dump(2) + "\n"); }

int run_stage(const CommonFlags& f, lyap::PipelineStop stop) {
    const auto sf = load(f);
    lyap::PipelineOptions opts;
    opts.out = sf.output_dir;
    opts.jobs = f.jobs;
    opts.svg = sf.svg;
    opts.stop = stop;
    const auto res = lyap::run_pipeline(sf, opts);
    for (const auto& st : res.run.stages)
        std::cout << st.name << ": " << st.status << (st.message.empty() ? "" : " (" + st.message + ")") << '\n';
    if (!res.run.verdict.empty()) std::cout << "verdict: " << res.run.verdict << '\n';
    if (res.certificate && res.certificate->j0)
        std::cout << "R = " << res.certificate->R << " at tau* = " << res.certificate->tau_star
                  << ", j0 = " << *res.certificate->j0 << '\n';
    std::cout << "wrote " << res.run.manifest.size() << " files to " << opts.out.string() << '\n';
    return res.run.exit_code;
}

int simulate(const CommonFlags& f, std::optional<double> eps_flag) {
    const auto sf = load(f);
    const auto& s = sf.scenario;
    const double eps = eps_flag.value_or(s.eps0);
    const auto traj = lyap::integrate_rescaled(s.potential, s.p, s.v, eps, s.horizon, s.integrator);
    const auto energy = lyap::energy_audit(traj, s.potential, eps);
    const auto bounds = lyap::lemma1_monitor(traj, s.potential, s.v, eps, s.tolerances.slack);
    const fs::path out = sf.output_dir;
    lyap::io::write_text(out / "traj_eps0.csv", lyap::io::trajectory_csv(traj, s.potential));
    const json j = {{"epsilon", eps},
                    {"step", traj.step},
                    {"energy", lyap::io::to_json(energy)},
                    {"bounds", lyap::io::to_json(bounds)}};
    write_json(out / "simulate.json", j);
    std::cout << j.dump(2) << '\n';
    return bounds.pass() ? 0 : 2;
}

int residual(const CommonFlags& f, std::optional<double> eps_flag, int samples, int points, double max_residual,
             double min_ratio) {
    const auto sf = load(f);
    const double eps = eps_flag.value_or(sf.scenario.eps0);
    const auto st = lyap::residual_study(sf.scenario, eps, samples, points);
    json j = lyap::to_json(st);
    j["epsilon"] = eps;
    j["pass"] = st.max_residual <= max_residual && st.ratio >= min_ratio;
    write_json(fs::path(sf.output_dir) / "residual.json", j);
    std::cout << "max residual " << st.max_residual << ", halved " << st.max_residual_halved << ", ratio " << st.ratio
              << '\n';
    return j["pass"].get<bool>() ? 0 : 2;
}

int gallery(const std::string& name, const std::string& out, const lyap::ContrastOptions& opts) {
    const auto pot = lyap::gallery_lookup(name);
    const auto* plain = std::get_if<lyap::PlainPotential>(&pot);
    if (!plain) throw lyap::InvalidArgument("gallery demo needs a plain potential (painleve or laloy)");
    const auto rep = lyap::bounded_orbit_demo(*plain, opts);
    write_json(fs::path(out) / "gallery.json", lyap::io::to_json(rep));
    std::cout << "barrier [" << rep.barrier.left << ", " << rep.barrier.right << "] height " << rep.barrier.height
              << "; " << rep.orbits.size() << " orbits " << (rep.all_inside ? "stay inside" : "ESCAPE") << '\n';
    return rep.all_inside ? 0 : 2;
}

int check(const CommonFlags& f, int samples) {
    const auto sf = load(f);
    const auto pc = lyap::property_check(sf.scenario, samples);
    write_json(fs::path(sf.output_dir) / "check.json", pc.report);
    std::cout << pc.report.dump(2) << '\n';
    return pc.pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Singular-limit instability laboratory"};
    app.require_subcommand(1);

    CommonFlags sim_f, fam_f, lim_f, cert_f, res_f, chk_f;
    std::optional<double> sim_eps, res_eps;
    int res_samples = 1601, res_points = 20, chk_samples = 200;
    double res_max = 1e-3, res_ratio = 3.0;

    auto* sim = app.add_subcommand("simulate", "integrate one rescaled trajectory");
    add_common(sim, sim_f);
    sim->add_option("--eps", sim_eps, "epsilon (default: eps0)");

    auto* fam = app.add_subcommand("family", "integrate the epsilon family and coordinate traces");
    add_common(fam, fam_f);
    auto* lim = app.add_subcommand("limit", "family plus Cauchy diagnostic and limit curve");
    add_common(lim, lim_f);
    auto* cert = app.add_subcommand("certify", "full pipeline with instability certificate");
    add_common(cert, cert_f);

    auto* res = app.add_subcommand("residual", "tangential equations of motion in tubular coordinates");
    add_common(res, res_f);
    res->add_option("--eps", res_eps, "epsilon (default: eps0)");
    res->add_option("--samples", res_samples, "trace samples on [-T, T] (odd)");
    res->add_option("--points", res_points, "interior evaluation points");
    res->add_option("--max-residual", res_max, "pass threshold on the residual");
    res->add_option("--min-ratio", res_ratio, "required shrink factor under step halving");

    std::string gal_name = "painleve", gal_out = "out";
    lyap::ContrastOptions gal_opts;
    auto* gal = app.add_subcommand("gallery", "stability-contrast demos for potentials outside the g o f class");
    gal->add_option("--name", gal_name, "painleve | laloy")->check(CLI::IsMember({"painleve", "laloy"}));
    gal->add_option("--out", gal_out, "output directory");
    gal->add_option("--radius", gal_opts.radius, "half-width of the barrier scan");
    gal->add_option("--scan-points", gal_opts.scan_points, "barrier scan resolution");
    gal->add_option("--trajectories", gal_opts.trajectories, "number of sub-barrier motions");
    gal->add_option("--t-end", gal_opts.t_end, "integration time");
    gal->add_option("--step-factor", gal_opts.integrator.step_factor, "time step");

    auto* chk = app.add_subcommand("check", "field and flow property suite");
    add_common(chk, chk_f);
    chk->add_option("--samples", chk_samples, "random points per property");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return simulate(sim_f, sim_eps);
        if (*fam) return run_stage(fam_f, lyap::PipelineStop::family);
        if (*lim) return run_stage(lim_f, lyap::PipelineStop::limit);
        if (*cert) return run_stage(cert_f, lyap::PipelineStop::certify);
        if (*res) return residual(res_f, res_eps, res_samples, res_points, res_max, res_ratio);
        if (*gal) return gallery(gal_name, gal_out, gal_opts);
        if (*chk) return check(chk_f, chk_samples);
    } catch (const lyap::ScenarioError& e) {
        std::cerr << "scenario error";
        if (!e.field().empty()) std::cerr << " [" << e.field() << "]";
        std::cerr << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
