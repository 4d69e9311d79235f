#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lyap/dynamics.hpp"
#include "lyap/geometry.hpp"

namespace lyap {

/// Scenario plus the settings that only matter to the command line.
struct ScenarioFile {
    Scenario scenario;
    std::string potential_kind;
    nlohmann::json potential_params = nlohmann::json::object();
    std::string output_dir = "out";
    bool svg = true;
    bool p_snapped = false;
    double p_snap_distance = 0.0;
};

namespace detail {

inline int line_of_byte(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < text.size() && i < byte; ++i)
        if (text[i] == '\n') ++line;
    return line;
}

inline Vector scenario_vector(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) throw ScenarioError("'" + field + "' must be a non-empty array of numbers", field);
    Vector out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ScenarioError("'" + field + "' must be a non-empty array of numbers", field);
        out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return out;
}

inline double scenario_number(const nlohmann::json& obj, const char* key, double fallback, const std::string& prefix) {
    if (!obj.contains(key)) return fallback;
    const auto& j = obj.at(key);
    if (!j.is_number()) throw ScenarioError("'" + prefix + key + "' must be a number", prefix + key);
    return j.get<double>();
}

inline std::string short_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known, const std::string& prefix) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key())) throw ScenarioError("unknown field '" + prefix + it.key() + "'", prefix + it.key());
}

}  // namespace detail

/// Builds a validated scenario from an already-parsed JSON document. The base point is snapped
/// onto its foot point when that lies within tolerances.snap of p, and v is projected onto T_p M when it is tangent
/// within tolerances.tangent.
inline ScenarioFile scenario_from_json(const nlohmann::json& doc) {
    using detail::reject_unknown;
    using detail::scenario_number;
    if (!doc.is_object()) throw ScenarioError("scenario must be a JSON object");
    reject_unknown(doc, {"potential", "p", "v", "horizon", "schedule", "integrator", "tolerances", "chart_radius",
                         "output", "svg"},
                   "");
    if (!doc.contains("potential")) throw ScenarioError("missing 'potential'", "potential");
    const auto& pot = doc.at("potential");
    if (!pot.is_object() || !pot.contains("kind") || !pot.at("kind").is_string())
        throw ScenarioError("'potential' needs a string 'kind'", "potential.kind");
    reject_unknown(pot, {"kind", "params"}, "potential.");

    auto make_potential = [&] {
        try {
            return gallery_composite(pot.at("kind").get<std::string>(), pot.value("params", nlohmann::json::object()));
        } catch (const InvalidArgument& e) {
            throw ScenarioError(e.what(), "potential");
        }
    };
    Scenario base{make_potential(), Vector(), Vector(), 1.0, 0.1, 0.5, 6, IntegratorOptions{}, Tolerances{}, std::nullopt};
    ScenarioFile out{std::move(base), "", nlohmann::json::object(), "out", true, false, 0.0};
    out.potential_kind = pot.at("kind").get<std::string>();
    out.potential_params = pot.value("params", nlohmann::json::object());
    Scenario& s = out.scenario;

    if (!doc.contains("p")) throw ScenarioError("missing 'p'", "p");
    if (!doc.contains("v")) throw ScenarioError("missing 'v'", "v");
    s.p = detail::scenario_vector(doc.at("p"), "p");
    s.v = detail::scenario_vector(doc.at("v"), "v");
    s.horizon = scenario_number(doc, "horizon", 1.0, "");

    if (doc.contains("schedule")) {
        const auto& sch = doc.at("schedule");
        if (!sch.is_object()) throw ScenarioError("'schedule' must be an object", "schedule");
        reject_unknown(sch, {"eps0", "ratio", "count"}, "schedule.");
        s.eps0 = scenario_number(sch, "eps0", s.eps0, "schedule.");
        s.ratio = scenario_number(sch, "ratio", s.ratio, "schedule.");
        const double count = scenario_number(sch, "count", s.count, "schedule.");
        if (count != std::floor(count)) throw ScenarioError("'schedule.count' must be an integer", "schedule.count");
        s.count = static_cast<int>(count);
    }
    if (doc.contains("integrator")) {
        const auto& in = doc.at("integrator");
        if (!in.is_object()) throw ScenarioError("'integrator' must be an object", "integrator");
        reject_unknown(in, {"scheme", "step_factor", "samples"}, "integrator.");
        if (in.contains("scheme")) {
            if (!in.at("scheme").is_string()) throw ScenarioError("'integrator.scheme' must be a string", "integrator.scheme");
            try {
                s.integrator.scheme = scheme_from_string(in.at("scheme").get<std::string>());
            } catch (const InvalidArgument& e) {
                throw ScenarioError(e.what(), "integrator.scheme");
            }
        }
        s.integrator.step_factor = scenario_number(in, "step_factor", s.integrator.step_factor, "integrator.");
        const double samples = scenario_number(in, "samples", s.integrator.samples, "integrator.");
        if (samples != std::floor(samples) || samples < 5 || static_cast<long>(samples) % 2 == 0)
            throw ScenarioError("'integrator.samples' must be an odd integer >= 5", "integrator.samples");
        s.integrator.samples = static_cast<int>(samples);
        if (!(s.integrator.step_factor > 0.0))
            throw ScenarioError("'integrator.step_factor' must be positive", "integrator.step_factor");
    }
    if (doc.contains("tolerances")) {
        const auto& t = doc.at("tolerances");
        if (!t.is_object()) throw ScenarioError("'tolerances' must be an object", "tolerances");
        reject_unknown(t, {"on_manifold", "snap", "tangent", "slack", "limit", "min_epsilon"}, "tolerances.");
        auto& tol = s.tolerances;
        tol.on_manifold = scenario_number(t, "on_manifold", tol.on_manifold, "tolerances.");
        tol.snap = scenario_number(t, "snap", tol.snap, "tolerances.");
        tol.tangent = scenario_number(t, "tangent", tol.tangent, "tolerances.");
        tol.slack = scenario_number(t, "slack", tol.slack, "tolerances.");
        tol.limit = scenario_number(t, "limit", tol.limit, "tolerances.");
        tol.min_epsilon = scenario_number(t, "min_epsilon", tol.min_epsilon, "tolerances.");
    }
    if (doc.contains("chart_radius")) {
        const double r = scenario_number(doc, "chart_radius", 0.0, "");
        if (!(r > 0.0)) throw ScenarioError("'chart_radius' must be positive", "chart_radius");
        s.chart_radius = r;
    }
    if (doc.contains("output")) {
        if (!doc.at("output").is_string()) throw ScenarioError("'output' must be a string", "output");
        out.output_dir = doc.at("output").get<std::string>();
    }
    if (doc.contains("svg")) {
        if (!doc.at("svg").is_boolean()) throw ScenarioError("'svg' must be a boolean", "svg");
        out.svg = doc.at("svg").get<bool>();
    }

    const auto& F = s.potential.field();
    if (s.p.size() != F.dimension()) throw ScenarioError("'p' has the wrong dimension for the potential", "p");
    if (s.v.size() != F.dimension()) throw ScenarioError("'v' has the wrong dimension for the potential", "v");

    const double fp = F.value(s.p);
    if (fp != 0.0) {
        Vector snapped;
        try {
            snapped = foot_point(F, s.p);
        } catch (const Error& e) {
            throw ScenarioError(std::string("'p' cannot be projected onto M: ") + e.what(), "p");
        }
        const double dist = (snapped - s.p).norm();
        if (dist > s.tolerances.snap * (1 + 1e-9))
            throw ScenarioError("'p' is not on M: distance " + detail::short_number(dist) + ", |f(p)| = " +
                                    detail::short_number(std::abs(fp)),
                                "p");
        out.p_snap_distance = dist;
        out.p_snapped = true;
        s.p = snapped;
    }
    const double vn = s.v.norm();
    if (vn == 0.0) throw ScenarioError("'v' must be non-zero", "v");
    const Vector g = F.gradient(s.p);
    const double gn = g.norm();
    if (gn == 0.0) throw ScenarioError("'p' is a critical point of f", "p");
    const Vector nhat = g / gn;
    if (std::abs(nhat.dot(s.v)) / vn > s.tolerances.tangent)
        throw ScenarioError("'v' is not tangent to M at p", "v");
    s.v -= nhat.dot(s.v) * nhat;

    validate_scenario(s);
    return out;
}

inline ScenarioFile parse_scenario_text(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const int line = detail::line_of_byte(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ScenarioError("parse error at line " + std::to_string(line) + ": " + e.what(), "", line);
    }
    return scenario_from_json(doc);
}

inline ScenarioFile parse_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

}  // namespace lyap
