#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lyap/analysis.hpp"
#include "lyap/contrast.hpp"
#include "lyap/dynamics.hpp"
#include "lyap/regularity.hpp"

namespace lyap::io {

namespace fs = std::filesystem;

/// 17 significant digits, '.' decimal separator regardless of locale.
inline std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s(buf);
    for (auto& c : s)
        if (c == ',') c = '.';
    return s;
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

/// tau,x0..x{n-1},v0..v{n-1},H with H = |v|^2/2 + eps^-2 U.
template <Potential P>
std::string trajectory_csv(const Trajectory& traj, const P& potential) {
    const int n = traj.dimension();
    std::ostringstream os;
    os << "tau";
    for (int i = 0; i < n; ++i) os << ",x" << i;
    for (int i = 0; i < n; ++i) os << ",v" << i;
    os << ",H\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto& s = traj.states[k];
        os << format_number(traj.times[k]);
        for (int i = 0; i < n; ++i) os << ',' << format_number(s.x[i]);
        for (int i = 0; i < n; ++i) os << ',' << format_number(s.v[i]);
        const double H = traj.kind == TrajectoryKind::rescaled ? rescaled_energy(potential, s, traj.epsilon)
                                                              : physical_energy(potential, s);
        os << ',' << format_number(H) << '\n';
    }
    return os.str();
}

/// tau,r,y1..y{n-1}
inline std::string coords_csv(const CoordinateTrace& t) {
    std::ostringstream os;
    os << "tau,r";
    const auto m = t.y.empty() ? 0 : t.y.front().size();
    for (Eigen::Index k = 0; k < m; ++k) os << ",y" << (k + 1);
    os << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
        os << format_number(t.tau[i]) << ',' << format_number(t.r[i]);
        for (Eigen::Index k = 0; k < m; ++k) os << ',' << format_number(t.y[i][k]);
        os << '\n';
    }
    return os.str();
}

/// tau,x0..x{n-1}
inline std::string limit_csv(const LimitCurve& lim) {
    std::ostringstream os;
    os << "tau";
    const auto n = lim.x.empty() ? 0 : lim.x.front().size();
    for (Eigen::Index i = 0; i < n; ++i) os << ",x" << i;
    os << '\n';
    for (std::size_t k = 0; k < lim.tau.size(); ++k) {
        os << format_number(lim.tau[k]);
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_number(lim.x[k][i]);
        os << '\n';
    }
    return os.str();
}

/// Reads a numeric CSV with a header row. Returns the header and the rows.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string line;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    if (!std::getline(in, line)) throw Error("empty CSV '" + path.string() + "'");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != header.size()) throw Error("ragged CSV row in '" + path.string() + "'");
        rows.push_back(std::move(row));
    }
    return {std::move(header), std::move(rows)};
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

/// JSON has no infinities or NaN; those become null.
inline nlohmann::json number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const BoundsCheck& b) {
    return {{"max_speed", b.max_speed},
            {"max_potential", b.max_potential},
            {"max_displacement", b.max_displacement},
            {"speed_bound", b.speed_bound},
            {"potential_bound", b.potential_bound},
            {"worst_ball_ratio", number(b.worst_ball_ratio)},
            {"speed_ok", b.speed_ok},
            {"potential_ok", b.potential_ok},
            {"ball_ok", b.ball_ok},
            {"slack", b.slack},
            {"slack_used", number(b.slack_used)},
            {"pass", b.pass()},
            {"violation", b.violation}};
}

inline nlohmann::json to_json(const EnergyReport& e) {
    return {{"initial", e.initial}, {"drift", e.drift}};
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
    nlohmann::json rates = nlohmann::json::array();
    for (double x : r.rates) rates.push_back(number(x));
    nlohmann::json bound = nlohmann::json::array();
    for (double x : r.violation_bound) bound.push_back(number(x));
    return {{"epsilons", r.epsilons},
            {"distances", r.distances},
            {"non_increasing", r.non_increasing},
            {"rates", rates},
            {"max_violation", r.max_violation},
            {"violation_bound", bound},
            {"tolerance", r.tolerance},
            {"noise_floor", r.noise_floor},
            {"cauchy", r.cauchy}};
}

inline nlohmann::json to_json(const LimitCurve& l) {
    return {{"source_epsilon", l.source_epsilon},
            {"initial_velocity", to_json(l.initial_velocity)},
            {"initial_velocity_error", l.initial_velocity_error},
            {"verified", l.verified}};
}

inline nlohmann::json to_json(const InstabilityCertificate& c) {
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& e : c.evidence)
        ev.push_back({{"member", e.member},
                      {"epsilon", e.epsilon},
                      {"initial_speed", e.initial_speed},
                      {"escape_time", e.escape_time},
                      {"physical_index", e.physical_index},
                      {"position", to_json(e.position)},
                      {"displacement", e.displacement},
                      {"rescaled_gap", e.rescaled_gap}});
    return {{"p", to_json(c.p)},
            {"R", c.R},
            {"tau_star", c.tau_star},
            {"tau_star_index", c.tau_star_index},
            {"threshold", c.threshold},
            {"tol_R", c.tol_R},
            {"gaps", c.gaps},
            {"j0", c.j0 ? nlohmann::json(*c.j0) : nlohmann::json(nullptr)},
            {"evidence", ev},
            {"verdict", to_string(c.verdict)},
            {"reason", c.reason}};
}

inline nlohmann::json to_json(const Lemma3Report& r) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : r.members)
        members.push_back({{"epsilon", m.epsilon},
                           {"sup_r", m.sup_r},
                           {"r_bound", m.r_bound},
                           {"max_rate", m.max_rate},
                           {"r_ok", m.r_ok},
                           {"rate_ok", m.rate_ok}});
    return {{"members", members},
            {"m_estimate", r.m_estimate},
            {"rate_bound", r.rate_bound},
            {"slack", r.slack},
            {"r_monotone", r.r_monotone},
            {"pass", r.pass}};
}

inline nlohmann::json to_json(const Cor4Report& r) {
    return {{"C", r.C},
            {"member_max", r.member_max},
            {"ratio", number(r.ratio)},
            {"factor", r.factor},
            {"excluded_samples", r.excluded_samples},
            {"uniform", r.uniform}};
}

inline nlohmann::json to_json(const BoundedOrbitReport& r) {
    nlohmann::json orbits = nlohmann::json::array();
    for (const auto& o : r.orbits)
        orbits.push_back({{"x0", o.x0},
                          {"v0", o.v0},
                          {"energy", o.energy},
                          {"min_x", o.min_x},
                          {"max_x", o.max_x},
                          {"max_transverse", o.max_transverse},
                          {"energy_drift", o.energy_drift},
                          {"inside", o.inside}});
    return {{"potential", r.potential},
            {"barrier",
             {{"left", r.barrier.left},
              {"right", r.barrier.right},
              {"height", r.barrier.height},
              {"radius", r.barrier.radius},
              {"scan_points", r.barrier.scan_points}}},
            {"t_end", r.t_end},
            {"orbits", orbits},
            {"all_inside", r.all_inside}};
}

inline nlohmann::json to_json(const RegularityReport& r) {
    return {{"min_gradient_norm", number(r.min_gradient_norm)},
            {"argmin", r.argmin.size() ? to_json(r.argmin) : nlohmann::json(nullptr)},
            {"projected", r.projected.size()},
            {"seeds_reaching_critical", r.seeds_reaching_critical},
            {"tolerance", r.tolerance},
            {"pass", r.pass}};
}

// ---------------------------------------------------------------------------
// SVG

/// Minimal line plot written straight to SVG text. Coordinates are printed with fixed
/// precision so the bytes depend only on the data.
class SvgPlot {
public:
    struct Series {
        std::vector<double> x;
        std::vector<double> y;
        std::string color;
        std::string label;
        bool markers = false;
    };

    SvgPlot(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    SvgPlot& log_x(bool on = true) { log_x_ = on; return *this; }
    SvgPlot& log_y(bool on = true) { log_y_ = on; return *this; }
    SvgPlot& equal_aspect(bool on = true) { equal_ = on; return *this; }

    void add(Series s) { series_.push_back(std::move(s)); }

    std::string render() const {
        constexpr double W = 640, H = 480, L = 70, R = 20, T = 40, B = 60;
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (const auto& s : series_)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!usable(s.x[i], log_x_) || !usable(s.y[i], log_y_)) continue;
                const double px = tx(s.x[i]), py = ty(s.y[i]);
                x0 = std::min(x0, px); x1 = std::max(x1, px);
                y0 = std::min(y0, py); y1 = std::max(y1, py);
            }
        if (x0 > x1) { x0 = 0; x1 = 1; y0 = 0; y1 = 1; }
        if (x1 - x0 < 1e-300) { x0 -= 0.5; x1 += 0.5; }
        if (y1 - y0 < 1e-300) { y0 -= 0.5; y1 += 0.5; }
        double sx = (W - L - R) / (x1 - x0), sy = (H - T - B) / (y1 - y0);
        if (equal_) sx = sy = std::min(sx, sy);
        auto X = [&](double v) { return L + (tx(v) - x0) * sx; };
        auto Y = [&](double v) { return H - B - (ty(v) - y0) * sy; };

        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(W) << "\" height=\"" << fmt(H)
           << "\" viewBox=\"0 0 " << fmt(W) << ' ' << fmt(H) << "\">\n";
        os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        os << "<text x=\"" << fmt(W / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title_)
           << "</text>\n";
        os << "<rect x=\"" << fmt(L) << "\" y=\"" << fmt(T) << "\" width=\"" << fmt(W - L - R) << "\" height=\""
           << fmt(H - T - B) << "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
            const double px = L + (fx - x0) * sx, py = H - B - (fy - y0) * sy;
            os << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(H - B + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
               << tick(fx, log_x_) << "</text>\n";
            os << "<text x=\"" << fmt(L - 6) << "\" y=\"" << fmt(py + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
               << tick(fy, log_y_) << "</text>\n";
        }
        os << "<text x=\"" << fmt(W / 2) << "\" y=\"" << fmt(H - 16) << "\" text-anchor=\"middle\" font-size=\"13\">"
           << escape(x_label_) << "</text>\n";
        os << "<text x=\"16\" y=\"" << fmt(H / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
           << fmt(H / 2) << ")\">" << escape(y_label_) << "</text>\n";
        int row = 0;
        for (const auto& s : series_) {
            os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!usable(s.x[i], log_x_) || !usable(s.y[i], log_y_)) continue;
                os << (first ? "" : " ") << fmt(X(s.x[i])) << ',' << fmt(Y(s.y[i]));
                first = false;
            }
            os << "\"/>\n";
            if (s.markers)
                for (std::size_t i = 0; i < s.x.size(); ++i)
                    if (usable(s.x[i], log_x_) && usable(s.y[i], log_y_))
                        os << "<circle cx=\"" << fmt(X(s.x[i])) << "\" cy=\"" << fmt(Y(s.y[i])) << "\" r=\"3\" fill=\""
                           << s.color << "\"/>\n";
            if (!s.label.empty()) {
                const double ly = T + 16 + 16 * row++;
                os << "<line x1=\"" << fmt(W - R - 150) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(W - R - 130)
                   << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
                os << "<text x=\"" << fmt(W - R - 125) << "\" y=\"" << fmt(ly) << "\" font-size=\"11\">" << escape(s.label)
                   << "</text>\n";
            }
        }
        os << "</svg>\n";
        return os.str();
    }

private:
    static bool usable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }
    double tx(double v) const { return log_x_ ? std::log10(v) : v; }
    double ty(double v) const { return log_y_ ? std::log10(v) : v; }

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return buf;
    }
    static std::string tick(double v, bool log) {
        char buf[32];
        if (log) std::snprintf(buf, sizeof buf, "1e%.1f", v);
        else std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }
    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else if (c == '&') out += "&amp;";
            else out += c;
        }
        return out;
    }

    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
    bool log_x_ = false, log_y_ = false, equal_ = false;
};

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[i % 10];
}

}  // namespace lyap::io
