#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lyap/lyap.hpp"

using namespace lyap;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json ellipsoid_doc() {
    return json::parse(R"({
        "potential": {"kind": "ellipsoid"},
        "p": [1, 0, 0],
        "v": [0, 1, 0],
        "horizon": 0.5
    })");
}

json circle_doc() {
    return json::parse(R"({
        "potential": {"kind": "circle", "params": {"radius": 1}},
        "p": [1, 0],
        "v": [0, 1],
        "schedule": {"eps0": 0.1, "ratio": 0.5, "count": 6}
    })");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lyap_test_" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST(ParseScenario, EllipsoidValid) {
    const auto sf = scenario_from_json(ellipsoid_doc());
    EXPECT_EQ(sf.scenario.p.size(), 3);
    EXPECT_FALSE(sf.p_snapped);
    EXPECT_DOUBLE_EQ(sf.scenario.horizon, 0.5);
    EXPECT_EQ(sf.scenario.count, 6);
    EXPECT_DOUBLE_EQ(sf.scenario.eps0, 0.1);
    EXPECT_EQ(sf.scenario.integrator.samples, 401);
}

TEST(ParseScenario, SnapsNearbyBasePoint) {
    auto doc = ellipsoid_doc();
    doc["p"] = {1.000001, 0, 0};
    const auto sf = scenario_from_json(doc);
    EXPECT_TRUE(sf.p_snapped);
    EXPECT_LE(std::abs(sf.scenario.potential.field().value(sf.scenario.p)), 1e-12);
    EXPECT_NEAR(sf.scenario.p[0], 1.0, 1e-12);
}

TEST(ParseScenario, RejectsFarBasePoint) {
    auto doc = ellipsoid_doc();
    doc["p"] = {1.01, 0, 0};
    try {
        scenario_from_json(doc);
        FAIL();
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.field(), "p");
    }
}

TEST(ParseScenario, RejectsNormalVelocity) {
    auto doc = ellipsoid_doc();
    doc["v"] = {1, 0, 0};
    try {
        scenario_from_json(doc);
        FAIL();
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.field(), "v");
        EXPECT_NE(std::string(e.what()).find("tangent"), std::string::npos);
    }
}

TEST(ParseScenario, ProjectsNearlyTangentVelocity) {
    auto doc = ellipsoid_doc();
    doc["v"] = {1e-8, 1, 0};
    const auto sf = scenario_from_json(doc);
    EXPECT_EQ(sf.scenario.v[0], 0.0);
}

TEST(ParseScenario, RejectsZeroVelocityAndUnknownFields) {
    auto doc = ellipsoid_doc();
    doc["v"] = {0, 0, 0};
    EXPECT_THROW(scenario_from_json(doc), ScenarioError);
    doc = ellipsoid_doc();
    doc["horizn"] = 1;
    try {
        scenario_from_json(doc);
        FAIL();
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.field(), "horizn");
    }
    doc = ellipsoid_doc();
    doc["schedule"] = {{"ratio", 1.5}};
    EXPECT_THROW(scenario_from_json(doc), ScenarioError);
    doc = ellipsoid_doc();
    doc["potential"]["kind"] = "nope";
    EXPECT_THROW(scenario_from_json(doc), ScenarioError);
}

TEST(ParseScenario, ParseErrorHasLine) {
    const std::string text = "{\n  \"p\": [1, 0],\n  \"v\": [0, 1],,\n}\n";
    try {
        parse_scenario_text(text);
        FAIL();
    } catch (const ScenarioError& e) {
        EXPECT_EQ(e.line(), 3);
    }
}

TEST(ParseScenario, ShippedScenariosLoad) {
    for (const char* name : {"circle", "gutter", "ellipsoid"})
        EXPECT_NO_THROW(parse_scenario(fs::path(LYAP_SCENARIO_DIR) / (std::string(name) + ".json"))) << name;
    EXPECT_THROW(parse_scenario("/nonexistent/scenario.json"), ScenarioError);
}

TEST(Io, NumbersUseSeventeenDigits) {
    EXPECT_EQ(io::format_number(0.1), "0.10000000000000001");
    EXPECT_EQ(io::format_number(-2.0), "-2");
}

TEST(Pipeline, CircleUnstableWithAllArtifacts) {
    const auto dir = scratch("circle");
    const auto res = run_pipeline(scenario_from_json(circle_doc()), {dir, 2, true, PipelineStop::certify});
    EXPECT_EQ(res.run.exit_code, 0);
    EXPECT_EQ(res.run.verdict, "UNSTABLE");
    for (const auto& f : res.run.manifest) EXPECT_TRUE(fs::exists(dir / f)) << f;
    for (int j = 0; j < 6; ++j) {
        EXPECT_TRUE(fs::exists(dir / ("traj_eps" + std::to_string(j) + ".csv")));
        EXPECT_TRUE(fs::exists(dir / ("coords_eps" + std::to_string(j) + ".csv")));
    }
    for (const char* f : {"limit.csv", "report.json", "figures/trajectories.svg", "figures/convergence.svg",
                          "figures/violation.svg"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;

    const auto [head, rows] = io::read_csv(dir / "traj_eps0.csv");
    EXPECT_EQ(head, (std::vector<std::string>{"tau", "x0", "x1", "v0", "v1", "H"}));
    EXPECT_EQ(rows.size(), 401u);
    EXPECT_EQ(io::read_csv(dir / "coords_eps2.csv").first, (std::vector<std::string>{"tau", "r", "y1"}));
    EXPECT_EQ(io::read_csv(dir / "limit.csv").first, (std::vector<std::string>{"tau", "x0", "x1"}));

    const auto report = json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(report["verdict"], "UNSTABLE");
    EXPECT_NEAR(report["certificate"]["R"].get<double>(), 2 * std::sin(0.5), 2e-2);
    EXPECT_TRUE(report["convergence"]["cauchy"].get<bool>());
    fs::remove_all(dir);
}

TEST(Pipeline, Determinism) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const auto sf = scenario_from_json(circle_doc());
    run_pipeline(sf, {a, 1, true, PipelineStop::certify});
    run_pipeline(sf, {b, 3, true, PipelineStop::certify});
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file() || entry.path().filename() == "run.json") continue;
        const auto rel = fs::relative(entry.path(), a);
        EXPECT_EQ(slurp(entry.path()), slurp(b / rel)) << rel;
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Pipeline, GutterExitsZeroWithStraightLimit) {
    const auto dir = scratch("gutter");
    auto doc = json::parse(R"({"potential": {"kind": "gutter"}, "p": [0, 0], "v": [0, 1]})");
    const auto res = run_pipeline(scenario_from_json(doc), {dir, 1, false, PipelineStop::certify});
    EXPECT_EQ(res.run.exit_code, 0);
    ASSERT_TRUE(res.limit.has_value());
    for (std::size_t i = 0; i < res.limit->tau.size(); ++i) {
        EXPECT_LE(std::abs(res.limit->x[i][0]), 1e-12);
        EXPECT_NEAR(res.limit->x[i][1], res.limit->tau[i], 1e-10);
    }
    EXPECT_FALSE(fs::exists(dir / "figures"));
    fs::remove_all(dir);
}

TEST(Pipeline, ShortScheduleIsIndeterminate) {
    const auto dir = scratch("short");
    auto doc = ellipsoid_doc();
    doc["schedule"] = {{"count", 4}};
    const auto res = run_pipeline(scenario_from_json(doc), {dir, 1, false, PipelineStop::certify});
    EXPECT_EQ(res.run.exit_code, 2);
    EXPECT_EQ(res.run.verdict, "INDETERMINATE");
    EXPECT_TRUE(fs::exists(dir / "report.json"));
    fs::remove_all(dir);
}

TEST(Pipeline, TooFewMembersIsError) {
    const auto dir = scratch("two");
    auto doc = circle_doc();
    doc["schedule"]["count"] = 2;
    const auto res = run_pipeline(scenario_from_json(doc), {dir, 1, false, PipelineStop::certify});
    EXPECT_EQ(res.run.exit_code, 1);
    ASSERT_NE(res.run.stage("limit"), nullptr);
    EXPECT_EQ(res.run.stage("limit")->status, "failed");
    fs::remove_all(dir);
}

TEST(Pipeline, FamilyStopWritesTrajectoriesOnly) {
    const auto dir = scratch("family");
    const auto res = run_pipeline(scenario_from_json(circle_doc()), {dir, 1, false, PipelineStop::family});
    EXPECT_EQ(res.run.exit_code, 0);
    EXPECT_TRUE(fs::exists(dir / "traj_eps5.csv"));
    EXPECT_FALSE(fs::exists(dir / "limit.csv"));
    fs::remove_all(dir);
}

TEST(Gallery, PainleveBoundedOrbits) {
    ContrastOptions opts;
    opts.t_end = 100.0;
    const auto rep = bounded_orbit_demo(std::get<PlainPotential>(gallery_lookup("painleve")), opts);
    EXPECT_TRUE(rep.all_inside);
    EXPECT_EQ(rep.orbits.size(), 10u);
    EXPECT_LT(rep.barrier.left, 0.0);
    EXPECT_GT(rep.barrier.right, 0.0);
    for (const auto& o : rep.orbits) EXPECT_LT(o.energy, rep.barrier.height);
}

TEST(Gallery, LaloyBoundedOrbits) {
    ContrastOptions opts;
    opts.t_end = 50.0;
    opts.trajectories = 4;
    const auto rep = bounded_orbit_demo(std::get<PlainPotential>(gallery_lookup("laloy")), opts);
    EXPECT_EQ(rep.orbits.size(), 4u);
    for (const auto& o : rep.orbits) EXPECT_GT(o.max_x, o.min_x);
}

TEST(Studies, PropertyCheckPassesOnGallery) {
    for (const char* name : {"circle", "ellipsoid"}) {
        auto doc = name == std::string("circle") ? circle_doc() : ellipsoid_doc();
        const auto pc = property_check(scenario_from_json(doc).scenario, 100);
        EXPECT_TRUE(pc.pass) << pc.report.dump();
    }
}
