#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "critwave/lab.hpp"

namespace fs = std::filesystem;
using namespace critwave;
using namespace critwave::lab;

namespace {

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("critwave_test_lab_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<std::string> issues_of(const std::string& text)
{
    try {
        ScenarioConfig::from_string(text);
    } catch (const ConfigIssues& e) {
        return e.issues();
    }
    return {};
}

bool mentions(const std::vector<std::string>& issues, const std::string& key)
{
    for (const auto& i : issues)
        if (i.rfind(key, 0) == 0)
            return true;
    return false;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int cli(const std::string& args)
{
    const int rc = std::system((std::string(CRITWAVE_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST(Config, EmptyConfigNamesTheRequiredKey)
{
    const auto issues = issues_of("");
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_TRUE(mentions(issues, "scenario.name"));
    EXPECT_NE(issues[0].find("static-w"), std::string::npos);
}

TEST(Config, EveryBadKeyIsReported)
{
    const auto issues = issues_of("[scenario]\nname = static-w\n"
                                  "[solver]\nh = -1\ncfl = 2\nmode = quartic\n"
                                  "[checks]\nenergy_rel = x\n"
                                  "[bogus]\nkey = 1\n");
    EXPECT_TRUE(mentions(issues, "solver.h"));
    EXPECT_TRUE(mentions(issues, "solver.cfl"));
    EXPECT_TRUE(mentions(issues, "solver.mode"));
    EXPECT_TRUE(mentions(issues, "checks.energy_rel"));
    EXPECT_TRUE(mentions(issues, "bogus.key"));
    EXPECT_GE(issues.size(), 5u);
}

TEST(Config, CrossChecks)
{
    EXPECT_TRUE(mentions(issues_of("[scenario]\nname = static-w\n[solver]\nh = 0.5\nr_max = 2\n"), "solver.h"));
    EXPECT_TRUE(mentions(issues_of("[scenario]\nname = static-w\n[data]\nkind = file\n"), "data.file"));
    EXPECT_TRUE(mentions(issues_of("[scenario]\nname = static-w\n[data]\nshells = 1:0\n"), "data.shells"));
    EXPECT_TRUE(mentions(issues_of("[scenario]\nname = static-w\n[data]\nbubbles = 2:1\n"), "data.bubbles"));
    EXPECT_TRUE(
        mentions(issues_of("[scenario]\nname = global-bubble\n[radiation]\nt_probe = 500\n"), "radiation.t_probe"));
}

TEST(Config, KeyOutsideSectionIsRejected)
{
    EXPECT_FALSE(issues_of("name = static-w\n").empty());
}

TEST(Config, ScenarioDefaultsThenGivenValues)
{
    const auto cfg = ScenarioConfig::from_string("[scenario]\nname = self-similar-probe\n[solver]\nt_max = 7\n");
    EXPECT_DOUBLE_EQ(cfg.real("solver.h"), 0.0025);
    EXPECT_DOUBLE_EQ(cfg.real("solver.t_max"), 7.0);
    EXPECT_DOUBLE_EQ(cfg.real("solver.cfl"), 0.5);
    EXPECT_EQ(cfg.with("scenario.seed", "9").seed(), 9u);
    EXPECT_THROW(cfg.with("solver.cfl", "0.9"), ConfigIssues);
}

TEST(Config, EchoRoundTrips)
{
    const auto cfg = ScenarioConfig::from_string("[scenario]\nname = trichotomy\nseed = 4\n");
    const auto again = ScenarioConfig::from_string(cfg.echo());
    EXPECT_EQ(again.values(), cfg.values());
}

TEST(Sweep, AxisParsing)
{
    const auto ax = parse_axis("solver.h=0.01:0.04:0.01");
    EXPECT_EQ(ax.key, "solver.h");
    ASSERT_EQ(ax.values.size(), 4u);
    EXPECT_NEAR(ax.values.back(), 0.04, 1e-15);
    EXPECT_THROW(parse_axis("solver.h"), ConfigIssues);
    EXPECT_THROW(parse_axis("solver.h=1:0:1"), ConfigIssues);
    EXPECT_THROW(parse_axis("solver.h=0:1:0"), ConfigIssues);
    EXPECT_THROW(parse_axis("solver.nope=0:1:1"), ConfigIssues);
}

TEST(Run, StaticGroundStateManifest)
{
    const auto dir = scratch("static");
    const auto cfg = ScenarioConfig::from_pairs({{"scenario.name", "static-w"}, {"output.dir", dir.string()}});
    const auto m = run_scenario(cfg, 1);
    EXPECT_EQ(m.status, RunStatus::ok) << m.error;
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    for (const auto& a : m.artifacts)
        EXPECT_TRUE(fs::exists(dir / a)) << a;
    const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["scenario"], "static-w");
    EXPECT_TRUE(j["calibration"]["c"]["value"].is_null());
    EXPECT_NEAR(j["calibration"]["c0"]["value"].get<double>(), kFluxConstant, 1e-15);
    EXPECT_EQ(j["terminations"][0]["kind"], "reached-max-time");
    EXPECT_GT(j["steps"].get<double>(), 0.0);
}

TEST(Run, TrichotomyLabels)
{
    const auto res = run_verify("trichotomy", scratch("trichotomy"), 1, 2);
    ASSERT_EQ(res.size(), 1u);
    const auto& m = res[0].manifest;
    EXPECT_EQ(m.status, RunStatus::ok) << m.error;
    EXPECT_EQ(m.summary.at("branch"), "scatter;blow-up");
    EXPECT_EQ(m.summary.at("predicted"), "scatter;blow-up");
}

TEST(Run, ArtifactsAreDeterministic)
{
    const auto a = scratch("det_a"), b = scratch("det_b");
    for (const auto& dir : {a, b}) {
        auto cfg = ScenarioConfig::from_pairs({{"scenario.name", "lemma-suite"},
                                               {"lemma.hardy_corpus", "10"},
                                               {"lemma.pointwise_corpus", "10"},
                                               {"lemma.coercivity_corpus", "20"},
                                               {"lemma.fresh", "5"},
                                               {"scenario.seed", "7"},
                                               {"output.dir", dir.string()}});
        run_scenario(cfg, dir == a ? 1 : 4);
    }
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().filename() == "manifest.json")
            continue;
        EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
        ++compared;
    }
    EXPECT_GE(compared, 3u);
}

TEST(Run, RuntimeFailureKeepsPartialArtifacts)
{
    const auto dir = scratch("broken");
    const auto bad = dir / "bad.snap";
    std::ofstream(bad) << "not a snapshot\n";
    const auto cfg = ScenarioConfig::from_pairs({{"scenario.name", "static-w"},
                                                 {"data.kind", "file"},
                                                 {"data.file", bad.string()},
                                                 {"output.dir", (dir / "out").string()}});
    const auto m = run_scenario(cfg, 1);
    EXPECT_EQ(m.status, RunStatus::runtime_failure);
    EXPECT_FALSE(m.error.empty());
    EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "out" / "config.ini"));
}

TEST(Run, MissingDataFileIsAConfigError)
{
    const auto cfg = ScenarioConfig::from_pairs(
        {{"scenario.name", "static-w"}, {"data.kind", "file"}, {"data.file", "/nonexistent/critwave.snap"}});
    EXPECT_THROW(run_scenario(cfg, 1), ConfigIssues);
}

TEST(Run, SnapshotFileAsInitialData)
{
    const auto dir = scratch("file_data");
    const auto first = ScenarioConfig::from_pairs({{"scenario.name", "static-w"}, {"output.dir", (dir / "a").string()}});
    run_scenario(first, 1);
    const auto second = ScenarioConfig::from_pairs({{"scenario.name", "static-w"},
                                                    {"data.kind", "file"},
                                                    {"data.file", (dir / "a" / "final.snap").string()},
                                                    {"output.dir", (dir / "b").string()}});
    const auto m = run_scenario(second, 1);
    EXPECT_EQ(m.status, RunStatus::ok) << m.error;
}

TEST(Sweep, MembersAreIsolated)
{
    const auto dir = scratch("sweep");
    const auto base = ScenarioConfig::from_pairs({{"scenario.name", "global-bubble"}, {"decomposition.times", ""}});
    const auto res = run_sweep(base, parse_axis("solver.r_max=40:70:30"), dir, 2);
    ASSERT_EQ(res.members.size(), 2u);
    EXPECT_EQ(res.members[0].manifest.status, RunStatus::invariant_failure);
    EXPECT_EQ(res.members[1].manifest.status, RunStatus::ok) << res.members[1].manifest.error;
    EXPECT_EQ(res.worst(), RunStatus::invariant_failure);
    EXPECT_TRUE(fs::exists(dir / "member_000" / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "member_001" / "radiation.csv"));
    const auto csv = slurp(dir / "sweep.csv");
    EXPECT_NE(csv.find("member_000,40,invariant-failure,1"), std::string::npos);
    EXPECT_NE(csv.find("member_001,70,ok,0"), std::string::npos);
}

TEST(Sweep, InvalidMemberRejectsTheWholeSweep)
{
    const auto base = ScenarioConfig::from_pairs({{"scenario.name", "static-w"}});
    EXPECT_THROW(run_sweep(base, parse_axis("solver.cfl=0.5:1:0.25"), scratch("sweep_bad"), 1), ConfigIssues);
}

TEST(Cli, ExitCodes)
{
    const auto dir = scratch("cli");
    std::ofstream(dir / "empty.ini") << "";
    std::ofstream(dir / "static.ini") << "[scenario]\nname = static-w\n";
    std::ofstream(dir / "broken.ini") << "[scenario]\nname = static-w\n[data]\nkind = file\nfile = "
                                      << (dir / "empty.ini").string() << "\n";
    EXPECT_EQ(cli("run " + (dir / "empty.ini").string()), 2);
    EXPECT_EQ(cli("run " + (dir / "missing.ini").string()), 2);
    EXPECT_EQ(cli("run " + (dir / "static.ini").string() + " --out " + (dir / "ok").string()), 0);
    EXPECT_EQ(cli("run " + (dir / "broken.ini").string() + " --out " + (dir / "rt").string()), 3);
    EXPECT_EQ(cli("sweep " + (dir / "static.ini").string() + " --axis bad"), 2);
    EXPECT_EQ(cli("verify nonsense"), 2);
    EXPECT_EQ(cli("verify channels --out " + (dir / "ch").string()), 1);
}
