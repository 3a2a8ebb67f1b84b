#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "critwave/lab/scenarios.hpp"

namespace critwave::lab {

/// Reduced-size configurations, one per suite.
inline const std::map<std::string, std::map<std::string, std::string>>& verify_suites()
{
    static const std::map<std::string, std::map<std::string, std::string>> suites{
        {"static-w", {{"scenario.name", "static-w"}}},
        {"linear-oracle", {{"scenario.name", "standing-wave-convergence"}}},
        {"trichotomy",
         {{"scenario.name", "trichotomy"},
          {"solver.h", "0.02"},
          {"solver.r_max", "80"},
          {"solver.t_max", "30"}}},
        {"channels",
         {{"scenario.name", "channels"},
          {"channels.corpus_size", "4"},
          {"channels.h", "0.04"},
          {"channels.search_h", "0.04"},
          {"channels.shell_centers", "0"},
          {"channels.shell_widths", "1"},
          {"channels.bridge_outer", "5"}}},
        {"self-similar",
         {{"scenario.name", "self-similar-probe"}, {"solver.h", "0.005"}, {"solver.snapshot_interval", "0.02"}}},
        {"global-bubble", {{"scenario.name", "global-bubble"}}},
        {"decomposition", {{"scenario.name", "decomposition-demo"}}},
        {"lemma",
         {{"scenario.name", "lemma-suite"},
          {"lemma.hardy_corpus", "20"},
          {"lemma.pointwise_corpus", "40"},
          {"lemma.coercivity_corpus", "100"},
          {"lemma.fresh", "20"}}},
    };
    return suites;
}

inline std::vector<std::string> verify_suite_names()
{
    std::vector<std::string> out;
    for (const auto& [name, cfg] : verify_suites())
        out.push_back(name);
    out.push_back("all");
    return out;
}

struct VerifyOutcome {
    std::string suite;
    RunManifest manifest;
};

/// Runs `suite` (or every suite for "all") into out/<suite>.
inline std::vector<VerifyOutcome> run_verify(const std::string& suite, const std::filesystem::path& out,
                                             std::uint64_t seed = 1, unsigned workers = worker_count())
{
    const auto& suites = verify_suites();
    std::vector<std::string> names;
    if (suite == "all") {
        for (const auto& [name, cfg] : suites)
            names.push_back(name);
    } else if (suites.count(suite)) {
        names.push_back(suite);
    } else {
        std::string known;
        for (const auto& n : verify_suite_names())
            known += (known.empty() ? "" : ", ") + n;
        throw ConfigIssues({"unknown suite '" + suite + "'; one of " + known});
    }
    std::vector<VerifyOutcome> res;
    for (const auto& name : names) {
        auto given = suites.at(name);
        given["scenario.seed"] = std::to_string(seed);
        given["output.dir"] = (out / name).string();
        res.push_back({name, run_scenario(ScenarioConfig::from_pairs(given), workers)});
    }
    return res;
}

inline RunStatus worst_status(const std::vector<VerifyOutcome>& v)
{
    RunStatus w = RunStatus::ok;
    for (const auto& o : v)
        if (exit_code(o.manifest.status) > exit_code(w))
            w = o.manifest.status;
    return w;
}

} // namespace critwave::lab
