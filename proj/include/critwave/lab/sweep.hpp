#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "critwave/lab/scenarios.hpp"

namespace critwave::lab {

struct SweepAxis {
    std::string key;
    std::vector<double> values;
};

/// Parses `key=start:stop:step`; stop is included up to rounding.
inline SweepAxis parse_axis(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigIssues({"--axis '" + text + "': expected key=start:stop:step"});
    SweepAxis ax{detail::trim(text.substr(0, eq)), {}};
    const auto parts = detail::split(text.substr(eq + 1), ':');
    std::vector<double> nums;
    for (const auto& p : parts)
        if (auto v = detail::parse_real(p))
            nums.push_back(*v);
    if (parts.size() != 3 || nums.size() != 3)
        throw ConfigIssues({"--axis '" + text + "': expected three numbers start:stop:step"});
    const double start = nums[0], stop = nums[1], step = nums[2];
    if (!(step > 0.0) || stop < start)
        throw ConfigIssues({"--axis '" + text + "': need step > 0 and stop >= start"});
    if (!detail::find_key(ax.key))
        throw ConfigIssues({"--axis: unknown key '" + ax.key + "'"});
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (n > 10000)
        throw ConfigIssues({"--axis '" + text + "': more than 10000 members"});
    for (std::size_t k = 0; k < n; ++k)
        ax.values.push_back(start + static_cast<double>(k) * step);
    return ax;
}

struct SweepMember {
    double value = 0.0;
    std::filesystem::path dir;
    RunManifest manifest;
};

struct SweepResult {
    SweepAxis axis;
    std::vector<SweepMember> members;

    RunStatus worst() const
    {
        RunStatus w = RunStatus::ok;
        for (const auto& m : members)
            if (exit_code(m.manifest.status) > exit_code(w))
                w = m.manifest.status;
        return w;
    }
};

inline std::string member_name(std::size_t k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "member_%03zu", k);
    return buf;
}

/// Runs one member per axis value, each single-threaded, into out/member_XXX,
/// and writes out/sweep.csv. Every member is validated before any runs.
inline SweepResult run_sweep(const ScenarioConfig& base, const SweepAxis& axis, const std::filesystem::path& out,
                             unsigned workers = worker_count())
{
    SweepResult res{axis, {}};
    std::vector<ScenarioConfig> cfgs;
    std::vector<std::string> issues;
    for (std::size_t k = 0; k < axis.values.size(); ++k) {
        const auto dir = out / member_name(k);
        try {
            cfgs.push_back(base.with(axis.key, format_double(axis.values[k])).with("output.dir", dir.string()));
        } catch (const ConfigIssues& e) {
            for (const auto& i : e.issues())
                issues.push_back(member_name(k) + ": " + i);
        }
        res.members.push_back({axis.values[k], dir, {}});
    }
    if (!issues.empty())
        throw ConfigIssues(issues);

    parallel_for(cfgs.size(), workers, [&](std::size_t k) {
        auto& m = res.members[k].manifest;
        try {
            m = run_scenario(cfgs[k], 1);
        } catch (const std::exception& e) {
            m.scenario = cfgs[k].scenario();
            m.seed = cfgs[k].seed();
            m.status = RunStatus::runtime_failure;
            m.error = e.what();
        }
    });

    std::set<std::string> columns;
    for (const auto& m : res.members)
        for (const auto& [k, v] : m.manifest.summary)
            columns.insert(k);
    std::filesystem::create_directories(out);
    std::ofstream os(out / "sweep.csv");
    if (!os)
        throw Error("cannot write " + (out / "sweep.csv").string());
    os << "member," << axis.key << ",status,exit_code";
    for (const auto& c : columns)
        os << ',' << c;
    os << '\n';
    for (std::size_t k = 0; k < res.members.size(); ++k) {
        const auto& m = res.members[k].manifest;
        os << member_name(k) << ',' << format_double(res.members[k].value) << ',' << to_string(m.status) << ','
           << exit_code(m.status);
        for (const auto& c : columns) {
            const auto it = m.summary.find(c);
            std::string v = it == m.summary.end() ? "" : it->second;
            if (v.find_first_of(",\"") != std::string::npos)
                v = '"' + v + '"';
            os << ',' << v;
        }
        os << '\n';
    }
    return res;
}

} // namespace critwave::lab
