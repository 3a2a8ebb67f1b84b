#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "critwave/evolution.hpp"
#include "critwave/lab/config.hpp"
#include "critwave/lightcone.hpp"
#include "critwave/snapshot_io.hpp"

namespace critwave::lab {

enum class RunStatus { ok, invariant_failure, runtime_failure };

inline const char* to_string(RunStatus s) noexcept
{
    switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::invariant_failure: return "invariant-failure";
    case RunStatus::runtime_failure: return "runtime-failure";
    }
    return "?";
}

/// CLI exit code for a finished run.
inline int exit_code(RunStatus s) noexcept
{
    switch (s) {
    case RunStatus::ok: return 0;
    case RunStatus::invariant_failure: return 1;
    case RunStatus::runtime_failure: return 3;
    }
    return 3;
}

struct Invariant {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double bound = 0.0;
    std::string detail;
};

struct Calibrated {
    std::optional<double> value;
    std::string provenance;
};

struct TerminationEntry {
    std::string label;
    TerminationRecord record;
};

struct RunManifest {
    std::string scenario;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    RunStatus status = RunStatus::ok;
    std::string error;
    std::vector<Invariant> invariants;
    /// Scalar results, also the columns of sweep summaries.
    std::map<std::string, std::string> summary;
    Calibrated c{std::nullopt, "not computed in this run"};
    Calibrated c_l{std::nullopt, "not computed in this run"};
    Calibrated c0{kFluxConstant, "default 1/sqrt(2)"};
    Calibrated alpha0{std::nullopt, "not computed in this run"};
    std::vector<TerminationEntry> terminations;
    std::vector<std::string> artifacts;
    std::size_t steps = 0;
    double wall_clock_s = 0.0;

    bool all_passed() const
    {
        for (const auto& i : invariants)
            if (!i.passed)
                return false;
        return true;
    }

    void check(std::string name, bool passed, double value, double bound, std::string detail = {})
    {
        invariants.push_back({std::move(name), passed, value, bound, std::move(detail)});
    }

    void record(std::string label, const Trajectory& tr)
    {
        steps += tr.termination.steps;
        terminations.push_back({std::move(label), tr.termination});
    }
};

inline nlohmann::json to_json(const Calibrated& c)
{
    nlohmann::json j;
    j["value"] = c.value ? nlohmann::json(*c.value) : nlohmann::json(nullptr);
    j["provenance"] = c.provenance;
    return j;
}

inline nlohmann::json to_json(const RunManifest& m)
{
    nlohmann::json j;
    j["scenario"] = m.scenario;
    j["seed"] = m.seed;
    j["config"] = m.config;
    j["status"] = to_string(m.status);
    if (!m.error.empty())
        j["error"] = m.error;
    auto& inv = j["invariants"] = nlohmann::json::array();
    for (const auto& i : m.invariants)
        inv.push_back({{"name", i.name}, {"passed", i.passed}, {"value", i.value}, {"bound", i.bound},
                       {"detail", i.detail}});
    j["summary"] = m.summary;
    j["calibration"] = {{"c", to_json(m.c)}, {"C_L", to_json(m.c_l)}, {"c0", to_json(m.c0)},
                        {"alpha0", to_json(m.alpha0)}};
    auto& term = j["terminations"] = nlohmann::json::array();
    for (const auto& t : m.terminations)
        term.push_back({{"label", t.label},
                        {"kind", to_string(t.record.kind)},
                        {"last_stable_time", t.record.last_stable_time},
                        {"flag_time", t.record.flag_time},
                        {"steps", t.record.steps}});
    j["artifacts"] = m.artifacts;
    j["steps"] = m.steps;
    j["wall_clock_s"] = m.wall_clock_s;
    return j;
}

/// Writes artifact files under one directory and lists them in the manifest.
/// Everything except manifest.json is a pure function of config and seed.
class ArtifactSink {
public:
    ArtifactSink(std::filesystem::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest)
    {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

    std::ofstream open(const std::string& name)
    {
        std::ofstream os(dir_ / name);
        if (!os)
            throw Error("cannot write " + (dir_ / name).string());
        manifest_.artifacts.push_back(name);
        return os;
    }

    void json(const std::string& name, const nlohmann::json& j) { open(name) << j.dump(2) << '\n'; }

    void snapshot(const std::string& name, const RadialState& s)
    {
        auto os = open(name);
        write_snapshot(os, s);
    }

    /// Header line then rows of doubles in shortest round-trip form.
    void csv(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<double>>& rows)
    {
        auto os = open(name);
        for (std::size_t k = 0; k < header.size(); ++k)
            os << (k ? "," : "") << header[k];
        os << '\n';
        for (const auto& row : rows) {
            for (std::size_t k = 0; k < row.size(); ++k)
                os << (k ? "," : "") << format_double(row[k]);
            os << '\n';
        }
    }

private:
    std::filesystem::path dir_;
    RunManifest& manifest_;
};

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m)
{
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "manifest.json");
    if (!os)
        throw Error("cannot write " + (dir / "manifest.json").string());
    os << to_json(m).dump(2) << '\n';
}

} // namespace critwave::lab
