#pragma once

// Scenario configuration: flat "section.key = value" pairs read from an
// INI file, checked against a schema with per-scenario defaults. Every key
// of the schema is resolved and echoed, so a config file only needs the
// values that differ from the defaults.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "critwave/errors.hpp"

namespace critwave::lab {

enum class Kind { real, integer, text, boolean, reals, choice };

struct KeySpec {
    std::string key;
    Kind kind = Kind::real;
    std::string fallback;
    double lo = -HUGE_VAL, hi = HUGE_VAL;
    /// Lower bound excluded.
    bool open_lo = false;
    std::vector<std::string> choices;
    std::string help;
};

inline const std::vector<std::string>& scenario_names()
{
    static const std::vector<std::string> names = {
        "trichotomy", "static-w",     "standing-wave-convergence", "channels", "self-similar-probe",
        "global-bubble", "decomposition-demo", "lemma-suite"};
    return names;
}

inline const std::vector<KeySpec>& schema()
{
    constexpr double inf = HUGE_VAL;
    static const std::vector<KeySpec> keys = {
        {"scenario.name", Kind::choice, "", 0, 0, false, scenario_names(), "experiment to run (required)"},
        {"scenario.seed", Kind::integer, "1", 0, 9.0e15, false, {}, "corpus seed"},

        {"data.kind", Kind::choice, "ground-state", 0, 0, false, {"ground-state", "bump", "superposition", "file"}, ""},
        {"data.amplitude", Kind::real, "1", -10, 10, false, {}, "a in a W_lambda"},
        {"data.scale", Kind::real, "1", 0, 1e3, true, {}, "lambda in a W_lambda"},
        {"data.shells", Kind::text, "0.5:0:1", 0, 0, false, {}, "amplitude:center:width, comma separated"},
        {"data.oscillation", Kind::real, "0", 0, 100, false, {}, "bump factor cos(k r)"},
        {"data.slot", Kind::choice, "position", 0, 0, false, {"position", "velocity"}, "bump placed in u or u_t"},
        {"data.bubbles", Kind::text, "1:0.05,-1:5", 0, 0, false, {}, "sign:scale, comma separated"},
        {"data.file", Kind::text, "", 0, 0, false, {}, "snapshot file (data.kind = file)"},

        {"solver.h", Kind::real, "0.01", 1e-4, 0.5, false, {}, "grid spacing"},
        {"solver.r_max", Kind::real, "100", 1, 1e4, false, {}, "outer radius"},
        {"solver.cfl", Kind::real, "0.5", 0, 0.85, true, {}, "dt / h"},
        {"solver.t_max", Kind::real, "10", 0, 1e4, true, {}, "final time"},
        {"solver.mode", Kind::choice, "cubic", 0, 0, false, {"cubic", "linear"}, ""},
        {"solver.snapshot_interval", Kind::real, "0.5", 0, 1e3, false, {}, "time between stored snapshots"},
        {"solver.blowup_factor", Kind::real, "1e6", 10, 1e12, false, {}, "blow-up flag level / sup|u_0|"},

        {"checks.energy_rel", Kind::real, "1e-3", 0, 1, true, {}, "energy drift bound"},
        {"checks.static_rel", Kind::real, "1e-3", 0, 1, true, {}, "H-distance bound / ||grad W||"},
        {"checks.min_order", Kind::real, "1.9", 0, 10, false, {}, "convergence order floor"},
        {"checks.slab_residual", Kind::real, "1e-3", 0, 1, true, {}, "multiplier slab residual bound"},

        {"trichotomy.amplitudes", Kind::reals, "0.8,1.2", -10, 10, false, {}, "a values for (a W, 0)"},
        {"trichotomy.window", Kind::real, "0.5", 0, 1, true, {}, "scattering probe from (1 - window) t_max"},

        {"standing.omega", Kind::real, "2", 0, 100, true, {}, "frequency of cos(w t) J1(w r)"},
        {"standing.periods", Kind::real, "5", 0, 1e3, true, {}, "length of the oracle run"},
        {"standing.h_list", Kind::reals, "0.04,0.02,0.01", 1e-4, 0.5, true, {}, "refinement family"},
        {"standing.r_max", Kind::real, "20", 1, 1e3, false, {}, ""},
        {"standing.multiplier_cfl", Kind::real, "0.25", 0, 0.85, true, {}, "dt / h of the multiplier family"},
        {"standing.multiplier_t_max", Kind::real, "1", 0, 1e3, true, {}, ""},

        {"channels.h", Kind::real, "0.02", 1e-3, 0.2, false, {}, "coarse grid; alpha_0 on h and h/2"},
        {"channels.corpus_size", Kind::integer, "20", 1, 1000, false, {}, "(f, 0) corpus members"},
        {"channels.search_h", Kind::real, "0.02", 1e-3, 0.2, false, {}, "grid of the (0, g) search"},
        {"channels.shell_centers", Kind::reals, "0,2", 0, 100, false, {}, ""},
        {"channels.shell_widths", Kind::reals, "0.5,1", 0, 100, true, {}, ""},
        {"channels.bridge_inner", Kind::reals, "0.2", 0, 100, true, {}, ""},
        {"channels.bridge_outer", Kind::reals, "5,20", 0, 1e3, true, {}, ""},
        {"channels.oscillations", Kind::reals, "0", 0, 100, false, {}, ""},
        {"channels.stability", Kind::real, "0.1", 0, 1, true, {}, "relative change of alpha_0 under h -> h/2"},
        {"channels.target_ratio", Kind::real, "5", 1, 1e3, false, {}, "(0, g) exhibit must fall below alpha_0 / ratio"},

        {"selfsim.amplitude", Kind::real, "1.2", 1, 10, true, {}, "a in (a W, 0)"},
        {"selfsim.lambda", Kind::real, "0.5", 0, 1, true, {}, "band [lambda tau, tau]"},
        {"selfsim.resolve", Kind::real, "10", 1, 1e3, false, {}, "smallest band radius in cells"},

        {"radiation.t_probe", Kind::real, "0", 0, 1e4, false, {}, "0: end of the run"},
        {"radiation.delta", Kind::real, "0.2", 0, 0.5, true, {}, "cutoff parameter"},
        {"radiation.radius", Kind::real, "5", 0, 1e3, false, {}, "R in |x| >= t - R"},
        {"radiation.tolerance", Kind::real, "1e-2", 0, 1, true, {}, "final mismatch / ||u_0||_H^2"},

        {"decomposition.times", Kind::reals, "", 0, 1e4, false, {}, "report times"},
        {"decomposition.max_bubbles", Kind::integer, "8", 1, 64, false, {}, ""},
        {"decomposition.stop_fraction", Kind::real, "0.2", 0, 2, true, {}, "of ||grad W||^2"},
        {"decomposition.separation", Kind::real, "10", 1, 1e6, false, {}, "scale ratio counted as separated"},
        {"decomposition.delta", Kind::real, "0.25", 0, 0.5, true, {}, "cutoff parameter"},
        {"decomposition.scale_tol", Kind::real, "0.02", 0, 1, true, {}, "|lambda_hat / lambda - 1|"},
        {"decomposition.residual_tol", Kind::real, "0.03", 0, 1, true, {}, "residual H-norm / ||grad W||"},
        {"decomposition.energy_tol", Kind::real, "0.05", 0, 1, true, {}, "relative quantization error"},
        {"decomposition.blowup_amplitude", Kind::real, "1.2", 0, 10, false, {}, "0: skip the blow-up run"},

        {"lemma.h", Kind::real, "0.01", 1e-3, 0.2, false, {}, ""},
        {"lemma.r_max", Kind::real, "20", 1, 1e3, false, {}, ""},
        {"lemma.hardy_corpus", Kind::integer, "100", 1, 1e5, false, {}, "random bump fields"},
        {"lemma.pointwise_corpus", Kind::integer, "200", 1, 1e5, false, {}, "calibration states for C_L"},
        {"lemma.coercivity_corpus", Kind::integer, "1000", 1, 1e6, false, {}, "calibration fields for c"},
        {"lemma.fresh", Kind::integer, "100", 1, 1e5, false, {}, "fresh states checked per constant"},

        {"output.dir", Kind::text, "critwave_out", 0, 0, false, {}, ""},
        {"output.checkpoint", Kind::boolean, "true", 0, 0, false, {}, "write the final state snapshot"},
    };
    return keys;
}

/// Defaults that differ per scenario.
inline const std::map<std::string, std::string>& scenario_defaults(const std::string& scenario)
{
    static const std::map<std::string, std::map<std::string, std::string>> table = {
        {"static-w", {{"solver.h", "0.02"}, {"solver.r_max", "50"}, {"solver.t_max", "1"}, {"solver.snapshot_interval", "0.1"}}},
        {"trichotomy", {{"solver.h", "0.01"}, {"solver.r_max", "100"}, {"solver.t_max", "40"}}},
        {"standing-wave-convergence", {{"solver.mode", "linear"}}},
        {"channels", {{"solver.mode", "linear"}}},
        {"self-similar-probe",
         {{"solver.h", "0.0025"}, {"solver.r_max", "30"}, {"solver.t_max", "20"}, {"solver.snapshot_interval", "0.01"}}},
        {"global-bubble",
         {{"data.kind", "bump"}, {"solver.h", "0.02"}, {"solver.r_max", "70"}, {"solver.t_max", "50"},
          {"decomposition.times", "10,20,30,40"}}},
        {"decomposition-demo",
         {{"data.kind", "superposition"}, {"solver.h", "0.0025"}, {"solver.r_max", "200"},
          {"decomposition.times", "1,2"}}},
        {"lemma-suite", {}},
    };
    static const std::map<std::string, std::string> none;
    const auto it = table.find(scenario);
    return it == table.end() ? none : it->second;
}

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t from = 0;
    while (true) {
        const auto at = s.find(sep, from);
        out.push_back(trim(s.substr(from, at == std::string_view::npos ? std::string_view::npos : at - from)));
        if (at == std::string_view::npos)
            return out;
        from = at + 1;
    }
}

inline std::optional<double> parse_real(std::string_view s)
{
    const std::string t = trim(s);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

inline std::optional<std::vector<double>> parse_reals(std::string_view s)
{
    std::vector<double> out;
    if (trim(s).empty())
        return out;
    for (const auto& tok : split(s, ',')) {
        const auto v = parse_real(tok);
        if (!v)
            return std::nullopt;
        out.push_back(*v);
    }
    return out;
}

inline std::optional<bool> parse_bool(std::string_view s)
{
    const std::string t = trim(s);
    if (t == "true" || t == "1" || t == "yes" || t == "on")
        return true;
    if (t == "false" || t == "0" || t == "no" || t == "off")
        return false;
    return std::nullopt;
}

inline const KeySpec* find_key(const std::string& key)
{
    for (const auto& k : schema())
        if (k.key == key)
            return &k;
    return nullptr;
}

inline std::string range_text(const KeySpec& k)
{
    std::ostringstream os;
    os << (k.open_lo ? "(" : "[") << k.lo << ", " << k.hi << "]";
    return os.str();
}

/// Empty when `value` is acceptable for `k`, else the reason.
inline std::string check_value(const KeySpec& k, const std::string& value)
{
    auto in_range = [&](double v) { return (k.open_lo ? v > k.lo : v >= k.lo) && v <= k.hi; };
    switch (k.kind) {
    case Kind::real: {
        const auto v = parse_real(value);
        if (!v)
            return "not a number: '" + value + "'";
        if (!in_range(*v))
            return "outside " + range_text(k) + ": " + value;
        return {};
    }
    case Kind::integer: {
        const auto v = parse_real(value);
        if (!v || *v != std::floor(*v))
            return "not an integer: '" + value + "'";
        if (!in_range(*v))
            return "outside " + range_text(k) + ": " + value;
        return {};
    }
    case Kind::reals: {
        const auto v = parse_reals(value);
        if (!v)
            return "not a comma-separated list of numbers: '" + value + "'";
        for (double x : *v)
            if (!in_range(x))
                return "entry outside " + range_text(k) + ": " + value;
        return {};
    }
    case Kind::boolean:
        return parse_bool(value) ? std::string() : "not a boolean: '" + value + "'";
    case Kind::choice: {
        if (std::find(k.choices.begin(), k.choices.end(), value) != k.choices.end())
            return {};
        std::string list;
        for (const auto& c : k.choices)
            list += (list.empty() ? "" : ", ") + c;
        return value.empty() ? "required; one of " + list : "'" + value + "' is not one of " + list;
    }
    case Kind::text:
        return {};
    }
    return {};
}

} // namespace detail

/// Thrown with every offending key, one per line.
class ConfigIssues : public ConfigError {
public:
    explicit ConfigIssues(std::vector<std::string> issues) : ConfigError(join(issues)), issues_(std::move(issues)) {}
    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& v)
    {
        std::string s = "invalid configuration:";
        for (const auto& x : v)
            s += "\n  " + x;
        return s;
    }
    std::vector<std::string> issues_;
};

class ScenarioConfig {
public:
    ScenarioConfig() = default;

    /// Keys given explicitly (before defaults are applied).
    static ScenarioConfig from_pairs(const std::map<std::string, std::string>& given)
    {
        ScenarioConfig c;
        c.given_ = given;
        c.resolve();
        return c;
    }

    static ScenarioConfig from_stream(std::istream& is)
    {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::read_ini(is, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigIssues({std::string("parse error: ") + e.message() + " (line " + std::to_string(e.line()) + ")"});
        }
        std::map<std::string, std::string> given;
        std::vector<std::string> issues;
        for (const auto& [section, body] : tree) {
            if (body.empty()) {
                issues.push_back(section + ": key outside any section");
                continue;
            }
            for (const auto& [key, value] : body)
                given[section + "." + key] = detail::trim(value.data());
        }
        if (!issues.empty())
            throw ConfigIssues(issues);
        return from_pairs(given);
    }

    static ScenarioConfig from_file(const std::string& path)
    {
        std::ifstream is(path);
        if (!is)
            throw ConfigIssues({"cannot read config file '" + path + "'"});
        return from_stream(is);
    }

    static ScenarioConfig from_string(const std::string& text)
    {
        std::istringstream is(text);
        return from_stream(is);
    }

    /// Copy with `key` set to `value`, re-validated.
    ScenarioConfig with(const std::string& key, const std::string& value) const
    {
        auto given = given_;
        given[key] = value;
        return from_pairs(given);
    }

    const std::string& scenario() const { return values_.at("scenario.name"); }
    std::uint64_t seed() const { return static_cast<std::uint64_t>(real("scenario.seed")); }

    const std::string& text(const std::string& key) const { return lookup(key); }
    double real(const std::string& key) const { return *detail::parse_real(lookup(key)); }
    long integer(const std::string& key) const { return std::lround(real(key)); }
    bool flag(const std::string& key) const { return *detail::parse_bool(lookup(key)); }
    std::vector<double> reals(const std::string& key) const { return *detail::parse_reals(lookup(key)); }

    /// Every schema key with its resolved value, in key order.
    const std::map<std::string, std::string>& values() const noexcept { return values_; }
    const std::map<std::string, std::string>& given() const noexcept { return given_; }

    /// Resolved config as INI text; `with_output_dir = false` leaves out the output location.
    std::string echo(bool with_output_dir = true) const
    {
        std::string out, section;
        for (const auto& [key, value] : values_) {
            if (!with_output_dir && key == "output.dir")
                continue;
            const auto dot = key.find('.');
            if (key.substr(0, dot) != section) {
                section = key.substr(0, dot);
                out += (out.empty() ? "[" : "\n[") + section + "]\n";
            }
            out += key.substr(dot + 1) + " = " + value + "\n";
        }
        return out;
    }

private:
    const std::string& lookup(const std::string& key) const
    {
        const auto it = values_.find(key);
        if (it == values_.end())
            throw ConfigError("unknown configuration key '" + key + "'");
        return it->second;
    }

    void resolve()
    {
        std::vector<std::string> issues;
        for (const auto& [key, value] : given_)
            if (!detail::find_key(key))
                issues.push_back(key + ": unknown key");
        const auto name = given_.find("scenario.name");
        const std::string scenario = name == given_.end() ? std::string() : name->second;
        const auto& overrides = scenario_defaults(scenario);
        for (const auto& k : schema()) {
            std::string v = k.fallback;
            if (const auto o = overrides.find(k.key); o != overrides.end())
                v = o->second;
            if (const auto g = given_.find(k.key); g != given_.end())
                v = g->second;
            if (const auto why = detail::check_value(k, v); !why.empty())
                issues.push_back(k.key + ": " + why);
            values_[k.key] = v;
        }
        if (issues.empty())
            cross_check(issues);
        if (!issues.empty())
            throw ConfigIssues(issues);
    }

    void cross_check(std::vector<std::string>& issues) const
    {
        if (real("solver.h") > real("solver.r_max") / 10.0)
            issues.push_back("solver.h: must be at most solver.r_max / 10");
        if (text("data.kind") == "file" && text("data.file").empty())
            issues.push_back("data.file: required when data.kind = file");
        for (const auto& s : detail::split(text("data.shells"), ',')) {
            const auto parts = detail::split(s, ':');
            if (parts.size() != 3 || !detail::parse_real(parts[0]) || !detail::parse_real(parts[1]) ||
                !detail::parse_real(parts[2]) || !(*detail::parse_real(parts[2]) > 0.0))
                issues.push_back("data.shells: entry '" + s + "' is not amplitude:center:width with width > 0");
        }
        for (const auto& s : detail::split(text("data.bubbles"), ',')) {
            const auto parts = detail::split(s, ':');
            const auto sign = parts.size() == 2 ? detail::parse_real(parts[0]) : std::nullopt;
            const auto scale = parts.size() == 2 ? detail::parse_real(parts[1]) : std::nullopt;
            if (!sign || std::abs(*sign) != 1.0 || !scale || !(*scale > 0.0))
                issues.push_back("data.bubbles: entry '" + s + "' is not sign:scale with sign = +-1, scale > 0");
        }
        if (scenario() == "trichotomy" && reals("trichotomy.amplitudes").empty())
            issues.push_back("trichotomy.amplitudes: at least one amplitude required");
        if (scenario() == "standing-wave-convergence" && reals("standing.h_list").size() < 2)
            issues.push_back("standing.h_list: at least two spacings required");
        if (real("radiation.t_probe") > real("solver.t_max"))
            issues.push_back("radiation.t_probe: beyond solver.t_max");
    }

    std::map<std::string, std::string> given_;
    std::map<std::string, std::string> values_;
};

} // namespace critwave::lab
