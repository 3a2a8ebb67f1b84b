#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "critwave/lab.hpp"

namespace {

using namespace critwave;
using namespace critwave::lab;

void print_manifest(const std::string& label, const RunManifest& m)
{
    std::cout << label << ": " << to_string(m.status) << '\n';
    for (const auto& i : m.invariants)
        std::cout << "  [" << (i.passed ? "ok  " : "FAIL") << "] " << i.name << "  value=" << format_double(i.value)
                  << " bound=" << format_double(i.bound) << (i.detail.empty() ? "" : "  (" + i.detail + ")") << '\n';
    if (!m.error.empty())
        std::cout << "  error: " << m.error << '\n';
}

ScenarioConfig load(const std::string& path, const std::optional<std::string>& out,
                    const std::optional<std::uint64_t>& seed)
{
    auto cfg = ScenarioConfig::from_file(path);
    if (out)
        cfg = cfg.with("output.dir", *out);
    if (seed)
        cfg = cfg.with("scenario.seed", std::to_string(*seed));
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"critwave: radial focusing energy-critical wave lab in R^{1+4}"};
    app.require_subcommand(1);

    std::string config_path, axis_text, suite, out_dir;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "run one scenario");
    run->add_option("config", config_path, "INI config file")->required();
    run->add_option("--out", out, "output directory (overrides output.dir)");
    run->add_option("--seed", seed, "random seed (overrides scenario.seed)");

    auto* sweep = app.add_subcommand("sweep", "run a one-parameter family of a scenario");
    sweep->add_option("config", config_path, "INI config file")->required();
    sweep->add_option("--axis", axis_text, "key=start:stop:step")->required();
    sweep->add_option("--out", out, "output directory (default: output.dir)");
    sweep->add_option("--seed", seed, "random seed (overrides scenario.seed)");

    auto* verify = app.add_subcommand("verify", "run a reduced-size self-check suite");
    verify->add_option("suite", suite, "suite name")->required()->check(CLI::IsMember(verify_suite_names()));
    verify->add_option("--out", out_dir, "output directory")->default_val("critwave_verify");
    verify->add_option("--seed", seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        const unsigned workers = worker_count();
        if (*run) {
            const auto m = run_scenario(load(config_path, out, seed), workers);
            print_manifest(m.scenario, m);
            return exit_code(m.status);
        }
        if (*sweep) {
            const auto cfg = load(config_path, std::nullopt, seed);
            const auto axis = parse_axis(axis_text);
            const auto res = run_sweep(cfg, axis, out.value_or(cfg.text("output.dir")), workers);
            for (std::size_t k = 0; k < res.members.size(); ++k)
                print_manifest(member_name(k) + " " + axis.key + "=" + format_double(res.members[k].value),
                               res.members[k].manifest);
            return exit_code(res.worst());
        }
        const auto res = run_verify(suite, out_dir, seed.value_or(1), workers);
        for (const auto& o : res)
            print_manifest(o.suite, o.manifest);
        return exit_code(worst_status(res));
    } catch (const ConfigIssues& e) {
        for (const auto& i : e.issues())
            std::cerr << "config error: " << i << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return 3;
    }
}
