// Command-line front end: run scenarios, validate configs, list presets,
// recompute metrics from a saved trace.
#include "etdkf/sim/metrics.hpp"
#include "etdkf/sim/presets.hpp"
#include "etdkf/sim/runner.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace etdkf;
using namespace etdkf::sim;

namespace {

ScenarioConfig resolve(const std::string& scenario, const std::string& preset_name)
{
    if (!scenario.empty() && !preset_name.empty()) throw ConfigError("give either --scenario or --preset, not both");
    if (!scenario.empty()) return load_scenario(scenario);
    if (!preset_name.empty()) return preset(preset_name);
    throw ConfigError("one of --scenario or --preset is required");
}

void print_report(const ValidationReport& r)
{
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& e : r.errors) std::cerr << "error: " << e << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Event-triggered distributed Kalman filter simulator"};
    app.require_subcommand(1);

    std::string scenario, preset_name, out = "out", trace_dir;
    std::int64_t seed = -1, steps = -1;
    bool dump = false;

    auto* run = app.add_subcommand("run", "run a scenario and write CSV traces");
    run->add_option("--scenario", scenario, "scenario JSON file");
    run->add_option("--preset", preset_name, "built-in preset name");
    run->add_option("--seed", seed, "override the master seed");
    run->add_option("--steps", steps, "override the step count");
    run->add_option("--out", out, "output directory");

    auto* val = app.add_subcommand("validate", "check a scenario without running it");
    val->add_option("--scenario", scenario, "scenario JSON file");
    val->add_option("--preset", preset_name, "built-in preset name");

    auto* pre = app.add_subcommand("presets", "list presets, or print one as JSON");
    pre->add_option("--show", preset_name, "print this preset's config");
    pre->add_flag("--dump", dump, "write every preset to <out>/<name>.json");
    pre->add_option("--out", out, "directory for --dump");

    auto* met = app.add_subcommand("metrics", "recompute metrics from a trace directory");
    met->add_option("--trace", trace_dir, "directory holding nodes.csv, edges.csv, scenario.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = resolve(scenario, preset_name);
            if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
            if (steps >= 0) cfg.steps = steps;
            const auto report = validate(cfg);
            print_report(report);
            if (!report.ok()) return 2;
            const auto trace = run_scenario(cfg);
            const fs::path dir(out);
            write_trace(trace, dir);
            save_scenario(cfg, (dir / "scenario.json").string());
            const auto m = compute_metrics(trace, cfg);
            std::ostringstream csv;
            write_metrics_csv(m, csv);
            write_file(dir / "metrics.csv", csv.str());
            write_file(dir / "metrics.json", metrics_to_json(m).dump(2) + "\n");
            std::cout << "wrote " << trace.nodes.size() << " node rows and " << trace.edges.size()
                      << " edge rows to " << dir.string() << '\n';
            std::cout << metrics_to_json(m).dump(2) << '\n';
        } else if (*val) {
            const auto cfg = resolve(scenario, preset_name);
            const auto report = validate(cfg);
            print_report(report);
            if (!report.ok()) return 2;
            std::cout << "ok: " << cfg.name << '\n';
        } else if (*pre) {
            if (!preset_name.empty()) {
                std::cout << scenario_to_json(preset(preset_name)).dump(2) << '\n';
            } else if (dump) {
                fs::create_directories(out);
                for (const auto& name : list_presets()) save_scenario(preset(name), (fs::path(out) / (name + ".json")).string());
            } else {
                for (const auto& name : list_presets()) std::cout << name << '\n';
            }
        } else if (*met) {
            const fs::path dir(trace_dir);
            const auto cfg = load_scenario((dir / "scenario.json").string());
            const auto trace = read_trace(dir);
            const auto m = compute_metrics(trace, cfg);
            std::cout << metrics_to_json(m).dump(2) << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
