// Command-line entry point: run suites, validate them, join gap-recovery
// reports and replay logged trajectories against the simulated device.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nexus/errors.hpp"
#include "nexus/runner.hpp"

namespace {

int cmd_run(const std::string& config_path) {
    nexus::RunConfig config = nexus::RunConfig::load_file(config_path);
    nexus::RunResult result = nexus::run_suite(config);
    std::cout << result.report.to_text();
    if (result.internal_errors > 0) {
        std::cerr << result.internal_errors << " episode(s) hit internal errors\n";
        return 2;
    }
    return 0;
}

int cmd_validate(const std::string& suite_path, const std::string& apps_dir) {
    nexus::Suite suite = nexus::load_suite_file(suite_path);
    nexus::DeviceConfigPtr device;
    if (!apps_dir.empty()) device = nexus::load_device_config(apps_dir);
    nexus::ValidationReport report = nexus::validate_suite(suite, device.get());
    for (const auto& w : report.warnings()) std::cout << "warning: " << w << "\n";
    for (const auto& e : report.errors()) std::cout << "error: " << e << "\n";
    if (report.ok()) {
        std::cout << "suite " << suite.name << ": " << suite.tasks.size() << " tasks, "
                  << suite.templates.size() << " templates, no errors\n";
        return 0;
    }
    return 1;
}

int cmd_pgr(const std::string& weak_path, const std::string& strong_path,
            const std::string& bridged_path) {
    auto load = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw nexus::ConfigError("cannot open results file: " + path);
        nlohmann::json j;
        in >> j;
        return nexus::MetricsReport::from_json(j);
    };
    const auto rows = nexus::pgr_join(load(weak_path), load(strong_path), load(bridged_path));
    std::cout << nexus::pgr_table_text(rows);
    return 0;
}

int cmd_replay(const std::string& trajectory_path, const std::string& apps_dir) {
    nexus::ReplayResult r = nexus::replay_trajectory(trajectory_path, apps_dir);
    std::cout << (r.ok ? "OK" : "FAIL") << ": " << r.message << " (expected " << r.expected_hash
              << ", replayed " << r.replayed_hash << ")\n";
    return r.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compositional-task scheduling harness for a simulated mobile device"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run every task of a suite and emit reports");
    run->add_option("config", config_path, "run config file (JSON)")->required();

    std::string suite_path;
    std::string apps_dir;
    auto* validate = app.add_subcommand("validate-suite", "validate a task suite file");
    validate->add_option("suite", suite_path, "suite file (JSON)")->required();
    validate->add_option("--apps-dir", apps_dir, "check tasks against these app definitions");

    std::string weak_path;
    std::string strong_path;
    std::string bridged_path;
    auto* pgr = app.add_subcommand("pgr", "join three results.json files into a gap-recovery table");
    pgr->add_option("weak", weak_path, "results of the compositional-instruction run")->required();
    pgr->add_option("strong", strong_path, "results of the pre-decomposed (ceiling) run")
        ->required();
    pgr->add_option("bridged", bridged_path, "results of the scheduled run")->required();

    std::string trajectory_path;
    std::string replay_apps_dir;
    auto* replay = app.add_subcommand("replay", "re-execute a trajectory's actions and check the "
                                                "final state hash");
    replay->add_option("trajectory", trajectory_path, "trajectory .jsonl file")->required();
    replay->add_option("--apps-dir", replay_apps_dir, "override the logged app definitions dir");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path);
        if (*validate) return cmd_validate(suite_path, apps_dir);
        if (*pgr) return cmd_pgr(weak_path, strong_path, bridged_path);
        if (*replay) return cmd_replay(trajectory_path, replay_apps_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
