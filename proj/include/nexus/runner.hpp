#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nexus/backend.hpp"
#include "nexus/env.hpp"
#include "nexus/eval.hpp"
#include "nexus/scheduler.hpp"
#include "nexus/task.hpp"

namespace nexus {

struct Suite {
    std::string name;
    std::string version;
    std::vector<CompositionalTask> tasks;
    std::vector<TaskTemplate> templates;
};

Suite load_suite_file(const std::string& path);  // SuiteLoadError

/// Structural validation of every task, device checks when a device is given,
/// and exhaustive re-validation of every template instantiation over its full
/// domain product.
ValidationReport validate_suite(const Suite& suite, const DeviceConfig* device);

struct BackendBinding {
    enum class Kind { Scripted, Remote } kind = Kind::Scripted;
    std::string source;    // script table path or remote endpoint
    std::string identity;  // optional override
};

struct RunConfig {
    std::string suite_path;
    std::string apps_dir;
    std::string output_dir;
    std::string default_snapshot = "clean";
    std::map<std::string, std::string> per_task_snapshot;
    std::map<std::string, std::string> snapshot_files;  // snapshot id -> file
    BackendBinding planner;
    BackendBinding navigator;
    BackendBinding analyst;
    SchedulerConfig scheduler;
    std::optional<PricingTable> pricing;
    long master_seed = 0;
    int parallelism = 1;
    int repeats = 1;

    /// Loads a config file; the NEXUS_SEED environment variable overrides
    /// master_seed. Referenced paths are checked here (ConfigError).
    static RunConfig load_file(const std::string& path);
    static RunConfig from_json(const nlohmann::json& j, const std::string& base_dir);
};

struct RunResult {
    MetricsReport report;
    int internal_errors = 0;
    std::vector<std::string> trajectory_files;
};

/// Executes every task in the suite (repeats times each) against its snapshot,
/// writes one trajectory per episode plus report.txt / report.csv /
/// results.json under output_dir. Task failures are data; only harness faults
/// count as internal errors (recorded, never aborting the suite).
RunResult run_suite(const RunConfig& config);

struct ReplayResult {
    bool ok = false;
    std::string message;
    std::string expected_hash;
    std::string replayed_hash;
};

/// Re-executes the logged action sequence against a fresh reset of the
/// trajectory's snapshot and compares the final state hash.
ReplayResult replay_trajectory(const std::string& trajectory_path,
                               const std::string& apps_dir_override = {});

struct PgrRow {
    std::string scope;
    double weak = 0.0;
    double strong = 0.0;
    double bridged = 0.0;
    std::optional<double> pgr;  // absent when the gap is zero
};

/// Joins three per-task result sets through the gap-recovery formula; rows per
/// composition type (SimpleConcatenation, ContextTransition) plus an Overall
/// row across those two types. Task id sets must match exactly.
std::vector<PgrRow> pgr_join(const MetricsReport& weak, const MetricsReport& strong,
                             const MetricsReport& bridged);

std::string pgr_table_text(const std::vector<PgrRow>& rows);

}  // namespace nexus
