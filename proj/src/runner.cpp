#include "nexus/runner.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "nexus/errors.hpp"

namespace fs = std::filesystem;

namespace nexus {

Suite load_suite_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SuiteLoadError("cannot open suite file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SuiteLoadError("suite file " + path + " is not valid JSON: " + e.what());
    }
    Suite suite;
    try {
        suite.name = j.at("name").get<std::string>();
        suite.version = j.value("version", std::string("1"));
        suite.tasks = j.value("tasks", std::vector<CompositionalTask>{});
        suite.templates = j.value("templates", std::vector<TaskTemplate>{});
    } catch (const nlohmann::json::exception& e) {
        throw SuiteLoadError("suite file " + path + " malformed: " + e.what());
    }
    return suite;
}

namespace {

void enumerate_bindings(const TaskTemplate& tmpl,
                        std::map<std::string, std::string>& partial,
                        std::map<std::string, std::vector<std::string>>::const_iterator it,
                        ValidationReport& report, const DeviceConfig* device) {
    if (it == tmpl.placeholders.end()) {
        try {
            CompositionalTask task = instantiate(tmpl, partial, 0);
            ValidationReport r = validate(task);
            if (device) {
                ValidationReport d = validate_against_device(task, *device);
                r.findings.insert(r.findings.end(), d.findings.begin(), d.findings.end());
            }
            for (const auto& f : r.findings) {
                if (f.severity == ValidationFinding::Severity::Error)
                    report.findings.push_back(
                        {ValidationFinding::Severity::Error,
                         "template " + tmpl.id + " instantiation: " + f.message});
            }
        } catch (const Error& e) {
            report.findings.push_back({ValidationFinding::Severity::Error,
                                       "template " + tmpl.id + ": " + e.what()});
        }
        return;
    }
    auto next = std::next(it);
    for (const auto& value : it->second) {
        partial[it->first] = value;
        enumerate_bindings(tmpl, partial, next, report, device);
    }
    partial.erase(it->first);
}

}  // namespace

ValidationReport validate_suite(const Suite& suite, const DeviceConfig* device) {
    ValidationReport report;
    std::set<std::string> ids;
    for (const auto& task : suite.tasks) {
        if (!ids.insert(task.id).second)
            report.findings.push_back(
                {ValidationFinding::Severity::Error, "duplicate task id: " + task.id});
        ValidationReport r = validate(task);
        for (auto& f : r.findings) f.message = "task " + task.id + ": " + f.message;
        report.findings.insert(report.findings.end(), r.findings.begin(), r.findings.end());
        if (device) {
            ValidationReport d = validate_against_device(task, *device);
            for (auto& f : d.findings) f.message = "task " + task.id + ": " + f.message;
            report.findings.insert(report.findings.end(), d.findings.begin(), d.findings.end());
        }
    }
    for (const auto& tmpl : suite.templates) {
        std::map<std::string, std::string> partial;
        enumerate_bindings(tmpl, partial, tmpl.placeholders.begin(), report, device);
    }
    return report;
}

namespace {

BackendBinding parse_binding(const nlohmann::json& j, const std::string& base_dir,
                             const std::string& role) {
    BackendBinding b;
    if (j.contains("scripted")) {
        b.kind = BackendBinding::Kind::Scripted;
        b.source = j.at("scripted").get<std::string>();
        if (!b.source.empty() && b.source[0] != '/' && !base_dir.empty())
            b.source = base_dir + "/" + b.source;
        if (!fs::exists(b.source))
            throw ConfigError("backend " + role + ": script table not found: " + b.source);
    } else if (j.contains("remote")) {
        b.kind = BackendBinding::Kind::Remote;
        b.source = j.at("remote").get<std::string>();
    } else {
        throw ConfigError("backend " + role + " needs either `scripted` or `remote`");
    }
    b.identity = j.value("identity", std::string{});
    return b;
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
    if (path.empty() || path[0] == '/' || base_dir.empty()) return path;
    return base_dir + "/" + path;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
    RunConfig c;
    c.suite_path = resolve_path(j.at("suite").get<std::string>(), base_dir);
    c.apps_dir = resolve_path(j.at("apps_dir").get<std::string>(), base_dir);
    // Inputs resolve against the config file; the output tree lands wherever
    // the run is invoked from.
    c.output_dir = j.value("output_dir", std::string("out"));
    if (!fs::exists(c.suite_path)) throw ConfigError("suite file not found: " + c.suite_path);
    if (!fs::is_directory(c.apps_dir)) throw ConfigError("apps dir not found: " + c.apps_dir);
    if (j.contains("snapshots")) {
        const auto& s = j.at("snapshots");
        c.default_snapshot = s.value("default", std::string("clean"));
        c.per_task_snapshot =
            s.value("per_task", std::map<std::string, std::string>{});
        for (const auto& [id, path] : s.value("files", std::map<std::string, std::string>{})) {
            c.snapshot_files[id] = resolve_path(path, base_dir);
            if (!fs::exists(c.snapshot_files[id]))
                throw ConfigError("snapshot file not found: " + c.snapshot_files[id]);
        }
    }
    const auto& backends = j.at("backends");
    c.planner = parse_binding(backends.at("planner"), base_dir, "planner");
    c.navigator = parse_binding(backends.at("navigator"), base_dir, "navigator");
    c.analyst = parse_binding(backends.at("analyst"), base_dir, "analyst");
    if (j.contains("scheduler")) c.scheduler = j.at("scheduler").get<SchedulerConfig>();
    if (j.contains("pricing")) c.pricing = PricingTable::from_json(j.at("pricing"));
    c.master_seed = j.value("master_seed", 0L);
    c.parallelism = j.value("parallelism", 1);
    if (c.parallelism < 1) throw ConfigError("parallelism must be >= 1");
    c.repeats = j.value("repeats", 1);
    if (c.repeats < 1) throw ConfigError("repeats must be >= 1");
    if (const char* seed = std::getenv("NEXUS_SEED")) c.master_seed = std::atol(seed);
    return c;
}

RunConfig RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j, fs::path(path).parent_path().string());
}

namespace {

struct EpisodeJob {
    size_t index;
    const CompositionalTask* task;
    std::string episode_id;
    std::string snapshot;
};

class BackendFactory {
  public:
    BackendFactory(const BackendBinding& binding, AgentRole role)
        : binding_(binding), role_(role) {
        if (binding.kind == BackendBinding::Kind::Scripted)
            table_ = ScriptTable::load_file(binding.source);
    }

    std::unique_ptr<TextBackend> make(const std::string& task_id) const {
        if (binding_.kind == BackendBinding::Kind::Scripted) return table_->make_session(task_id, role_);
        std::string identity = binding_.identity.empty()
                                   ? "remote:" + std::string(to_string(role_))
                                   : binding_.identity;
        return std::make_unique<RemoteBackend>(binding_.source, identity);
    }

  private:
    BackendBinding binding_;
    AgentRole role_;
    std::optional<ScriptTable> table_;
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

}  // namespace

RunResult run_suite(const RunConfig& config) {
    DeviceConfigPtr device = load_device_config(config.apps_dir);
    Suite suite = load_suite_file(config.suite_path);
    ValidationReport validation = validate_suite(suite, device.get());
    if (!validation.ok()) {
        std::string msg = "suite failed validation:";
        for (const auto& e : validation.errors()) msg += "\n  " + e;
        throw SuiteLoadError(msg);
    }

    Environment env(device);
    for (const auto& [id, path] : config.snapshot_files) env.load_snapshot_file(id, path);

    BackendFactory planner_factory(config.planner, AgentRole::Planner);
    BackendFactory navigator_factory(config.navigator, AgentRole::Navigator);
    BackendFactory analyst_factory(config.analyst, AgentRole::Analyst);
    const ToolRegistry tools = ToolRegistry::with_defaults();

    std::vector<EpisodeJob> jobs;
    for (const auto& task : suite.tasks) {
        auto snap_it = config.per_task_snapshot.find(task.id);
        const std::string snapshot = snap_it == config.per_task_snapshot.end()
                                         ? config.default_snapshot
                                         : snap_it->second;
        if (!env.has_snapshot(snapshot))
            throw ConfigError("task " + task.id + " references unknown snapshot " + snapshot);
        for (int r = 0; r < config.repeats; ++r) {
            std::string episode_id = task.id;
            if (config.repeats > 1) episode_id += "_r" + std::to_string(r);
            jobs.push_back({jobs.size(), &task, episode_id, snapshot});
        }
    }

    fs::create_directories(config.output_dir + "/trajectories");

    std::vector<std::optional<TrajectoryRecord>> records(jobs.size());
    std::vector<std::string> failures(jobs.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const EpisodeJob& job = jobs[i];
            try {
                EpisodeBackends backends;
                backends.planner = planner_factory.make(job.task->id);
                backends.navigator = navigator_factory.make(job.task->id);
                backends.analyst = analyst_factory.make(job.task->id);
                EnvState initial = env.reset(job.snapshot);
                nlohmann::json meta = {{"episode", job.episode_id},
                                       {"snapshot", job.snapshot},
                                       {"apps_dir", config.apps_dir},
                                       {"suite", suite.name},
                                       {"master_seed", config.master_seed}};
                auto file_it = config.snapshot_files.find(job.snapshot);
                if (file_it != config.snapshot_files.end())
                    meta["snapshot_file"] = file_it->second;
                records[i] = run_episode(*job.task, std::move(initial), backends,
                                         config.scheduler, tools, std::move(meta));
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    {
        std::vector<std::thread> pool;
        const int n = std::min<int>(config.parallelism, static_cast<int>(jobs.size()));
        for (int t = 0; t < std::max(1, n); ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RunResult result;
    std::vector<TaskOutcome> outcomes;
    for (size_t i = 0; i < jobs.size(); ++i) {
        const std::string path =
            config.output_dir + "/trajectories/" + jobs[i].episode_id + ".jsonl";
        if (records[i]) {
            records[i]->save_file(path);
            result.trajectory_files.push_back(path);
            outcomes.push_back(outcome_from_record(
                *records[i], config.pricing ? &*config.pricing : nullptr));
        } else {
            ++result.internal_errors;
            TrajectoryRecord err;
            err.append("internal_error",
                       {{"task_id", jobs[i].task->id}, {"error", failures[i]}});
            err.save_file(path);
            result.trajectory_files.push_back(path);
        }
    }
    result.report =
        MetricsReport::from_outcomes(suite.name, std::move(outcomes), config.pricing.has_value());
    write_file(config.output_dir + "/report.txt", result.report.to_text());
    write_file(config.output_dir + "/report.csv", result.report.to_csv());
    write_file(config.output_dir + "/results.json", result.report.to_json_value().dump(2) + "\n");
    return result;
}

ReplayResult replay_trajectory(const std::string& trajectory_path,
                               const std::string& apps_dir_override) {
    ReplayResult out;
    TrajectoryRecord record = TrajectoryRecord::load_file(trajectory_path);
    const Event* meta = nullptr;
    for (const auto& e : record.events())
        if (e.kind == "meta") meta = &e;
    const Event* final_ev = record.final_event();
    if (!meta || !final_ev) {
        out.message = "trajectory lacks meta or final event";
        return out;
    }
    const std::string apps_dir = apps_dir_override.empty()
                                     ? meta->payload.at("apps_dir").get<std::string>()
                                     : apps_dir_override;
    const std::string snapshot = meta->payload.value("snapshot", std::string("clean"));
    Environment env(load_device_config(apps_dir));
    if (meta->payload.contains("snapshot_file"))
        env.load_snapshot_file(snapshot, meta->payload.at("snapshot_file").get<std::string>());
    EnvState state = env.reset(snapshot);
    if (state_hash_hex(state) != meta->payload.value("initial_state_hash", std::string{})) {
        out.message = "initial state hash mismatch (snapshot or apps changed)";
        out.expected_hash = meta->payload.value("initial_state_hash", std::string{});
        out.replayed_hash = state_hash_hex(state);
        return out;
    }
    for (const auto& e : record.events()) {
        if (e.kind != "env_step") continue;
        const Action a = e.payload.at("action").get<Action>();
        state = step(state, a).state;
    }
    out.expected_hash = final_ev->payload.at("state_hash").get<std::string>();
    out.replayed_hash = state_hash_hex(state);
    out.ok = out.expected_hash == out.replayed_hash;
    out.message = out.ok ? "final state hash reproduced" : "final state hash mismatch";
    return out;
}

namespace {

double type_success_rate(const MetricsReport& r, const std::set<std::string>& types) {
    long total = 0;
    long ok = 0;
    for (const auto& o : r.outcomes) {
        if (!types.count(o.composition_type)) continue;
        ++total;
        if (o.reason == TerminationReason::Successful) ++ok;
    }
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(ok) / static_cast<double>(total);
}

std::set<std::string> task_id_set(const MetricsReport& r) {
    std::set<std::string> ids;
    for (const auto& o : r.outcomes) ids.insert(o.task_id);
    return ids;
}

}  // namespace

std::vector<PgrRow> pgr_join(const MetricsReport& weak, const MetricsReport& strong,
                             const MetricsReport& bridged) {
    const auto ids = task_id_set(weak);
    if (task_id_set(strong) != ids || task_id_set(bridged) != ids)
        throw TaskSetMismatchError("the three result sets cover different task ids");

    std::vector<PgrRow> rows;
    const std::vector<std::string> scopes = {"SimpleConcatenation", "ContextTransition"};
    for (const auto& scope : scopes) {
        PgrRow row;
        row.scope = scope;
        row.weak = type_success_rate(weak, {scope});
        row.strong = type_success_rate(strong, {scope});
        row.bridged = type_success_rate(bridged, {scope});
        if (row.strong != row.weak) row.pgr = compute_pgr(row.weak, row.strong, row.bridged);
        rows.push_back(row);
    }
    PgrRow overall;
    overall.scope = "Overall";
    const std::set<std::string> both = {"SimpleConcatenation", "ContextTransition"};
    overall.weak = type_success_rate(weak, both);
    overall.strong = type_success_rate(strong, both);
    overall.bridged = type_success_rate(bridged, both);
    if (overall.strong != overall.weak)
        overall.pgr = compute_pgr(overall.weak, overall.strong, overall.bridged);
    rows.push_back(overall);
    return rows;
}

std::string pgr_table_text(const std::vector<PgrRow>& rows) {
    std::ostringstream out;
    auto pad = [](const std::string& s, size_t w) {
        return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
    };
    auto fmt = [](double v) {
        std::ostringstream o;
        o << std::fixed << std::setprecision(2) << v;
        return o.str();
    };
    out << pad("scope", 21) << pad("weak", 9) << pad("strong", 9) << pad("bridged", 9)
        << "pgr\n";
    for (const auto& r : rows) {
        out << pad(r.scope, 21) << pad(fmt(r.weak), 9) << pad(fmt(r.strong), 9)
            << pad(fmt(r.bridged), 9) << (r.pgr ? fmt(*r.pgr) : "n/a") << "\n";
    }
    return out.str();
}

}  // namespace nexus
