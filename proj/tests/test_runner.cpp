#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "nexus/errors.hpp"
#include "nexus/runner.hpp"
#include "helpers.hpp"

using namespace nexus;

namespace {

nlohmann::json base_config_json(const std::string& out_dir) {
    return {{"suite", testutil::suite_path()},
            {"apps_dir", testutil::apps_dir()},
            {"output_dir", out_dir},
            {"backends",
             {{"planner", {{"scripted", testutil::oracle_script_path()}}},
              {"navigator", {{"scripted", testutil::oracle_script_path()}}},
              {"analyst", {{"scripted", testutil::oracle_script_path()}}}}},
            {"master_seed", 7}};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string write_json(const std::string& dir, const std::string& name,
                       const nlohmann::json& j) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    out << j.dump(2);
    out.close();
    return path;
}

}  // namespace

TEST_CASE("the oracle config runs the shipped suite to 100 percent success") {
    const std::string out = testutil::fresh_dir("oracle_run");
    RunConfig config = RunConfig::from_json(base_config_json(out), "");
    RunResult result = run_suite(config);
    CHECK(result.internal_errors == 0);
    CHECK(result.report.episodes == 12);
    CHECK(result.report.success_rate == doctest::Approx(100.0));
    CHECK(result.report.termination_pct.at("Successful") == doctest::Approx(100.0));
    CHECK(result.trajectory_files.size() == 12);
    CHECK(read_file(out + "/report.txt").find("success_rate_pct") != std::string::npos);
    CHECK(read_file(out + "/report.csv").find("sc_wifi_bluetooth") != std::string::npos);
}

TEST_CASE("run artifacts are byte-identical across runs and parallelism degrees") {
    const std::string out1 = testutil::fresh_dir("det1");
    const std::string out2 = testutil::fresh_dir("det2");
    nlohmann::json j = base_config_json(out1);
    j["parallelism"] = 3;
    run_suite(RunConfig::from_json(j, ""));
    j["output_dir"] = out2;
    j["parallelism"] = 1;
    run_suite(RunConfig::from_json(j, ""));
    for (const auto& entry : std::filesystem::recursive_directory_iterator(out1)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = std::filesystem::relative(entry.path(), out1).string();
        CHECK_MESSAGE(read_file(entry.path().string()) == read_file(out2 + "/" + rel),
                      "artifact differs: " << rel);
    }
}

TEST_CASE("a crippled navigator exceeds every budget") {
    const std::string dir = testutil::fresh_dir("crippled");
    const std::string table = write_json(
        dir, "crippled.json",
        {{"identity", "crippled"},
         {"default",
          {{"planner", {{"responses", {"1. [ACT] keep going"}}, {"cycle", true}}},
           {"navigator",
            {{"responses", {"REASON: scanning\nACTION: Swipe(up)"}}, {"cycle", true}}},
           {"analyst", {{"responses", {"nothing"}}, {"cycle", true}}}}}});
    nlohmann::json j = base_config_json(dir + "/out");
    j["backends"] = {{"planner", {{"scripted", table}}},
                     {"navigator", {{"scripted", table}}},
                     {"analyst", {{"scripted", table}}}};
    RunResult result = run_suite(RunConfig::from_json(j, ""));
    CHECK(result.report.termination_pct.at("BudgetExceeded") == doctest::Approx(100.0));
    CHECK(result.report.success_rate == 0.0);
}

TEST_CASE("shipped configs load with inputs resolved against the config file") {
    RunConfig oracle = RunConfig::load_file(testutil::data_dir() + "/configs/oracle.json");
    CHECK(std::filesystem::exists(oracle.suite_path));
    CHECK(std::filesystem::is_directory(oracle.apps_dir));
    CHECK(oracle.pricing.has_value());
    RunConfig crippled = RunConfig::load_file(testutil::data_dir() + "/configs/crippled.json");
    CHECK(crippled.planner.kind == BackendBinding::Kind::Scripted);
    CHECK(std::filesystem::exists(crippled.planner.source));
}

TEST_CASE("config validation rejects missing paths and bad values") {
    nlohmann::json j = base_config_json(testutil::fresh_dir("cfg"));
    j["suite"] = "/nonexistent/suite.json";
    CHECK_THROWS_AS(RunConfig::from_json(j, ""), ConfigError);
    j = base_config_json(testutil::fresh_dir("cfg"));
    j["parallelism"] = 0;
    CHECK_THROWS_AS(RunConfig::from_json(j, ""), ConfigError);
    j = base_config_json(testutil::fresh_dir("cfg"));
    j["backends"]["planner"] = {{"scripted", "/nonexistent/table.json"}};
    CHECK_THROWS_AS(RunConfig::from_json(j, ""), ConfigError);
}

TEST_CASE("NEXUS_SEED overrides the configured master seed") {
    setenv("NEXUS_SEED", "4242", 1);
    RunConfig config = RunConfig::from_json(base_config_json(testutil::fresh_dir("seed")), "");
    unsetenv("NEXUS_SEED");
    CHECK(config.master_seed == 4242);
}

TEST_CASE("a missing role makes that episode an internal error, not a crash") {
    const std::string dir = testutil::fresh_dir("partial");
    // navigator responses exist only in the per-task blocks of the oracle
    // table; a task absent from it has no fallback
    nlohmann::json suite = {{"name", "tiny"},
                            {"version", "1"},
                            {"tasks", nlohmann::json::array()}};
    Suite shipped = load_suite_file(testutil::suite_path());
    for (const auto& t : shipped.tasks) {
        if (t.id == "sc_wifi_bluetooth") suite["tasks"].push_back(t);
    }
    CompositionalTask ghost = shipped.tasks[0];
    ghost.id = "unscripted_task";
    suite["tasks"].push_back(ghost);
    const std::string suite_path = write_json(dir, "tiny.json", suite);

    nlohmann::json j = base_config_json(dir + "/out");
    j["suite"] = suite_path;
    RunResult result = run_suite(RunConfig::from_json(j, ""));
    CHECK(result.internal_errors == 1);
    CHECK(result.report.episodes == 1);  // the scripted task still ran
    CHECK(result.report.success_rate == doctest::Approx(100.0));
}

TEST_CASE("replay reproduces logged final hashes and notices tampering") {
    const std::string out = testutil::fresh_dir("replay");
    run_suite(RunConfig::from_json(base_config_json(out), ""));
    const std::string path = out + "/trajectories/dd_alarm_audit.jsonl";
    ReplayResult ok = replay_trajectory(path);
    CHECK(ok.ok);
    CHECK(ok.expected_hash == ok.replayed_hash);

    // drop one env step: the final hash no longer reproduces
    TrajectoryRecord rec = TrajectoryRecord::load_file(path);
    std::ostringstream tampered;
    bool dropped = false;
    for (const auto& e : rec.events()) {
        if (!dropped && e.kind == "env_step") {
            dropped = true;
            continue;
        }
        tampered << nlohmann::json(e).dump() << "\n";
    }
    const std::string tampered_path = out + "/tampered.jsonl";
    std::ofstream(tampered_path) << tampered.str();
    CHECK_FALSE(replay_trajectory(tampered_path).ok);
}

TEST_CASE("suite loading rejects broken documents") {
    const std::string dir = testutil::fresh_dir("badsuite");
    const std::string path = dir + "/broken.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_suite_file(path), SuiteLoadError);
    CHECK_THROWS_AS(load_suite_file(dir + "/missing.json"), SuiteLoadError);

    nlohmann::json cyclic = nlohmann::json::parse(R"({
        "name": "bad",
        "tasks": [{
            "id": "x",
            "instruction": "loop",
            "subtasks": [
                {"id": "a", "command": "c", "environment": "notes"},
                {"id": "b", "command": "c", "environment": "notes"}
            ],
            "dependencies": [["a", "b"], ["b", "a"]],
            "logic": {"kind": "conjunctive", "children": [
                {"kind": "leaf", "id": "a"}, {"kind": "leaf", "id": "b"}
            ]},
            "composition_type": "SimpleConcatenation",
            "optimal_steps": 2
        }]
    })");
    const std::string cyc_path = write_json(dir, "cyclic.json", cyclic);
    Suite s = load_suite_file(cyc_path);
    CHECK_FALSE(validate_suite(s, nullptr).ok());
}

TEST_CASE("trajectory events satisfy the record invariants") {
    const std::string out = testutil::fresh_dir("invariants");
    run_suite(RunConfig::from_json(base_config_json(out), ""));
    for (const auto& entry : std::filesystem::directory_iterator(out + "/trajectories")) {
        TrajectoryRecord rec = TrajectoryRecord::load_file(entry.path().string());
        long prev_seq = -1;
        double prev_wall = 0.0;
        long steps = 0;
        for (const auto& e : rec.events()) {
            CHECK(e.seq == prev_seq + 1);  // total order, no gaps
            prev_seq = e.seq;
            CHECK(e.wall_ms >= prev_wall);  // the clock never runs backwards
            if (e.kind == "planner_call" || e.kind == "nav_call" || e.kind == "analyst_call") {
                // per call, inference time fits inside the wall-clock delta
                CHECK(e.infer_ms <= e.wall_ms - prev_wall + 1e-9);
            }
            prev_wall = e.wall_ms;
            if (e.kind == "env_step") ++steps;
        }
        const Event* final_ev = rec.final_event();
        REQUIRE(final_ev != nullptr);
        CHECK(final_ev->payload.at("env_steps").get<long>() == steps);
    }
}

TEST_CASE("snapshot files load and bind through the run config") {
    const std::string dir = testutil::fresh_dir("snapfiles");
    Environment env(testutil::device());
    EnvState prepared = env.reset("clean");
    prepared = step(prepared, Action::tap("icon.settings")).state;
    prepared = step(prepared, Action::tap("tgl.wifi")).state;
    prepared.step_count = 0;
    const std::string snap_path = dir + "/wifi_on.json";
    std::ofstream(snap_path) << prepared.to_json_value().dump(2);

    nlohmann::json j = base_config_json(dir + "/out");
    j["snapshots"] = {{"default", "clean"},
                      {"per_task", {{"sc_wifi_bluetooth", "wifi_on"}}},
                      {"files", {{"wifi_on", snap_path}}}};
    RunConfig config = RunConfig::from_json(j, "");
    CHECK(config.per_task_snapshot.at("sc_wifi_bluetooth") == "wifi_on");
    RunResult result = run_suite(config);
    // wifi starts enabled in this snapshot, so the oracle's tap flips it off
    // and the checkpoint fails: the outcome proves the snapshot was bound
    bool found = false;
    for (const auto& o : result.report.outcomes) {
        if (o.task_id != "sc_wifi_bluetooth") continue;
        found = true;
        CHECK(o.reason == TerminationReason::Premature);
    }
    CHECK(found);

    // replay works for file-backed snapshots too
    ReplayResult replayed = replay_trajectory(dir + "/out/trajectories/sc_wifi_bluetooth.jsonl");
    CHECK(replayed.ok);
}

TEST_CASE("gap-recovery join produces per-type and overall rows") {
    auto outcomes = [](int sc_ok, int sc_n, int ct_ok, int ct_n) {
        std::vector<TaskOutcome> rows;
        for (int i = 0; i < sc_n; ++i) {
            TaskOutcome o;
            o.task_id = "sc" + std::to_string(i);
            o.composition_type = "SimpleConcatenation";
            o.reason = i < sc_ok ? TerminationReason::Successful : TerminationReason::Premature;
            o.reward = i < sc_ok;
            rows.push_back(o);
        }
        for (int i = 0; i < ct_n; ++i) {
            TaskOutcome o;
            o.task_id = "ct" + std::to_string(i);
            o.composition_type = "ContextTransition";
            o.reason = i < ct_ok ? TerminationReason::Successful : TerminationReason::Premature;
            o.reward = i < ct_ok;
            rows.push_back(o);
        }
        return rows;
    };
    MetricsReport weak = MetricsReport::from_outcomes("s", outcomes(1, 4, 1, 4), false);
    MetricsReport strong = MetricsReport::from_outcomes("s", outcomes(4, 4, 4, 4), false);
    MetricsReport bridged = MetricsReport::from_outcomes("s", outcomes(3, 4, 4, 4), false);

    auto rows = pgr_join(weak, strong, bridged);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].scope == "SimpleConcatenation");
    CHECK(*rows[0].pgr == doctest::Approx(100.0 * (75.0 - 25.0) / (100.0 - 25.0)));
    CHECK(rows[1].scope == "ContextTransition");
    CHECK(*rows[1].pgr == doctest::Approx(100.0));
    CHECK(rows[2].scope == "Overall");
    CHECK(*rows[2].pgr == doctest::Approx(100.0 * (87.5 - 25.0) / (100.0 - 25.0)));
    CHECK(pgr_table_text(rows).find("Overall") != std::string::npos);

    // zero gap renders as absent rather than exploding
    auto flat = pgr_join(strong, strong, strong);
    CHECK_FALSE(flat[2].pgr.has_value());

    MetricsReport mismatched = MetricsReport::from_outcomes("s", outcomes(1, 3, 1, 4), false);
    CHECK_THROWS_AS(pgr_join(weak, strong, mismatched), TaskSetMismatchError);
}
