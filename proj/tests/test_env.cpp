#include <doctest.h>

#include <random>

#include "nexus/env.hpp"
#include "nexus/errors.hpp"
#include "nexus/runner.hpp"
#include "helpers.hpp"

using namespace nexus;

namespace {

EnvState clean() {
    Environment env(testutil::device());
    return env.reset("clean");
}

// State json with the step counter masked out.
nlohmann::json sans_steps(const EnvState& s) {
    nlohmann::json j = s.to_json_value();
    j["step_count"] = 0;
    return j;
}

}  // namespace

TEST_CASE("reset is deterministic and isolated") {
    Environment env(testutil::device());
    EnvState a = env.reset("clean");
    EnvState b = env.reset("clean");
    CHECK(state_hash(a) == state_hash(b));

    EnvState s = env.reset("clean");
    s = step(s, Action::tap("icon.notes")).state;
    s = step(s, Action::tap("btn.new")).state;
    s = step(s, Action::tap("in.title")).state;
    s = step(s, Action::type_text("x")).state;
    s = step(s, Action::home()).state;
    EnvState c = env.reset("clean");
    CHECK(state_hash(c) == state_hash(a));
}

TEST_CASE("unknown snapshot is rejected") {
    Environment env(testutil::device());
    CHECK_THROWS_AS(env.reset("nope"), UnknownSnapshotError);
}

TEST_CASE("custom snapshots restore the exact stored state") {
    Environment env(testutil::device());
    EnvState s = env.reset("clean");
    s = step(s, Action::tap("icon.settings")).state;
    s = step(s, Action::tap("tgl.wifi")).state;
    env.register_snapshot("wifi_on", s);
    EnvState r = env.reset("wifi_on");
    CHECK(state_hash(r) == state_hash(s));
}

TEST_CASE("tapping a toggle flips only that value plus the step counter") {
    EnvState s = clean();
    s = step(s, Action::tap("icon.settings")).state;
    EnvState before = s;
    StepOutcome out = step(s, Action::tap("tgl.wifi"));
    CHECK_FALSE(out.report.noop);

    nlohmann::json a = sans_steps(before);
    nlohmann::json b = sans_steps(out.state);
    CHECK(a != b);
    a["stores"]["settings"]["switches"][0]["on"] = true;
    CHECK(a == b);

    Observation obs = observe(out.state);
    for (const auto& e : obs.elements)
        if (e.id == "tgl.wifi") CHECK(e.value == std::string("on"));
}

TEST_CASE("invalid taps are no-ops that still consume a step") {
    EnvState s = clean();
    StepOutcome out = step(s, Action::tap("no.such.element"));
    CHECK(out.report.noop);
    CHECK(out.state.step_count == s.step_count + 1);
    CHECK(sans_steps(out.state) == sans_steps(s));
}

TEST_CASE("home is idempotent modulo the step counter") {
    EnvState s = clean();
    s = step(s, Action::tap("icon.notes")).state;
    EnvState once = step(s, Action::home()).state;
    EnvState twice = step(once, Action::home()).state;
    CHECK(sans_steps(once) == sans_steps(twice));
}

TEST_CASE("back pops screens and finally leaves the app") {
    EnvState s = clean();
    s = step(s, Action::tap("icon.notes")).state;
    s = step(s, Action::tap("btn.new")).state;
    CHECK(observe(s).screen == "compose");
    s = step(s, Action::back()).state;
    CHECK(observe(s).screen == "main");
    s = step(s, Action::back()).state;
    CHECK(s.foreground == "home");
    StepOutcome at_home = step(s, Action::back());
    CHECK(at_home.report.noop);
}

TEST_CASE("typing requires focus and respects the length cap") {
    EnvState s = clean();
    CHECK(step(s, Action::type_text("hello")).report.noop);
    s = step(s, Action::tap("icon.notes")).state;
    s = step(s, Action::tap("btn.new")).state;
    CHECK(step(s, Action::type_text("x")).report.noop);  // nothing focused yet
    s = step(s, Action::tap("in.title")).state;
    StepOutcome typed = step(s, Action::type_text("packing"));
    CHECK_FALSE(typed.report.noop);
    Observation obs = observe(typed.state);
    for (const auto& e : obs.elements)
        if (e.id == "in.title") CHECK(e.value == std::string("packing"));
    CHECK(step(typed.state, Action::type_text(std::string(5000, 'a'))).report.noop);
}

TEST_CASE("stop records its answer into the system store") {
    EnvState s = clean();
    s = step(s, Action::stop(std::string("42"))).state;
    REQUIRE(s.stores.at("system").at("answers").size() == 1);
    CHECK(s.stores.at("system").at("answers")[0].at("text") == "42");

    Checkpoint cp{"a", "system", {"answers[-1].text", CheckpointOp::Eq, "42"}};
    CHECK(checkpoint_satisfied(s, cp));
}

TEST_CASE("the home screen lists exactly the registered app icons") {
    EnvState s = clean();
    Observation obs = observe(s);
    CHECK(obs.foreground == "home");
    REQUIRE(obs.elements.size() == testutil::device()->apps().size());
    for (size_t i = 0; i < obs.elements.size(); ++i) {
        CHECK(obs.elements[i].role == Role::Icon);
        CHECK(obs.elements[i].actionable);
        CHECK(obs.elements[i].id == "icon." + testutil::device()->apps()[i].id);
    }
}

TEST_CASE("stored notes render as list items labeled by title") {
    EnvState s = clean();
    s = step(s, Action::tap("icon.notes")).state;
    Observation obs = observe(s);
    int items = 0;
    std::vector<std::string> labels;
    for (const auto& e : obs.elements) {
        if (e.role == Role::ListItem) {
            ++items;
            labels.push_back(e.label);
        }
    }
    CHECK(items == 3);
    CHECK(labels == std::vector<std::string>{"groceries", "meeting", "ideas"});
}

TEST_CASE("observe is pure") {
    EnvState s = clean();
    s = step(s, Action::tap("icon.messaging")).state;
    s = step(s, Action::tap("contact.ming")).state;
    const std::string first = observe(s).flat_text();
    const std::string second = observe(s).flat_text();
    CHECK(first == second);
    CHECK(first.find("Lotus Garden") != std::string::npos);
}

TEST_CASE("chat lists are filtered to the selected contact") {
    EnvState s = clean();
    s = step(s, Action::tap("icon.messaging")).state;
    s = step(s, Action::tap("contact.yuan")).state;
    // the seeded invitation belongs to Ming and must not leak into Yuan's chat
    CHECK(observe(s).flat_text().find("Lotus Garden") == std::string::npos);
}

TEST_CASE("reward is 0 on the clean snapshot for every shipped goal") {
    Suite suite = load_suite_file(testutil::suite_path());
    EnvState s = clean();
    for (const auto& task : suite.tasks) {
        Goal g = Goal::from_task(task);
        CHECK_MESSAGE(reward(s, g) == 0, "task " << task.id);
    }
}

TEST_CASE("a satisfied disjunctive branch yields reward 1") {
    Suite suite = load_suite_file(testutil::suite_path());
    const CompositionalTask* dentist = nullptr;
    for (const auto& t : suite.tasks)
        if (t.id == "sc_dentist_reminder") dentist = &t;
    REQUIRE(dentist != nullptr);
    Goal g = Goal::from_task(*dentist);

    EnvState s = clean();
    s = step(s, Action::tap("icon.notes")).state;
    s = step(s, Action::tap("btn.new")).state;
    s = step(s, Action::tap("in.title")).state;
    s = step(s, Action::type_text("dentist")).state;
    s = step(s, Action::tap("btn.save")).state;
    CHECK(reward(s, g) == 1);
}

TEST_CASE("checkpoint operators cover eq, contains, count_eq and ge") {
    EnvState s = clean();
    auto cp = [](const std::string& app, const std::string& path, CheckpointOp op,
                 nlohmann::json expected) {
        return Checkpoint{"x", app, {path, op, std::move(expected)}};
    };
    CHECK(checkpoint_satisfied(s, cp("notes", "notes", CheckpointOp::CountEq, 3)));
    CHECK_FALSE(checkpoint_satisfied(s, cp("notes", "notes", CheckpointOp::CountEq, 4)));
    CHECK(checkpoint_satisfied(
        s, cp("notes", "notes[title=groceries].content", CheckpointOp::Contains, "eggs")));
    CHECK(checkpoint_satisfied(s, cp("notes", "notes[0].title", CheckpointOp::Eq, "groceries")));
    CHECK(checkpoint_satisfied(s, cp("notes", "notes[-1].title", CheckpointOp::Eq, "ideas")));
    CHECK(checkpoint_satisfied(
        s, cp("expense_ledger", "expenses[*].amount", CheckpointOp::Ge, 100)));
    CHECK_FALSE(checkpoint_satisfied(
        s, cp("expense_ledger", "expenses[*].amount", CheckpointOp::Ge, 500)));
    CHECK_FALSE(checkpoint_satisfied(
        s, cp("settings", "switches[name=wifi].on", CheckpointOp::Eq, true)));
}

TEST_CASE("unresolvable checkpoint paths raise SchemaMismatch") {
    EnvState s = clean();
    Checkpoint bad_coll{"x", "notes", {"letters", CheckpointOp::CountEq, 0}};
    CHECK_THROWS_AS(checkpoint_satisfied(s, bad_coll), SchemaMismatchError);
    Checkpoint bad_field{"x", "notes", {"notes[*].body", CheckpointOp::Contains, "x"}};
    CHECK_THROWS_AS(checkpoint_satisfied(s, bad_field), SchemaMismatchError);
    Checkpoint bad_app{"x", "browser", {"tabs", CheckpointOp::CountEq, 0}};
    CHECK_THROWS_AS(checkpoint_satisfied(s, bad_app), SchemaMismatchError);
}

TEST_CASE("step is total over random action sequences and fully deterministic") {
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        EnvState a = clean();
        EnvState b = clean();
        std::vector<Action> actions;
        std::mt19937 gen(trial * 7919 + 13);
        for (int i = 0; i < 60; ++i)
            actions.push_back(testutil::random_action(gen, testutil::candidate_ids(a)));
        for (const auto& act : actions) {
            a = step(a, act).state;
            b = step(b, act).state;
        }
        CHECK(state_hash(a) == state_hash(b));
        CHECK(a.step_count == 60);
    }
}

TEST_CASE("the env never refuses steps past any horizon") {
    EnvState s = clean();
    const int horizon = 20;
    for (int i = 0; i < horizon + 10; ++i) s = step(s, Action::swipe(SwipeDir::Up)).state;
    CHECK(s.step_count == horizon + 10);
}

TEST_CASE("hand-written snapshots with unknown foreground stay steppable") {
    EnvState s = clean();
    nlohmann::json j = s.to_json_value();
    j["foreground"] = "launcher_widget";
    EnvState odd = EnvState::from_json_value(j, s.device);
    CHECK(step(odd, Action::tap("anything")).report.noop);
    CHECK(step(odd, Action::type_text("x")).report.noop);
    EnvState back = step(odd, Action::back()).state;
    CHECK(back.foreground == "home");
}

TEST_CASE("states round-trip through their serialized form") {
    EnvState s = clean();
    s = step(s, Action::tap("icon.expense_ledger")).state;
    s = step(s, Action::tap("btn.add")).state;
    s = step(s, Action::tap("in.amount")).state;
    s = step(s, Action::type_text("7.25")).state;
    EnvState back = EnvState::from_json_value(s.to_json_value(), s.device);
    CHECK(state_hash(back) == state_hash(s));
}

TEST_CASE("back chains reach the home screen from any reachable state") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        EnvState s = clean();
        for (int i = 0; i < 20; ++i)
            s = step(s, testutil::random_action(rng, testutil::candidate_ids(s))).state;
        int presses = 0;
        while (s.foreground != "home" && presses < 10) {
            s = step(s, Action::back()).state;
            ++presses;
        }
        CHECK(s.foreground == "home");
    }
}

TEST_CASE("element ids stay unique in every reachable observation") {
    std::mt19937 rng(91);
    for (int trial = 0; trial < 80; ++trial) {
        EnvState s = clean();
        for (int i = 0; i < 25; ++i) {
            s = step(s, testutil::random_action(rng, testutil::candidate_ids(s))).state;
            std::set<std::string> seen;
            for (const auto& e : observe(s).elements)
                CHECK_MESSAGE(seen.insert(e.id).second, "duplicate element id " << e.id);
        }
    }
}

TEST_CASE("app definitions are validated at load time") {
    nlohmann::json broken = nlohmann::json::parse(R"({
        "id": "junk", "home_screen": "main",
        "screens": {"main": {"elements": []}},
        "transitions": [{"screen": "main", "element": "x", "push": "nowhere"}]
    })");
    CHECK_THROWS_AS(load_app_machine(broken), Error);

    broken = nlohmann::json::parse(R"({
        "id": "junk", "home_screen": "ghost",
        "screens": {"main": {"elements": []}}
    })");
    CHECK_THROWS_AS(load_app_machine(broken), Error);

    broken = nlohmann::json::parse(R"({
        "id": "junk", "home_screen": "main",
        "collections": {"items": {"fields": ["a"]}},
        "seed_records": {"items": [{"b": 1}]},
        "screens": {"main": {"elements": []}}
    })");
    CHECK_THROWS_AS(load_app_machine(broken), Error);
}

TEST_CASE("validate_against_device flags unknown environments and paths") {
    Suite suite = load_suite_file(testutil::suite_path());
    CompositionalTask t = suite.tasks[0];
    t.subtasks[0].environment = "browser";
    CHECK_FALSE(validate_against_device(t, *testutil::device()).ok());
    t = suite.tasks[0];
    t.checkpoints[0].predicate.path = "frequencies[name=wifi].on";
    CHECK_FALSE(validate_against_device(t, *testutil::device()).ok());
    CHECK(validate_against_device(suite.tasks[0], *testutil::device()).ok());
}
