#include <doctest.h>

#include "nexus/errors.hpp"
#include "nexus/plan.hpp"

using namespace nexus;

TEST_CASE("numbered subtask lines parse") {
    Plan p = parse_plan(
        "1. [ACT] open Notes and read note 'groceries'\n2. [THINK] extract the item list");
    REQUIRE(p.subtasks.size() == 2);
    CHECK_FALSE(p.is_terminal());
    CHECK(p.subtasks[0].id == 1);
    CHECK(p.subtasks[0].kind == SubtaskKind::Act);
    CHECK(p.subtasks[0].instruction == "open Notes and read note 'groceries'");
    CHECK(p.subtasks[1].kind == SubtaskKind::Think);
}

TEST_CASE("terminal verdicts parse as single lines") {
    Plan done = parse_plan("DONE");
    CHECK(done.is_terminal());
    CHECK(done.terminal == PlanTerminal::Done);
    CHECK(done.subtasks.empty());
    CHECK(parse_plan("  infeasible  \n").terminal == PlanTerminal::Infeasible);
}

TEST_CASE("tags are case-insensitive and whitespace-tolerant") {
    Plan p = parse_plan("  1.   [act]  do something\n2. [Tool]   HOME\n3. [THINK] reflect");
    REQUIRE(p.subtasks.size() == 3);
    CHECK(p.subtasks[0].kind == SubtaskKind::Act);
    CHECK(p.subtasks[1].kind == SubtaskKind::Tool);
    CHECK(p.subtasks[1].instruction == "HOME");
}

TEST_CASE("prose is rejected with the offending line attached") {
    try {
        parse_plan("step one: do stuff");
        FAIL("expected MalformedPlanError");
    } catch (const MalformedPlanError& e) {
        CHECK(e.offending_line == "step one: do stuff");
    }
}

TEST_CASE("numbering must start at 1 and strictly increase") {
    CHECK_THROWS_AS(parse_plan("2. [ACT] late start"), MalformedPlanError);
    CHECK_THROWS_AS(parse_plan("1. [ACT] a\n1. [ACT] duplicate"), MalformedPlanError);
    CHECK_THROWS_AS(parse_plan("1. [ACT] a\n3. [ACT] b\n2. [ACT] c"), MalformedPlanError);
    CHECK_NOTHROW(parse_plan("1. [ACT] a\n2. [ACT] b\n3. [ACT] c"));
}

TEST_CASE("malformed bodies are rejected") {
    CHECK_THROWS_AS(parse_plan(""), MalformedPlanError);
    CHECK_THROWS_AS(parse_plan("   \n  "), MalformedPlanError);
    CHECK_THROWS_AS(parse_plan("1. [JUMP] somewhere"), MalformedPlanError);
    CHECK_THROWS_AS(parse_plan("1. [ACT]"), MalformedPlanError);
    CHECK_THROWS_AS(parse_plan("1. [ACT unterminated tag"), MalformedPlanError);
    CHECK_THROWS_AS(parse_plan("DONE\n1. [ACT] trailing"), MalformedPlanError);
}

TEST_CASE("plans round-trip through json") {
    Plan p = parse_plan("1. [ACT] a\n2. [TOOL] HOME\n3. [THINK] t");
    nlohmann::json j = p;
    Plan back = j.get<Plan>();
    CHECK(nlohmann::json(back).dump() == j.dump());
    Plan term = parse_plan("DONE");
    nlohmann::json jt = term;
    CHECK(jt.get<Plan>().terminal == PlanTerminal::Done);
}

TEST_CASE("the plan lint flags dangling references") {
    Plan p = parse_plan("1. [ACT] open the ledger\n2. [ACT] send the result above to Yuan");
    auto warnings = lint_plan(p);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("subtask 2") != std::string::npos);
    CHECK(lint_plan(parse_plan("1. [ACT] send 'total: 143.5' to Yuan")).empty());
}

TEST_CASE("scheduler config defaults match the documented values") {
    SchedulerConfig c;
    CHECK(c.max_global_subtasks == 20);
    CHECK(c.malformed_retry_limit == 1);
    CHECK(c.navigator_history_window == 5);
    CHECK_FALSE(c.episode_step_budget.has_value());
}
