#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nexus {

enum class SubtaskKind { Act, Think, Tool };
const char* to_string(SubtaskKind k);

struct Subtask {
    int id = 0;
    SubtaskKind kind = SubtaskKind::Act;
    std::string instruction;
};

enum class PlanTerminal { Done, Infeasible };
const char* to_string(PlanTerminal t);

/// Scheduler output: ordered subtasks, or a terminal verdict with no subtasks.
struct Plan {
    std::vector<Subtask> subtasks;
    std::optional<PlanTerminal> terminal;

    bool is_terminal() const { return terminal.has_value(); }
};

/// Parses the line-oriented plan grammar:
///   N. [ACT|THINK|TOOL] <instruction>     (N strictly increasing from 1)
/// or a single line `DONE` / `INFEASIBLE`. Tags are case-insensitive and
/// whitespace-tolerant. Anything else raises MalformedPlanError carrying the
/// offending line.
Plan parse_plan(const std::string& text);

/// Warnings for subtask instructions that are not self-contained (dangling
/// references like "the result above"). Advisory only; logged, never fatal.
std::vector<std::string> lint_plan(const Plan& plan);

void to_json(nlohmann::json& j, const Plan& p);
void from_json(const nlohmann::json& j, Plan& p);

struct SchedulerConfig {
    int max_global_subtasks = 20;
    int per_subtask_step_budget = 10;        // the act executor's step limit H
    std::optional<int> episode_step_budget;  // defaults to the goal horizon
    int malformed_retry_limit = 1;
    int navigator_history_window = 5;
    size_t memory_char_budget = 8192;
    bool blank_think_in_context = false;     // fault-injection hook
};

void to_json(nlohmann::json& j, const SchedulerConfig& c);
void from_json(const nlohmann::json& j, SchedulerConfig& c);

}  // namespace nexus
