#pragma once

#include <memory>
#include <string>

#include "nexus/backend.hpp"
#include "nexus/env.hpp"
#include "nexus/executor.hpp"
#include "nexus/memory.hpp"
#include "nexus/plan.hpp"
#include "nexus/task.hpp"
#include "nexus/trajectory.hpp"

namespace nexus {

struct EpisodeBackends {
    std::unique_ptr<TextBackend> planner;
    std::unique_ptr<TextBackend> navigator;
    std::unique_ptr<TextBackend> analyst;
};

std::string planner_prompt(const Goal& goal, const Observation& obs,
                           const std::string& memory_rendering);

/// One scheduling call: render inputs, query the planner, parse. Malformed
/// responses are retried up to config.malformed_retry_limit with the parse
/// error appended to the prompt; exhaustion raises PlannerCollapseError.
/// Every attempt is logged through `trace` when non-null.
Plan plan_subtasks(TextBackend& planner, const Observation& obs, const Goal& goal,
                   const ProcessMemory& memory, const SchedulerConfig& config,
                   TraceSink* trace = nullptr);

/// The full orchestration loop: observe, re-plan, dispatch only the head
/// subtask, append the result to process memory, repeat. Terminates on a
/// planner verdict (DONE judged against the checkpoints, INFEASIBLE), on the
/// episode step budget, on the global subtask cap, or on planner collapse.
/// Never throws for agent-caused failures; everything lands in the record.
TrajectoryRecord run_episode(const CompositionalTask& task, EnvState initial,
                             EpisodeBackends& backends, const SchedulerConfig& config,
                             const ToolRegistry& tools,
                             nlohmann::json meta_extra = nlohmann::json::object());

}  // namespace nexus
