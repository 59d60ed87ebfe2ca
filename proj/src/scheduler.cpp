#include "nexus/scheduler.hpp"

#include <sstream>

#include "nexus/errors.hpp"

namespace nexus {

std::string planner_prompt(const Goal& goal, const Observation& obs,
                           const std::string& memory_rendering) {
    std::ostringstream out;
    out << "GOAL:\n" << goal.instruction << "\n\n";
    out << "OBSERVATION:\n" << obs.flat_text() << "\n";
    out << "MEMORY:\n" << (memory_rendering.empty() ? "(empty)" : memory_rendering) << "\n\n";
    out << "Reply with a numbered plan, one subtask per line as"
           " `N. [ACT|THINK|TOOL] <instruction>`, or exactly `DONE` or `INFEASIBLE`.\n";
    return out.str();
}

Plan plan_subtasks(TextBackend& planner, const Observation& obs, const Goal& goal,
                   const ProcessMemory& memory, const SchedulerConfig& config,
                   TraceSink* trace) {
    RenderOptions opts;
    opts.blank_think_texts = config.blank_think_in_context;
    const std::string base_prompt =
        planner_prompt(goal, obs, render_context(memory, config.memory_char_budget, opts));
    std::string prompt = base_prompt;
    std::string last_error;
    for (int attempt = 0; attempt <= config.malformed_retry_limit; ++attempt) {
        const BackendResponse resp = planner.complete(prompt);
        try {
            Plan plan = parse_plan(resp.text);
            if (trace) {
                nlohmann::json extra = {{"attempt", attempt}, {"plan", plan}};
                const auto lint = lint_plan(plan);
                if (!lint.empty()) extra["lint"] = lint;
                trace->log_call("planner_call", prompt, resp, std::move(extra));
            }
            return plan;
        } catch (const MalformedPlanError& e) {
            last_error = e.what();
            if (trace)
                trace->log_call("planner_call", prompt, resp,
                                {{"attempt", attempt}, {"parse_error", last_error}});
            prompt = base_prompt + "\nPARSE ERROR:\n" + last_error +
                     "\nResubmit the full plan in the required format.\n";
        }
    }
    throw PlannerCollapseError("planner collapsed after retries: " + last_error);
}

namespace {

void write_final(EpisodeContext& ctx, const std::string& verdict, int judged_reward,
                 TerminationReason reason) {
    ctx.log("final", {{"verdict", verdict},
                      {"reward", judged_reward},
                      {"termination_reason", to_string(reason)},
                      {"env_steps", ctx.env_steps_used()},
                      {"state_hash", state_hash_hex(ctx.state)},
                      {"completion_order", ctx.completion_order}});
}

int judge(const EpisodeContext& ctx) {
    return ctx.goal ? reward(ctx.state, *ctx.goal, ctx.completion_order) : 0;
}

}  // namespace

TrajectoryRecord run_episode(const CompositionalTask& task, EnvState initial,
                             EpisodeBackends& backends, const SchedulerConfig& config,
                             const ToolRegistry& tools, nlohmann::json meta_extra) {
    EpisodeContext ctx;
    ctx.config = config;
    ctx.goal = Goal::from_task(task);
    ctx.episode_step_budget = config.episode_step_budget.value_or(ctx.goal->horizon);
    ctx.begin(std::move(initial));

    nlohmann::json meta = std::move(meta_extra);
    meta["task_id"] = task.id;
    meta["composition_type"] = to_string(task.composition_type);
    meta["optimal_steps"] = task.optimal_steps;
    meta["episode_step_budget"] = ctx.episode_step_budget;
    meta["scheduler_config"] = config;
    meta["backends"] = {{"planner", backends.planner->identity()},
                        {"navigator", backends.navigator->identity()},
                        {"analyst", backends.analyst->identity()}};
    meta["initial_state_hash"] = state_hash_hex(ctx.state);
    ctx.log("meta", std::move(meta));

    RenderOptions render_opts;
    render_opts.blank_think_texts = config.blank_think_in_context;

    while (true) {
        const Observation obs = observe(ctx.state);
        Plan plan;
        try {
            plan = plan_subtasks(*backends.planner, obs, *ctx.goal, ctx.memory, config, &ctx);
        } catch (const PlannerCollapseError&) {
            write_final(ctx, "collapse", judge(ctx), TerminationReason::Collapse);
            return std::move(ctx.trajectory);
        }
        if (plan.terminal) {
            if (*plan.terminal == PlanTerminal::Done) {
                const int r = judge(ctx);
                write_final(ctx, "done", r,
                            r == 1 ? TerminationReason::Successful : TerminationReason::Premature);
            } else {
                write_final(ctx, "infeasible", judge(ctx), TerminationReason::DeemedImpossible);
            }
            return std::move(ctx.trajectory);
        }
        if (static_cast<int>(ctx.memory.size()) >= config.max_global_subtasks) {
            write_final(ctx, "budget", judge(ctx), TerminationReason::BudgetExceeded);
            return std::move(ctx.trajectory);
        }

        // Head-only dispatch; the rest of the plan is advisory lookahead and
        // lives only in the planner_call event.
        const Subtask& head = plan.subtasks.front();
        ctx.log("dispatch", {{"memory_index", ctx.memory.size()},
                             {"kind", to_string(head.kind)},
                             {"instruction", head.instruction},
                             {"lookahead", plan.subtasks.size() - 1}});

        bool budget_hit = false;
        ResultVariant result;
        switch (head.kind) {
            case SubtaskKind::Act: {
                ActOutcome out = exec_act(ctx, head.instruction, config.per_subtask_step_budget,
                                          *backends.navigator, config.navigator_history_window);
                budget_hit = out.episode_budget_hit;
                result = std::move(out.result);
                break;
            }
            case SubtaskKind::Think: {
                const std::string rendering =
                    render_context(ctx.memory, config.memory_char_budget, render_opts);
                result = exec_think(observe(ctx.state), head.instruction, rendering,
                                    *backends.analyst, ctx);
                break;
            }
            case SubtaskKind::Tool: {
                const std::string name = tool_name_from_instruction(head.instruction);
                ToolRegistry::Outcome out;
                try {
                    out = tools.apply(name, ctx);
                } catch (const UnknownToolError& e) {
                    out.result.status = std::string("error: ") + e.what();
                }
                budget_hit = out.episode_budget_hit;
                ctx.log("tool_call", {{"tool", name}, {"status", out.result.status}});
                result = std::move(out.result);
                break;
            }
        }
        const MemoryEntry& entry = ctx.memory.append(head.instruction, std::move(result));
        ctx.log("mem_append", {{"entry", entry}});

        if (budget_hit) {
            write_final(ctx, "budget", judge(ctx), TerminationReason::BudgetExceeded);
            return std::move(ctx.trajectory);
        }
    }
}

}  // namespace nexus
