#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "nexus/backend.hpp"
#include "nexus/env.hpp"
#include "nexus/memory.hpp"
#include "nexus/plan.hpp"
#include "nexus/trajectory.hpp"

namespace nexus {

/// Logging surface shared by all executors. Deliberately narrower than
/// EpisodeContext: functions that must not touch the environment (exec_think)
/// accept only this.
class TraceSink {
  public:
    virtual ~TraceSink() = default;
    virtual Event& log(std::string kind, nlohmann::json payload) = 0;
    virtual Event& log_call(std::string kind, const std::string& prompt,
                            const BackendResponse& resp, nlohmann::json extra) = 0;
};

/// Everything one episode owns: env state, goal, memory, trajectory, clock,
/// and checkpoint-satisfaction tracking (the completion order fed to
/// Sequential logic is recorded here, after every env step).
class EpisodeContext : public TraceSink {
  public:
    EnvState state;
    std::optional<Goal> goal;
    ProcessMemory memory;
    TrajectoryRecord trajectory;
    VirtualClock clock;
    SchedulerConfig config;
    std::vector<std::string> completion_order;
    std::set<std::string> satisfied;
    long episode_step_budget = 0;

    long env_steps_used() const { return state.step_count - initial_step_count_; }
    bool step_budget_left() const { return env_steps_used() < episode_step_budget; }

    void begin(EnvState initial);
    /// Steps the env, logs the event and updates checkpoint satisfaction.
    EffectReport apply_env_step(const Action& a);

    Event& log(std::string kind, nlohmann::json payload) override;
    Event& log_call(std::string kind, const std::string& prompt, const BackendResponse& resp,
                    nlohmann::json extra) override;

  private:
    long initial_step_count_ = 0;
};

/// Parsed navigator reply.
struct NavDecision {
    enum class Kind { Act, Stop, Malformed } kind = Kind::Malformed;
    Action action;
    StopClaim claim;
    std::string reasoning;
    std::optional<std::string> reflection;
    std::string error;
};

/// Parses the navigator wire grammar: an optional reasoning line followed by
///   ACTION: Tap(<id>) | Type("<text>") | Swipe(<dir>) | Back | Home
///         | Stop(completed=<true|false>, "<note>")
/// and an optional trailing `REFLECTION: ...` line.
NavDecision parse_navigator_response(const std::string& text);

std::string navigator_prompt(const std::string& instruction, const Observation& obs,
                             const std::vector<StepLog>& history, int history_window);
std::string analyst_prompt(const std::string& instruction, const Observation& obs,
                           const std::string& memory_rendering);

struct ActOutcome {
    ActResult result;
    long steps_used = 0;
    // The navigator proposed an action past the episode step budget; the
    // runner turns this into Budget Exceeded.
    bool episode_budget_hit = false;
};

/// Runs one act subtask: observe -> navigator -> env step, up to `step_limit`
/// env steps. Stop ends the subtask without consuming a step; a malformed
/// navigator reply ends it with completed=false. Never throws for agent
/// failures.
ActOutcome exec_act(EpisodeContext& ctx, const std::string& instruction, int step_limit,
                    TextBackend& navigator, int history_window);

/// Runs one think subtask. Takes no environment handle: reasoning cannot
/// mutate the device. Empty analyst output counts as failure; a reply of
/// `FAILED: ...` sets the failed flag with the rest as text.
ThinkResult exec_think(const Observation& obs, const std::string& instruction,
                       const std::string& memory_rendering, TextBackend& analyst,
                       TraceSink& trace);

/// Named deterministic env operations; the default registry provides HOME.
class ToolRegistry {
  public:
    using ToolFn = std::function<std::string(EpisodeContext&)>;

    static ToolRegistry with_defaults();
    void register_tool(const std::string& name, ToolFn fn);
    bool has(const std::string& name) const;

    struct Outcome {
        ToolResult result;
        bool episode_budget_hit = false;
    };
    /// Applies a registered tool. Throws UnknownToolError for a registry miss.
    Outcome apply(const std::string& name, EpisodeContext& ctx) const;

  private:
    std::map<std::string, ToolFn> tools_;
};

/// Uppercased, trimmed tool name from a tool subtask instruction.
std::string tool_name_from_instruction(const std::string& instruction);

}  // namespace nexus
