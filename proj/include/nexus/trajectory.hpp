#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nexus {

/// One trajectory log record. Serialized as one JSON object per line with
/// exactly these fields: {seq, kind, payload, wall_ms, infer_ms, tokens_in,
/// tokens_out}.
struct Event {
    long seq = 0;
    std::string kind;
    nlohmann::json payload;
    double wall_ms = 0.0;
    double infer_ms = 0.0;
    long tokens_in = 0;
    long tokens_out = 0;
};

void to_json(nlohmann::json& j, const Event& e);
void from_json(const nlohmann::json& j, Event& e);

enum class TerminationReason { Successful, Premature, BudgetExceeded, DeemedImpossible, Collapse };
const char* to_string(TerminationReason r);
TerminationReason termination_reason_from_string(const std::string& s);

/// Per-episode execution log. Event kinds:
///   meta          - task id, snapshot, config snapshot, backend identities
///   planner_call  - prompt, response, parsed plan or parse error
///   dispatch      - head subtask handed to the executor
///   nav_call      - navigator prompt/response
///   analyst_call  - analyst prompt/response
///   env_step      - action, effect report, state hash, newly satisfied leaves
///   tool_call     - tool name and status
///   mem_append    - appended memory entry
///   final         - verdict, reward, termination reason, final state hash
class TrajectoryRecord {
  public:
    Event& append(std::string kind, nlohmann::json payload);
    const std::vector<Event>& events() const { return events_; }

    std::vector<const Event*> events_of_kind(const std::string& kind) const;
    const Event* final_event() const;

    std::string task_id() const;
    TerminationReason termination_reason() const;
    int judged_reward() const;
    long env_step_count() const;

    std::string to_jsonl() const;
    static TrajectoryRecord from_jsonl(const std::string& text);
    static TrajectoryRecord load_file(const std::string& path);
    void save_file(const std::string& path) const;

  private:
    std::vector<Event> events_;
};

/// Per-episode clock. Wall time advances only through explicit credit, so
/// scripted runs (which report fixed inference latencies) produce identical
/// timestamps on every run.
class VirtualClock {
  public:
    double now_ms() const { return now_ms_; }
    void advance_seconds(double s) { now_ms_ += s * 1000.0; }

  private:
    double now_ms_ = 0.0;
};

}  // namespace nexus
