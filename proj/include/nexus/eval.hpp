#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nexus/trajectory.hpp"

namespace nexus {

/// Episode step budget from the annotated optimal step count: ceil(2x).
long step_budget(long optimal_steps);

enum class TerminalVerdict { Done, Infeasible, Budget, Collapse };

/// The five-way outcome taxonomy as a function of (verdict, judged reward).
TerminationReason classify_termination(TerminalVerdict v, int reward);

struct PricingRates {
    double usd_per_m_in = 0.0;
    double usd_per_m_out = 0.0;
};

class PricingTable {
  public:
    void set(const std::string& identity, PricingRates rates);
    bool has(const std::string& identity) const;
    const PricingRates& get(const std::string& identity) const;  // MissingPricingError

    static PricingTable from_json(const nlohmann::json& j);
    nlohmann::json to_json_value() const;

  private:
    std::map<std::string, PricingRates> rates_;
};

/// Mean inference cost in USD per env step: every model call is priced by its
/// backend's per-million-token rates and the total is divided by the env step
/// count. Returns 0 for a record with no priced tokens; absent when steps are
/// zero but cost is not.
std::optional<double> compute_cost(const TrajectoryRecord& record, const PricingTable& pricing);

/// Mean inference seconds per env step, summed over the inference-time stamps
/// of all model calls. Absent (not zero) when the record has no env steps.
std::optional<double> compute_latency(const TrajectoryRecord& record);

/// Performance Gap Recovered, in percent:
///   100 * (bridged - weak) / (strong_ceiling - weak)
/// Throws ZeroGapError when strong_ceiling == weak.
double compute_pgr(double weak, double strong_ceiling, double bridged);

struct FailureSignature {
    enum class Kind { RepeatedIdenticalAction, AppOscillation, ZeroProgressStop };
    Kind kind = Kind::RepeatedIdenticalAction;
    long span_begin = 0;  // event seq of the first involved event
    long span_end = 0;    // event seq of the last involved event
};

const char* to_string(FailureSignature::Kind k);

struct SignatureThresholds {
    int repeated_action_min = 4;     // same (action, target) this many times in a row
    int oscillation_switches = 4;    // A,B,A,B over at least this many app switches
};

/// Heuristic trajectory-signature detectors; pure functions of the record.
///   RepeatedIdenticalAction - the identical action issued >= N consecutive times
///   AppOscillation          - foreground ping-pongs A,B,A,B.. ("home" is
///                             transit and ignored) with no checkpoint newly
///                             satisfied anywhere in the span
///   ZeroProgressStop        - terminal done with zero env steps
std::vector<FailureSignature> scan_signatures(const TrajectoryRecord& record,
                                              const SignatureThresholds& thresholds = {});

struct TaskOutcome {
    std::string task_id;
    std::string composition_type;
    TerminationReason reason = TerminationReason::Collapse;
    int reward = 0;
    long env_steps = 0;
    double infer_seconds = 0.0;
    double cost_usd = 0.0;
};

void to_json(nlohmann::json& j, const TaskOutcome& o);
void from_json(const nlohmann::json& j, TaskOutcome& o);

/// Suite-level aggregation. Percentages are recomputed from the raw outcome
/// rows; the termination distribution always sums to 100 (one reason per
/// episode).
struct MetricsReport {
    std::string suite;
    long episodes = 0;
    double success_rate = 0.0;                        // %
    std::map<std::string, double> termination_pct;    // reason -> %
    std::optional<double> latency_sec_per_step;
    std::optional<double> cost_usd_per_step;
    std::map<std::string, double> success_rate_by_type;
    std::map<std::string, long> episodes_by_type;
    std::vector<TaskOutcome> outcomes;

    static MetricsReport from_outcomes(std::string suite, std::vector<TaskOutcome> outcomes,
                                       bool have_cost);

    std::string to_text() const;  // aligned plain-text table
    std::string to_csv() const;   // one row per episode
    nlohmann::json to_json_value() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

/// Extracts one outcome row from a finished trajectory. Cost is computed when
/// a pricing table is supplied (MissingPricingError if a priced call's backend
/// has no row).
TaskOutcome outcome_from_record(const TrajectoryRecord& record,
                                const PricingTable* pricing = nullptr);

}  // namespace nexus
