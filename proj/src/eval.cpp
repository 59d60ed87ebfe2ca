#include "nexus/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "nexus/errors.hpp"

namespace nexus {

long step_budget(long optimal_steps) {
    if (optimal_steps < 1) throw Error("optimal_steps must be >= 1");
    return 2 * optimal_steps;
}

TerminationReason classify_termination(TerminalVerdict v, int reward) {
    switch (v) {
        case TerminalVerdict::Done:
            return reward == 1 ? TerminationReason::Successful : TerminationReason::Premature;
        case TerminalVerdict::Infeasible: return TerminationReason::DeemedImpossible;
        case TerminalVerdict::Collapse: return TerminationReason::Collapse;
        case TerminalVerdict::Budget: return TerminationReason::BudgetExceeded;
    }
    return TerminationReason::BudgetExceeded;
}

void PricingTable::set(const std::string& identity, PricingRates rates) {
    if (rates.usd_per_m_in < 0 || rates.usd_per_m_out < 0)
        throw Error("pricing rates must be non-negative");
    rates_[identity] = rates;
}

bool PricingTable::has(const std::string& identity) const { return rates_.count(identity) > 0; }

const PricingRates& PricingTable::get(const std::string& identity) const {
    auto it = rates_.find(identity);
    if (it == rates_.end()) throw MissingPricingError("no pricing row for backend: " + identity);
    return it->second;
}

PricingTable PricingTable::from_json(const nlohmann::json& j) {
    PricingTable t;
    for (const auto& [identity, rates] : j.items()) {
        t.set(identity, {rates.at("usd_per_m_in").get<double>(),
                         rates.at("usd_per_m_out").get<double>()});
    }
    return t;
}

nlohmann::json PricingTable::to_json_value() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [identity, r] : rates_)
        j[identity] = {{"usd_per_m_in", r.usd_per_m_in}, {"usd_per_m_out", r.usd_per_m_out}};
    return j;
}

namespace {

// Maps a model-call event kind to the backend identity recorded in the meta
// event.
std::string identity_for_kind(const TrajectoryRecord& record, const std::string& kind) {
    for (const auto& e : record.events()) {
        if (e.kind != "meta") continue;
        const auto& backends = e.payload.at("backends");
        if (kind == "planner_call") return backends.at("planner").get<std::string>();
        if (kind == "nav_call") return backends.at("navigator").get<std::string>();
        if (kind == "analyst_call") return backends.at("analyst").get<std::string>();
    }
    return {};
}

bool is_call_event(const Event& e) {
    return e.kind == "planner_call" || e.kind == "nav_call" || e.kind == "analyst_call";
}

double total_cost_usd(const TrajectoryRecord& record, const PricingTable& pricing) {
    double total = 0.0;
    for (const auto& e : record.events()) {
        if (!is_call_event(e)) continue;
        if (e.tokens_in == 0 && e.tokens_out == 0) continue;
        const PricingRates& r = pricing.get(identity_for_kind(record, e.kind));
        total += (static_cast<double>(e.tokens_in) * r.usd_per_m_in +
                  static_cast<double>(e.tokens_out) * r.usd_per_m_out) /
                 1e6;
    }
    return total;
}

}  // namespace

std::optional<double> compute_cost(const TrajectoryRecord& record, const PricingTable& pricing) {
    const double total = total_cost_usd(record, pricing);
    if (total == 0.0) return 0.0;
    const long steps = record.env_step_count();
    if (steps == 0) return std::nullopt;
    return total / static_cast<double>(steps);
}

std::optional<double> compute_latency(const TrajectoryRecord& record) {
    const long steps = record.env_step_count();
    if (steps == 0) return std::nullopt;
    double total_s = 0.0;
    for (const auto& e : record.events())
        if (is_call_event(e)) total_s += e.infer_ms / 1000.0;
    return total_s / static_cast<double>(steps);
}

double compute_pgr(double weak, double strong_ceiling, double bridged) {
    if (strong_ceiling == weak)
        throw ZeroGapError("strong ceiling equals weak performance; the gap is zero");
    return 100.0 * (bridged - weak) / (strong_ceiling - weak);
}

const char* to_string(FailureSignature::Kind k) {
    switch (k) {
        case FailureSignature::Kind::RepeatedIdenticalAction: return "RepeatedIdenticalAction";
        case FailureSignature::Kind::AppOscillation: return "AppOscillation";
        case FailureSignature::Kind::ZeroProgressStop: return "ZeroProgressStop";
    }
    return "RepeatedIdenticalAction";
}

std::vector<FailureSignature> scan_signatures(const TrajectoryRecord& record,
                                              const SignatureThresholds& thresholds) {
    std::vector<FailureSignature> out;
    struct StepView {
        long seq;
        nlohmann::json action;
        std::string foreground;
        bool progressed;
    };
    std::vector<StepView> steps;
    for (const auto& e : record.events()) {
        if (e.kind != "env_step") continue;
        steps.push_back({e.seq, e.payload.at("action"),
                         e.payload.value("foreground", std::string{}),
                         !e.payload.value("newly_satisfied", nlohmann::json::array()).empty()});
    }

    // Repeated identical action.
    size_t i = 0;
    while (i < steps.size()) {
        size_t j = i + 1;
        while (j < steps.size() && steps[j].action == steps[i].action) ++j;
        if (j - i >= static_cast<size_t>(thresholds.repeated_action_min)) {
            out.push_back({FailureSignature::Kind::RepeatedIdenticalAction, steps[i].seq,
                           steps[j - 1].seq});
        }
        i = j;
    }

    // App oscillation over non-home foreground segments.
    struct Segment {
        std::string app;
        long begin_seq;
        long end_seq;
        size_t first_step;
        size_t last_step;
    };
    std::vector<Segment> segments;
    for (size_t k = 0; k < steps.size(); ++k) {
        if (steps[k].foreground == "home" || steps[k].foreground.empty()) continue;
        if (!segments.empty() && segments.back().app == steps[k].foreground) {
            segments.back().end_seq = steps[k].seq;
            segments.back().last_step = k;
        } else {
            segments.push_back({steps[k].foreground, steps[k].seq, steps[k].seq, k, k});
        }
    }
    const size_t run_min = static_cast<size_t>(thresholds.oscillation_switches) + 1;
    size_t s = 0;
    while (s + 1 < segments.size()) {
        const std::string& a = segments[s].app;
        const std::string& b = segments[s + 1].app;
        size_t e = s + 1;
        while (e + 1 < segments.size() &&
               segments[e + 1].app == (segments[e].app == a ? b : a))
            ++e;
        const size_t run_len = e - s + 1;
        if (run_len >= run_min) {
            bool progressed = false;
            for (size_t k = segments[s].first_step; k <= segments[e].last_step; ++k)
                if (steps[k].progressed) progressed = true;
            if (!progressed) {
                out.push_back({FailureSignature::Kind::AppOscillation, segments[s].begin_seq,
                               segments[e].end_seq});
            }
        }
        s = e;
    }

    // Terminal done without a single env step.
    const Event* f = record.final_event();
    if (f && f->payload.value("verdict", std::string{}) == "done" && steps.empty()) {
        out.push_back({FailureSignature::Kind::ZeroProgressStop, f->seq, f->seq});
    }
    return out;
}

void to_json(nlohmann::json& j, const TaskOutcome& o) {
    j = {{"task_id", o.task_id},
         {"composition_type", o.composition_type},
         {"reason", to_string(o.reason)},
         {"reward", o.reward},
         {"env_steps", o.env_steps},
         {"infer_seconds", o.infer_seconds},
         {"cost_usd", o.cost_usd}};
}

void from_json(const nlohmann::json& j, TaskOutcome& o) {
    o.task_id = j.at("task_id").get<std::string>();
    o.composition_type = j.at("composition_type").get<std::string>();
    o.reason = termination_reason_from_string(j.at("reason").get<std::string>());
    o.reward = j.at("reward").get<int>();
    o.env_steps = j.at("env_steps").get<long>();
    o.infer_seconds = j.at("infer_seconds").get<double>();
    o.cost_usd = j.at("cost_usd").get<double>();
}

TaskOutcome outcome_from_record(const TrajectoryRecord& record, const PricingTable* pricing) {
    TaskOutcome o;
    o.task_id = record.task_id();
    for (const auto& e : record.events())
        if (e.kind == "meta")
            o.composition_type = e.payload.value("composition_type", std::string{});
    o.reason = record.termination_reason();
    o.reward = record.judged_reward();
    o.env_steps = record.env_step_count();
    for (const auto& e : record.events())
        if (is_call_event(e)) o.infer_seconds += e.infer_ms / 1000.0;
    if (pricing) o.cost_usd = total_cost_usd(record, *pricing);
    return o;
}

MetricsReport MetricsReport::from_outcomes(std::string suite, std::vector<TaskOutcome> outcomes,
                                           bool have_cost) {
    MetricsReport r;
    r.suite = std::move(suite);
    r.outcomes = std::move(outcomes);
    r.episodes = static_cast<long>(r.outcomes.size());
    const char* reasons[] = {"Successful", "Premature", "BudgetExceeded", "DeemedImpossible",
                             "Collapse"};
    for (const char* name : reasons) r.termination_pct[name] = 0.0;
    if (r.episodes == 0) return r;

    long successes = 0;
    std::map<std::string, long> reason_count;
    std::map<std::string, long> type_successes;
    long total_steps = 0;
    double total_infer = 0.0;
    double total_cost = 0.0;
    for (const auto& o : r.outcomes) {
        reason_count[to_string(o.reason)]++;
        if (o.reason == TerminationReason::Successful) {
            ++successes;
            type_successes[o.composition_type]++;
        }
        r.episodes_by_type[o.composition_type]++;
        total_steps += o.env_steps;
        total_infer += o.infer_seconds;
        total_cost += o.cost_usd;
    }
    r.success_rate = 100.0 * static_cast<double>(successes) / static_cast<double>(r.episodes);
    for (const char* name : reasons)
        r.termination_pct[name] =
            100.0 * static_cast<double>(reason_count[name]) / static_cast<double>(r.episodes);
    for (const auto& [type, n] : r.episodes_by_type)
        r.success_rate_by_type[type] =
            100.0 * static_cast<double>(type_successes[type]) / static_cast<double>(n);
    if (total_steps > 0) {
        r.latency_sec_per_step = total_infer / static_cast<double>(total_steps);
        if (have_cost) r.cost_usd_per_step = total_cost / static_cast<double>(total_steps);
    } else if (have_cost && total_cost == 0.0) {
        r.cost_usd_per_step = 0.0;
    }
    return r;
}

namespace {

std::string fmt(double v, int prec) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(prec) << v;
    return out.str();
}

std::string pad(const std::string& s, size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string MetricsReport::to_text() const {
    std::ostringstream out;
    out << "suite: " << suite << "\n";
    out << "episodes: " << episodes << "\n\n";
    out << pad("metric", 42) << "value\n";
    out << pad("success_rate_pct", 42) << fmt(success_rate, 2) << "\n";
    for (const auto& [reason, pct] : termination_pct)
        out << pad("termination_" + reason + "_pct", 42) << fmt(pct, 2) << "\n";
    out << pad("latency_sec_per_step", 42)
        << (latency_sec_per_step ? fmt(*latency_sec_per_step, 4) : "n/a") << "\n";
    out << pad("cost_usd_per_step", 42)
        << (cost_usd_per_step ? fmt(*cost_usd_per_step, 6) : "n/a") << "\n";
    for (const auto& [type, rate] : success_rate_by_type)
        out << pad("success_rate_" + type + "_pct", 42) << fmt(rate, 2) << " ("
            << episodes_by_type.at(type) << " episodes)\n";
    out << "\n";
    size_t idw = 4;
    for (const auto& o : outcomes) idw = std::max(idw, o.task_id.size());
    out << pad("task", idw + 2) << pad("type", 21) << pad("reason", 18) << pad("reward", 8)
        << pad("steps", 7) << pad("infer_s", 9) << "cost_usd\n";
    for (const auto& o : outcomes) {
        out << pad(o.task_id, idw + 2) << pad(o.composition_type, 21)
            << pad(to_string(o.reason), 18) << pad(std::to_string(o.reward), 8)
            << pad(std::to_string(o.env_steps), 7) << pad(fmt(o.infer_seconds, 3), 9)
            << fmt(o.cost_usd, 6) << "\n";
    }
    return out.str();
}

std::string MetricsReport::to_csv() const {
    std::ostringstream out;
    out << "task_id,composition_type,reason,reward,env_steps,infer_seconds,cost_usd\n";
    for (const auto& o : outcomes) {
        out << o.task_id << "," << o.composition_type << "," << to_string(o.reason) << ","
            << o.reward << "," << o.env_steps << "," << fmt(o.infer_seconds, 6) << ","
            << fmt(o.cost_usd, 9) << "\n";
    }
    return out.str();
}

nlohmann::json MetricsReport::to_json_value() const {
    nlohmann::json j = {{"suite", suite},
                        {"episodes", episodes},
                        {"success_rate_pct", success_rate},
                        {"termination_pct", termination_pct},
                        {"success_rate_by_type", success_rate_by_type},
                        {"episodes_by_type", episodes_by_type},
                        {"tasks", outcomes}};
    if (latency_sec_per_step) j["latency_sec_per_step"] = *latency_sec_per_step;
    if (cost_usd_per_step) j["cost_usd_per_step"] = *cost_usd_per_step;
    return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    const bool have_cost = j.contains("cost_usd_per_step");
    MetricsReport r = from_outcomes(j.at("suite").get<std::string>(),
                                    j.at("tasks").get<std::vector<TaskOutcome>>(), have_cost);
    return r;
}

}  // namespace nexus
