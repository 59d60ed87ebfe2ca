#include "nexus/trajectory.hpp"

#include <fstream>
#include <sstream>

#include "nexus/errors.hpp"

namespace nexus {

void to_json(nlohmann::json& j, const Event& e) {
    j = {{"seq", e.seq},           {"kind", e.kind},
         {"payload", e.payload},   {"wall_ms", e.wall_ms},
         {"infer_ms", e.infer_ms}, {"tokens_in", e.tokens_in},
         {"tokens_out", e.tokens_out}};
}

void from_json(const nlohmann::json& j, Event& e) {
    e.seq = j.at("seq").get<long>();
    e.kind = j.at("kind").get<std::string>();
    e.payload = j.at("payload");
    e.wall_ms = j.at("wall_ms").get<double>();
    e.infer_ms = j.at("infer_ms").get<double>();
    e.tokens_in = j.at("tokens_in").get<long>();
    e.tokens_out = j.at("tokens_out").get<long>();
}

const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::Successful: return "Successful";
        case TerminationReason::Premature: return "Premature";
        case TerminationReason::BudgetExceeded: return "BudgetExceeded";
        case TerminationReason::DeemedImpossible: return "DeemedImpossible";
        case TerminationReason::Collapse: return "Collapse";
    }
    return "Collapse";
}

TerminationReason termination_reason_from_string(const std::string& s) {
    if (s == "Successful") return TerminationReason::Successful;
    if (s == "Premature") return TerminationReason::Premature;
    if (s == "BudgetExceeded") return TerminationReason::BudgetExceeded;
    if (s == "DeemedImpossible") return TerminationReason::DeemedImpossible;
    if (s == "Collapse") return TerminationReason::Collapse;
    throw Error("unknown termination reason: " + s);
}

Event& TrajectoryRecord::append(std::string kind, nlohmann::json payload) {
    Event e;
    e.seq = static_cast<long>(events_.size());
    e.kind = std::move(kind);
    e.payload = std::move(payload);
    events_.push_back(std::move(e));
    return events_.back();
}

std::vector<const Event*> TrajectoryRecord::events_of_kind(const std::string& kind) const {
    std::vector<const Event*> out;
    for (const auto& e : events_)
        if (e.kind == kind) out.push_back(&e);
    return out;
}

const Event* TrajectoryRecord::final_event() const {
    for (auto it = events_.rbegin(); it != events_.rend(); ++it)
        if (it->kind == "final") return &*it;
    return nullptr;
}

std::string TrajectoryRecord::task_id() const {
    for (const auto& e : events_)
        if (e.kind == "meta") return e.payload.value("task_id", std::string{});
    return {};
}

TerminationReason TrajectoryRecord::termination_reason() const {
    const Event* f = final_event();
    if (!f) throw Error("trajectory has no final event");
    return termination_reason_from_string(f->payload.at("termination_reason").get<std::string>());
}

int TrajectoryRecord::judged_reward() const {
    const Event* f = final_event();
    if (!f) throw Error("trajectory has no final event");
    return f->payload.at("reward").get<int>();
}

long TrajectoryRecord::env_step_count() const {
    long n = 0;
    for (const auto& e : events_)
        if (e.kind == "env_step") ++n;
    return n;
}

std::string TrajectoryRecord::to_jsonl() const {
    std::ostringstream out;
    for (const auto& e : events_) {
        nlohmann::json j = e;
        out << j.dump() << "\n";
    }
    return out.str();
}

TrajectoryRecord TrajectoryRecord::from_jsonl(const std::string& text) {
    TrajectoryRecord rec;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rec.events_.push_back(nlohmann::json::parse(line).get<Event>());
    }
    return rec;
}

TrajectoryRecord TrajectoryRecord::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trajectory: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_jsonl(buf.str());
}

void TrajectoryRecord::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write trajectory: " + path);
    out << to_jsonl();
}

}  // namespace nexus
