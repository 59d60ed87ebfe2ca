#include "nexus/memory.hpp"

#include <sstream>

#include "nexus/errors.hpp"

namespace nexus {

const MemoryEntry& ProcessMemory::append(std::string instruction, ResultVariant result) {
    MemoryEntry e;
    e.index = static_cast<long>(entries_.size());
    e.instruction = std::move(instruction);
    e.result = std::move(result);
    entries_.push_back(std::move(e));
    return entries_.back();
}

namespace {

enum class Detail { Full, Summary, Omitted };

std::string render_entry(const MemoryEntry& e, Detail detail, const RenderOptions& opts) {
    if (detail == Detail::Omitted) return {};
    std::ostringstream out;
    out << "[" << e.index << "] " << e.instruction << " -> ";
    if (const auto* act = std::get_if<ActResult>(&e.result)) {
        out << "act: " << (act->completed ? "completed" : "not completed") << ", "
            << act->step_logs.size() << " steps";
        if (detail == Detail::Summary && !act->step_logs.empty())
            out << ", last action " << act->step_logs.back().action.to_string();
        out << "\n";
        if (detail == Detail::Full) {
            for (size_t i = 0; i < act->step_logs.size(); ++i) {
                const auto& log = act->step_logs[i];
                out << "    step " << (i + 1) << ": " << log.reasoning << " -> "
                    << log.action.to_string() << "\n";
            }
            if (act->stop)
                out << "    stop: " << (act->stop->completed ? "completed" : "gave up") << " ("
                    << act->stop->note << ")\n";
        }
    } else if (const auto* think = std::get_if<ThinkResult>(&e.result)) {
        out << "think:";
        if (!opts.blank_think_texts) out << " " << think->text;
        if (think->failed) out << " [failed]";
        out << "\n";
    } else {
        out << "tool: " << std::get<ToolResult>(e.result).status << "\n";
    }
    return out.str();
}

std::string assemble(const std::vector<MemoryEntry>& entries, const std::vector<Detail>& detail,
                     const RenderOptions& opts) {
    std::string out;
    for (size_t i = 0; i < entries.size(); ++i) out += render_entry(entries[i], detail[i], opts);
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

}  // namespace

std::string render_context(const ProcessMemory& memory, size_t char_budget,
                           const RenderOptions& opts) {
    if (char_budget < 256)
        throw BudgetTooSmallError("render_context budget must be >= 256 characters");
    const auto& entries = memory.entries();
    if (entries.empty()) return {};

    std::vector<Detail> detail(entries.size(), Detail::Full);
    auto fits = [&] { return assemble(entries, detail, opts).size() <= char_budget; };

    if (!fits()) {
        for (size_t i = 0; i < entries.size() && !fits(); ++i) {
            if (std::holds_alternative<ActResult>(entries[i].result)) detail[i] = Detail::Summary;
        }
    }
    // Drop oldest act/tool entries before touching any think entry; thinks go
    // last, oldest first, and the newest entry survives as a hard-truncated
    // line rather than vanishing.
    for (size_t i = 0; i < entries.size() && !fits(); ++i) {
        if (!std::holds_alternative<ThinkResult>(entries[i].result)) detail[i] = Detail::Omitted;
    }
    for (size_t i = 0; i + 1 < entries.size() && !fits(); ++i) detail[i] = Detail::Omitted;

    std::string out = assemble(entries, detail, opts);
    if (out.size() > char_budget) out.resize(char_budget);
    return out;
}

void to_json(nlohmann::json& j, const ResultVariant& r) {
    if (const auto* act = std::get_if<ActResult>(&r)) {
        nlohmann::json logs = nlohmann::json::array();
        for (const auto& log : act->step_logs) {
            nlohmann::json entry = {{"reasoning", log.reasoning}, {"action", log.action}};
            if (log.reflection) entry["reflection"] = *log.reflection;
            logs.push_back(entry);
        }
        j = {{"type", "act"}, {"completed", act->completed}, {"step_logs", logs}};
        if (act->stop)
            j["stop"] = {{"completed", act->stop->completed}, {"note", act->stop->note}};
    } else if (const auto* think = std::get_if<ThinkResult>(&r)) {
        j = {{"type", "think"}, {"text", think->text}, {"failed", think->failed}};
    } else {
        j = {{"type", "tool"}, {"status", std::get<ToolResult>(r).status}};
    }
}

void from_json(const nlohmann::json& j, ResultVariant& r) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "act") {
        ActResult act;
        act.completed = j.at("completed").get<bool>();
        for (const auto& entry : j.at("step_logs")) {
            StepLog log;
            log.reasoning = entry.at("reasoning").get<std::string>();
            log.action = entry.at("action").get<Action>();
            if (entry.contains("reflection"))
                log.reflection = entry.at("reflection").get<std::string>();
            act.step_logs.push_back(std::move(log));
        }
        if (j.contains("stop"))
            act.stop = StopClaim{j.at("stop").at("completed").get<bool>(),
                                 j.at("stop").at("note").get<std::string>()};
        r = std::move(act);
    } else if (type == "think") {
        r = ThinkResult{j.at("text").get<std::string>(), j.at("failed").get<bool>()};
    } else if (type == "tool") {
        r = ToolResult{j.at("status").get<std::string>()};
    } else {
        throw Error("unknown result type: " + type);
    }
}

void to_json(nlohmann::json& j, const MemoryEntry& e) {
    j = {{"index", e.index}, {"instruction", e.instruction}, {"result", e.result}};
}

void from_json(const nlohmann::json& j, MemoryEntry& e) {
    e.index = j.at("index").get<long>();
    e.instruction = j.at("instruction").get<std::string>();
    e.result = j.at("result").get<ResultVariant>();
}

}  // namespace nexus
