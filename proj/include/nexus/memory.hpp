#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nexus/env.hpp"

namespace nexus {

struct StepLog {
    std::string reasoning;
    Action action;
    std::optional<std::string> reflection;
};

struct StopClaim {
    bool completed = false;
    std::string note;
};

struct ActResult {
    bool completed = false;
    std::vector<StepLog> step_logs;
    std::optional<StopClaim> stop;
};

struct ThinkResult {
    std::string text;
    bool failed = false;
};

struct ToolResult {
    std::string status;
};

using ResultVariant = std::variant<ActResult, ThinkResult, ToolResult>;

struct MemoryEntry {
    long index = 0;
    std::string instruction;
    ResultVariant result;
};

/// Chronological, append-only record of executed subtasks. Entry indices are
/// contiguous from 0; entries are never mutated or removed.
class ProcessMemory {
  public:
    const MemoryEntry& append(std::string instruction, ResultVariant result);

    const std::vector<MemoryEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const MemoryEntry& at(size_t i) const { return entries_.at(i); }

  private:
    std::vector<MemoryEntry> entries_;
};

struct RenderOptions {
    // Replaces ThinkResult texts with nothing; a fault-injection hook for
    // probing whether intermediate information is load-bearing.
    bool blank_think_texts = false;
};

/// Renders memory oldest-to-newest as "[i] instr -> summary(result)" within
/// char_budget (>= 256, else BudgetTooSmallError).
///
/// When the full rendering does not fit, detail is shed in stages: act entries
/// lose their per-step lines first, then the oldest act/tool entries are
/// dropped entirely, then (only when nothing else remains) think entries are
/// dropped oldest-first; a final hard truncation guarantees the budget.
/// ThinkResult texts are always included verbatim while present.
std::string render_context(const ProcessMemory& memory, size_t char_budget,
                           const RenderOptions& opts = {});

void to_json(nlohmann::json& j, const ResultVariant& r);
void from_json(const nlohmann::json& j, ResultVariant& r);
void to_json(nlohmann::json& j, const MemoryEntry& e);
void from_json(const nlohmann::json& j, MemoryEntry& e);

}  // namespace nexus
