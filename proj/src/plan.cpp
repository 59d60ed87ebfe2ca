#include "nexus/plan.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "nexus/errors.hpp"

namespace nexus {

const char* to_string(SubtaskKind k) {
    switch (k) {
        case SubtaskKind::Act: return "act";
        case SubtaskKind::Think: return "think";
        case SubtaskKind::Tool: return "tool";
    }
    return "act";
}

const char* to_string(PlanTerminal t) {
    return t == PlanTerminal::Done ? "done" : "infeasible";
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return s;
}

}  // namespace

Plan parse_plan(const std::string& text) {
    Plan plan;
    std::istringstream in(text);
    std::string raw;
    std::vector<std::string> lines;
    while (std::getline(in, raw)) {
        std::string line = trim(raw);
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw MalformedPlanError("empty plan text", "");

    if (lines.size() == 1) {
        const std::string word = upper(lines[0]);
        if (word == "DONE") {
            plan.terminal = PlanTerminal::Done;
            return plan;
        }
        if (word == "INFEASIBLE") {
            plan.terminal = PlanTerminal::Infeasible;
            return plan;
        }
    }

    int prev = 0;
    for (const auto& line : lines) {
        size_t i = 0;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
        if (i == 0 || i >= line.size() || line[i] != '.')
            throw MalformedPlanError("expected `N. [ACT|THINK|TOOL] instruction`: " + line, line);
        const int n = std::stoi(line.substr(0, i));
        if (n <= prev)
            throw MalformedPlanError(
                "subtask numbers must be strictly increasing from 1: " + line, line);
        if (prev == 0 && n != 1)
            throw MalformedPlanError("first subtask must be numbered 1: " + line, line);
        prev = n;
        size_t rest = line.find_first_not_of(" \t", i + 1);
        if (rest == std::string::npos || line[rest] != '[')
            throw MalformedPlanError("missing [ACT|THINK|TOOL] tag: " + line, line);
        size_t close = line.find(']', rest);
        if (close == std::string::npos)
            throw MalformedPlanError("unterminated tag: " + line, line);
        const std::string tag = upper(trim(line.substr(rest + 1, close - rest - 1)));
        SubtaskKind kind;
        if (tag == "ACT")
            kind = SubtaskKind::Act;
        else if (tag == "THINK")
            kind = SubtaskKind::Think;
        else if (tag == "TOOL")
            kind = SubtaskKind::Tool;
        else
            throw MalformedPlanError("unknown subtask tag [" + tag + "]: " + line, line);
        std::string instruction = trim(line.substr(close + 1));
        if (instruction.empty())
            throw MalformedPlanError("empty subtask instruction: " + line, line);
        plan.subtasks.push_back({n, kind, std::move(instruction)});
    }
    return plan;
}

std::vector<std::string> lint_plan(const Plan& plan) {
    static const char* kDanglingPhrases[] = {"the result above", "the previous result",
                                             "as computed above", "the above",
                                             "the earlier step", "see above"};
    std::vector<std::string> warnings;
    for (const auto& s : plan.subtasks) {
        std::string lower = s.instruction;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        for (const char* phrase : kDanglingPhrases) {
            if (lower.find(phrase) != std::string::npos) {
                warnings.push_back("subtask " + std::to_string(s.id) +
                                   " is not self-contained: references \"" + phrase + "\"");
                break;
            }
        }
    }
    return warnings;
}

void to_json(nlohmann::json& j, const Plan& p) {
    nlohmann::json subtasks = nlohmann::json::array();
    for (const auto& s : p.subtasks)
        subtasks.push_back(
            {{"id", s.id}, {"kind", to_string(s.kind)}, {"instruction", s.instruction}});
    j = {{"subtasks", subtasks}};
    if (p.terminal) j["terminal"] = to_string(*p.terminal);
}

void from_json(const nlohmann::json& j, Plan& p) {
    p.subtasks.clear();
    p.terminal.reset();
    for (const auto& s : j.at("subtasks")) {
        Subtask st;
        st.id = s.at("id").get<int>();
        const std::string kind = s.at("kind").get<std::string>();
        st.kind = kind == "act" ? SubtaskKind::Act
                                : (kind == "think" ? SubtaskKind::Think : SubtaskKind::Tool);
        st.instruction = s.at("instruction").get<std::string>();
        p.subtasks.push_back(std::move(st));
    }
    if (j.contains("terminal"))
        p.terminal = j.at("terminal").get<std::string>() == "done" ? PlanTerminal::Done
                                                                   : PlanTerminal::Infeasible;
}

void to_json(nlohmann::json& j, const SchedulerConfig& c) {
    j = {{"max_global_subtasks", c.max_global_subtasks},
         {"per_subtask_step_budget", c.per_subtask_step_budget},
         {"malformed_retry_limit", c.malformed_retry_limit},
         {"navigator_history_window", c.navigator_history_window},
         {"memory_char_budget", c.memory_char_budget},
         {"blank_think_in_context", c.blank_think_in_context}};
    if (c.episode_step_budget) j["episode_step_budget"] = *c.episode_step_budget;
}

void from_json(const nlohmann::json& j, SchedulerConfig& c) {
    c.max_global_subtasks = j.value("max_global_subtasks", 20);
    c.per_subtask_step_budget = j.value("per_subtask_step_budget", 10);
    c.malformed_retry_limit = j.value("malformed_retry_limit", 1);
    c.navigator_history_window = j.value("navigator_history_window", 5);
    c.memory_char_budget = j.value("memory_char_budget", size_t{8192});
    c.blank_think_in_context = j.value("blank_think_in_context", false);
    if (j.contains("episode_step_budget"))
        c.episode_step_budget = j.at("episode_step_budget").get<int>();
}

}  // namespace nexus
