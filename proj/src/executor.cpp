#include "nexus/executor.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <sstream>

#include "nexus/errors.hpp"

namespace nexus {

void EpisodeContext::begin(EnvState initial) {
    state = std::move(initial);
    initial_step_count_ = state.step_count;
    if (goal) satisfied = satisfied_leaves(state, *goal);
}

Event& EpisodeContext::log(std::string kind, nlohmann::json payload) {
    Event& e = trajectory.append(std::move(kind), std::move(payload));
    e.wall_ms = clock.now_ms();
    return e;
}

Event& EpisodeContext::log_call(std::string kind, const std::string& prompt,
                                const BackendResponse& resp, nlohmann::json extra) {
    clock.advance_seconds(resp.infer_seconds);
    nlohmann::json payload = std::move(extra);
    payload["prompt"] = prompt;
    payload["response"] = resp.text;
    Event& e = trajectory.append(std::move(kind), std::move(payload));
    e.wall_ms = clock.now_ms();
    e.infer_ms = resp.infer_seconds * 1000.0;
    e.tokens_in = resp.tokens_in;
    e.tokens_out = resp.tokens_out;
    return e;
}

EffectReport EpisodeContext::apply_env_step(const Action& a) {
    StepOutcome out = step(state, a);
    state = std::move(out.state);
    nlohmann::json newly = nlohmann::json::array();
    if (goal) {
        for (const auto& leaf : satisfied_leaves(state, *goal)) {
            if (!satisfied.count(leaf)) {
                satisfied.insert(leaf);
                completion_order.push_back(leaf);
                newly.push_back(leaf);
            }
        }
    }
    log("env_step", {{"action", a},
                     {"noop", out.report.noop},
                     {"detail", out.report.detail},
                     {"foreground", state.foreground},
                     {"state_hash", state_hash_hex(state)},
                     {"newly_satisfied", newly}});
    return out.report;
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Parses a double-quoted string starting at `i`; supports \" and \\ escapes.
bool parse_quoted(const std::string& s, size_t& i, std::string* out) {
    if (i >= s.size() || s[i] != '"') return false;
    ++i;
    out->clear();
    while (i < s.size()) {
        if (s[i] == '\\' && i + 1 < s.size() && (s[i + 1] == '"' || s[i + 1] == '\\')) {
            *out += s[i + 1];
            i += 2;
        } else if (s[i] == '"') {
            ++i;
            return true;
        } else {
            *out += s[i++];
        }
    }
    return false;
}

bool iequals(const std::string& a, const char* b) {
    size_t n = std::strlen(b);
    if (a.size() != n) return false;
    for (size_t i = 0; i < n; ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

NavDecision malformed(const std::string& error) {
    NavDecision d;
    d.kind = NavDecision::Kind::Malformed;
    d.error = error;
    return d;
}

NavDecision parse_action_text(const std::string& text) {
    NavDecision d;
    const std::string body = trim(text);
    if (iequals(body, "Back")) {
        d.kind = NavDecision::Kind::Act;
        d.action = Action::back();
        return d;
    }
    if (iequals(body, "Home")) {
        d.kind = NavDecision::Kind::Act;
        d.action = Action::home();
        return d;
    }
    size_t open = body.find('(');
    if (open == std::string::npos || body.back() != ')')
        return malformed("unrecognized action: " + body);
    const std::string head = trim(body.substr(0, open));
    const std::string args = body.substr(open + 1, body.size() - open - 2);
    if (iequals(head, "Tap")) {
        const std::string id = trim(args);
        if (id.empty()) return malformed("Tap needs an element id");
        d.kind = NavDecision::Kind::Act;
        d.action = Action::tap(id);
        return d;
    }
    if (iequals(head, "Type")) {
        size_t i = 0;
        const std::string a = trim(args);
        std::string content;
        if (!parse_quoted(a, i, &content)) return malformed("Type needs a quoted string");
        d.kind = NavDecision::Kind::Act;
        d.action = Action::type_text(content);
        return d;
    }
    if (iequals(head, "Swipe")) {
        const std::string dir = trim(args);
        try {
            d.action = Action::swipe(swipe_dir_from_string(dir));
        } catch (const Error&) {
            return malformed("unknown swipe direction: " + dir);
        }
        d.kind = NavDecision::Kind::Act;
        return d;
    }
    if (iequals(head, "Stop")) {
        std::string a = trim(args);
        if (a.rfind("completed=", 0) != 0) return malformed("Stop needs completed=<true|false>");
        size_t comma = a.find(',');
        const std::string flag = trim(a.substr(10, comma == std::string::npos ? std::string::npos
                                                                              : comma - 10));
        if (flag != "true" && flag != "false")
            return malformed("Stop completed flag must be true or false");
        d.kind = NavDecision::Kind::Stop;
        d.claim.completed = flag == "true";
        if (comma != std::string::npos) {
            std::string rest = trim(a.substr(comma + 1));
            size_t i = 0;
            if (!parse_quoted(rest, i, &d.claim.note))
                return malformed("Stop note must be a quoted string");
        }
        return d;
    }
    return malformed("unrecognized action: " + body);
}

}  // namespace

NavDecision parse_navigator_response(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> before;
    std::string action_line;
    std::optional<std::string> reflection;
    bool seen_action = false;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (!seen_action && t.rfind("ACTION:", 0) == 0) {
            action_line = trim(t.substr(7));
            seen_action = true;
        } else if (seen_action && t.rfind("REFLECTION:", 0) == 0) {
            reflection = trim(t.substr(11));
        } else if (!seen_action) {
            if (t.rfind("REASON:", 0) == 0) t = trim(t.substr(7));
            before.push_back(t);
        }
    }
    if (!seen_action) return malformed("no ACTION: line in navigator response");
    NavDecision d = parse_action_text(action_line);
    std::string reasoning;
    for (size_t i = 0; i < before.size(); ++i) {
        if (i) reasoning += " ";
        reasoning += before[i];
    }
    d.reasoning = reasoning;
    d.reflection = reflection;
    return d;
}

std::string navigator_prompt(const std::string& instruction, const Observation& obs,
                             const std::vector<StepLog>& history, int history_window) {
    std::ostringstream out;
    out << "SUBTASK:\n" << instruction << "\n\n";
    out << "OBSERVATION:\n" << obs.flat_text() << "\n";
    out << "HISTORY:\n";
    const size_t n = history.size();
    const size_t start = n > static_cast<size_t>(history_window) ? n - history_window : 0;
    if (start == n) {
        out << "(none)\n";
    } else {
        for (size_t i = start; i < n; ++i)
            out << "- " << history[i].reasoning << " -> " << history[i].action.to_string() << "\n";
    }
    out << "\nReply with one line `ACTION: Tap(<id>) | Type(\"<text>\") | Swipe(up|down|left|right)"
           " | Back | Home | Stop(completed=<true|false>, \"<note>\")`."
           " An optional reasoning line may precede it.\n";
    return out.str();
}

std::string analyst_prompt(const std::string& instruction, const Observation& obs,
                           const std::string& memory_rendering) {
    std::ostringstream out;
    out << "THINK:\n" << instruction << "\n\n";
    out << "OBSERVATION:\n" << obs.flat_text() << "\n";
    out << "MEMORY:\n" << (memory_rendering.empty() ? "(empty)" : memory_rendering) << "\n\n";
    out << "Reply with the reasoning result as plain text, or `FAILED: <why>`.\n";
    return out.str();
}

ActOutcome exec_act(EpisodeContext& ctx, const std::string& instruction, int step_limit,
                    TextBackend& navigator, int history_window) {
    ActOutcome out;
    while (out.steps_used < step_limit) {
        const Observation obs = observe(ctx.state);
        const std::string prompt =
            navigator_prompt(instruction, obs, out.result.step_logs, history_window);
        const BackendResponse resp = navigator.complete(prompt);
        const NavDecision decision = parse_navigator_response(resp.text);
        nlohmann::json extra = {{"decision", decision.kind == NavDecision::Kind::Act
                                                 ? "act"
                                                 : decision.kind == NavDecision::Kind::Stop
                                                       ? "stop"
                                                       : "malformed"}};
        if (decision.kind == NavDecision::Kind::Act) extra["action"] = decision.action;
        if (!decision.error.empty()) extra["error"] = decision.error;
        ctx.log_call("nav_call", prompt, resp, std::move(extra));

        if (decision.kind == NavDecision::Kind::Malformed) {
            out.result.completed = false;
            out.result.stop = StopClaim{false, "navigator response malformed: " + decision.error};
            return out;
        }
        if (decision.kind == NavDecision::Kind::Stop) {
            out.result.completed = decision.claim.completed;
            out.result.stop = decision.claim;
            return out;
        }
        if (!ctx.step_budget_left()) {
            out.episode_budget_hit = true;
            out.result.completed = false;
            out.result.stop = StopClaim{false, "episode step budget exhausted"};
            return out;
        }
        ctx.apply_env_step(decision.action);
        out.result.step_logs.push_back({decision.reasoning, decision.action, decision.reflection});
        ++out.steps_used;
    }
    out.result.completed = false;
    out.result.stop = StopClaim{false, "subtask budget exhausted"};
    return out;
}

ThinkResult exec_think(const Observation& obs, const std::string& instruction,
                       const std::string& memory_rendering, TextBackend& analyst,
                       TraceSink& trace) {
    const std::string prompt = analyst_prompt(instruction, obs, memory_rendering);
    ThinkResult result;
    BackendResponse resp;
    try {
        resp = analyst.complete(prompt);
    } catch (const Error& e) {
        result.failed = true;
        result.text = std::string("analyst call failed: ") + e.what();
        trace.log("analyst_call", {{"prompt", prompt}, {"error", result.text}});
        return result;
    }
    trace.log_call("analyst_call", prompt, resp, {});
    std::string text = trim(resp.text);
    if (text.empty()) {
        result.failed = true;
        result.text = "analyst returned empty reasoning";
    } else if (text.rfind("FAILED:", 0) == 0) {
        result.failed = true;
        result.text = trim(text.substr(7));
        if (result.text.empty()) result.text = "analyst reported failure";
    } else {
        result.text = text;
    }
    return result;
}

ToolRegistry ToolRegistry::with_defaults() {
    ToolRegistry reg;
    reg.register_tool("HOME", [](EpisodeContext& ctx) {
        EffectReport r = ctx.apply_env_step(Action::home());
        return "ok: " + r.detail;
    });
    return reg;
}

void ToolRegistry::register_tool(const std::string& name, ToolFn fn) {
    tools_[name] = std::move(fn);
}

bool ToolRegistry::has(const std::string& name) const { return tools_.count(name) > 0; }

ToolRegistry::Outcome ToolRegistry::apply(const std::string& name, EpisodeContext& ctx) const {
    auto it = tools_.find(name);
    if (it == tools_.end()) throw UnknownToolError("unknown tool: " + name);
    Outcome out;
    if (!ctx.step_budget_left()) {
        out.episode_budget_hit = true;
        out.result.status = "episode step budget exhausted";
        return out;
    }
    out.result.status = it->second(ctx);
    return out;
}

std::string tool_name_from_instruction(const std::string& instruction) {
    std::string name = trim(instruction);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return name;
}

}  // namespace nexus
