#include "nexus/backend.hpp"

#include <chrono>
#include <fstream>
#include <regex>

#include <httplib.h>

#include "nexus/errors.hpp"

namespace nexus {

const char* to_string(AgentRole r) {
    switch (r) {
        case AgentRole::Planner: return "planner";
        case AgentRole::Navigator: return "navigator";
        case AgentRole::Analyst: return "analyst";
    }
    return "planner";
}

std::string apply_response_template(const std::string& template_text, const std::string& prompt) {
    std::string out;
    size_t i = 0;
    while (i < template_text.size()) {
        if (template_text.compare(i, 4, "{re:") == 0) {
            // Pattern runs to the brace that closes the placeholder; nested
            // braces inside the pattern are tracked by depth.
            size_t j = i + 4;
            int depth = 1;
            while (j < template_text.size() && depth > 0) {
                if (template_text[j] == '{') ++depth;
                if (template_text[j] == '}') --depth;
                ++j;
            }
            if (depth != 0) throw Error("unterminated {re:...} placeholder");
            const std::string pattern = template_text.substr(i + 4, j - i - 5);
            std::smatch m;
            std::string captured;
            if (std::regex_search(prompt, m, std::regex(pattern)))
                captured = m.size() > 1 ? m[1].str() : m[0].str();
            out += captured;
            i = j;
        } else {
            out += template_text[i++];
        }
    }
    return out;
}

namespace {

RoleScript parse_role_script(const nlohmann::json& j) {
    RoleScript script;
    script.cycle = j.value("cycle", false);
    for (const auto& r : j.at("responses")) {
        ScriptEntry entry;
        if (r.is_string()) {
            entry.template_text = r.get<std::string>();
        } else {
            entry.template_text = r.at("template").get<std::string>();
            entry.latency_s = r.value("latency_s", 0.0);
            entry.tokens_in = r.value("tokens_in", 0L);
            entry.tokens_out = r.value("tokens_out", 0L);
        }
        script.responses.push_back(std::move(entry));
    }
    return script;
}

std::map<std::string, RoleScript> parse_role_block(const nlohmann::json& j) {
    std::map<std::string, RoleScript> out;
    for (const auto& [role, spec] : j.items()) out[role] = parse_role_script(spec);
    return out;
}

class ScriptedSession : public TextBackend {
  public:
    ScriptedSession(const RoleScript* script, CallDefaults defaults, std::string identity)
        : script_(script), defaults_(defaults), identity_(std::move(identity)) {}

    BackendResponse complete(const std::string& prompt) override {
        if (!script_ || script_->responses.empty())
            throw Error("scripted backend has no responses for this role");
        size_t idx = cursor_;
        if (idx >= script_->responses.size()) {
            if (!script_->cycle)
                throw Error("scripted backend exhausted after " + std::to_string(cursor_) +
                            " responses");
            idx = cursor_ % script_->responses.size();
        }
        ++cursor_;
        const ScriptEntry& entry = script_->responses[idx];
        BackendResponse resp;
        resp.text = apply_response_template(entry.template_text, prompt);
        resp.infer_seconds = entry.latency_s != 0.0 ? entry.latency_s : defaults_.latency_s;
        resp.tokens_in = entry.tokens_in != 0 ? entry.tokens_in : defaults_.tokens_in;
        resp.tokens_out = entry.tokens_out != 0 ? entry.tokens_out : defaults_.tokens_out;
        return resp;
    }

    std::string identity() const override { return identity_; }

  private:
    const RoleScript* script_;
    CallDefaults defaults_;
    std::string identity_;
    size_t cursor_ = 0;
};

}  // namespace

ScriptTable ScriptTable::load(const nlohmann::json& j) {
    ScriptTable table;
    table.identity_ = j.value("identity", std::string("scripted"));
    if (j.contains("tasks")) {
        for (const auto& [task_id, block] : j.at("tasks").items())
            table.tasks_[task_id] = parse_role_block(block);
    }
    if (j.contains("default")) table.defaults_ = parse_role_block(j.at("default"));
    if (j.contains("call_defaults")) {
        for (const auto& [role, d] : j.at("call_defaults").items()) {
            table.call_defaults_[role] = {d.value("latency_s", 0.0), d.value("tokens_in", 0L),
                                          d.value("tokens_out", 0L)};
        }
    }
    return table;
}

ScriptTable ScriptTable::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open script table: " + path);
    nlohmann::json j;
    in >> j;
    return load(j);
}

const RoleScript* ScriptTable::find(const std::string& task_id, AgentRole role) const {
    const std::string role_name = to_string(role);
    auto t = tasks_.find(task_id);
    if (t != tasks_.end()) {
        auto r = t->second.find(role_name);
        if (r != t->second.end()) return &r->second;
    }
    auto d = defaults_.find(role_name);
    return d == defaults_.end() ? nullptr : &d->second;
}

std::unique_ptr<TextBackend> ScriptTable::make_session(const std::string& task_id,
                                                       AgentRole role) const {
    const RoleScript* script = find(task_id, role);
    if (!script)
        throw Error("script table has no " + std::string(to_string(role)) + " responses for task " +
                    task_id);
    CallDefaults defaults;
    auto it = call_defaults_.find(to_string(role));
    if (it != call_defaults_.end()) defaults = it->second;
    return std::make_unique<ScriptedSession>(script, defaults, identity_ + ":" + to_string(role));
}

RemoteBackend::RemoteBackend(std::string endpoint, std::string identity)
    : identity_(std::move(identity)) {
    size_t scheme = endpoint.find("://");
    size_t path_start =
        endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
        base_ = endpoint;
        path_ = "/";
    } else {
        base_ = endpoint.substr(0, path_start);
        path_ = endpoint.substr(path_start);
    }
}

BackendResponse RemoteBackend::complete(const std::string& prompt) {
    httplib::Client client(base_);
    client.set_read_timeout(60, 0);
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path_, prompt, "text/plain; charset=utf-8");
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
    if (!res || res->status != 200)
        throw Error("remote backend " + base_ + path_ + " failed: " +
                    (res ? "status " + std::to_string(res->status) : "no response"));
    BackendResponse resp;
    resp.text = res->body;
    resp.infer_seconds = elapsed.count();
    if (res->has_header("X-Tokens-In"))
        resp.tokens_in = std::stol(res->get_header_value("X-Tokens-In"));
    if (res->has_header("X-Tokens-Out"))
        resp.tokens_out = std::stol(res->get_header_value("X-Tokens-Out"));
    return resp;
}

}  // namespace nexus
