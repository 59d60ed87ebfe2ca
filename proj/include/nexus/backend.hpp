#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace nexus {

enum class AgentRole { Planner, Navigator, Analyst };
const char* to_string(AgentRole r);

struct BackendResponse {
    std::string text;
    double infer_seconds = 0.0;
    long tokens_in = 0;
    long tokens_out = 0;
};

/// Text-in/text-out model surface. One instance serves one episode role;
/// instances carry no cross-call state beyond their own script cursor, so
/// distinct episodes can run concurrently on separate instances.
class TextBackend {
  public:
    virtual ~TextBackend() = default;
    virtual BackendResponse complete(const std::string& prompt) = 0;
    virtual std::string identity() const = 0;
};

struct ScriptEntry {
    std::string template_text;
    double latency_s = 0.0;
    long tokens_in = 0;
    long tokens_out = 0;
};

struct RoleScript {
    std::vector<ScriptEntry> responses;
    bool cycle = false;
};

struct CallDefaults {
    double latency_s = 0.0;
    long tokens_in = 0;
    long tokens_out = 0;
};

/// Keyed response table: task id -> role -> response sequence, with an
/// optional "default" block matching any task. Response templates may embed
/// `{re:PATTERN}` placeholders, replaced by the first capture group of PATTERN
/// applied to the incoming prompt (empty when the pattern does not match), so
/// scripted agents can echo information they were actually given.
class ScriptTable {
  public:
    static ScriptTable load(const nlohmann::json& j);
    static ScriptTable load_file(const std::string& path);

    std::unique_ptr<TextBackend> make_session(const std::string& task_id, AgentRole role) const;
    const std::string& identity() const { return identity_; }

  private:
    std::string identity_ = "scripted";
    std::map<std::string, std::map<std::string, RoleScript>> tasks_;
    std::map<std::string, RoleScript> defaults_;
    std::map<std::string, CallDefaults> call_defaults_;  // role -> defaults

    const RoleScript* find(const std::string& task_id, AgentRole role) const;
};

/// Reference remote adapter: POSTs the prompt to a local HTTP endpoint and
/// returns the response body. Token counts are read from the X-Tokens-In /
/// X-Tokens-Out reply headers when present.
class RemoteBackend : public TextBackend {
  public:
    RemoteBackend(std::string endpoint, std::string identity);
    BackendResponse complete(const std::string& prompt) override;
    std::string identity() const override { return identity_; }

  private:
    std::string base_;
    std::string path_;
    std::string identity_;
};

/// Applies `{re:PATTERN}` substitutions of `template_text` against `prompt`.
std::string apply_response_template(const std::string& template_text, const std::string& prompt);

}  // namespace nexus
