#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace nexus {

/// Element roles of the rendered tree.
enum class Role { Button, Text, Input, ListItem, Toggle, Icon };

const char* to_string(Role r);

/// Declarative screen element. Depending on kind, one template expands to one
/// node (button/text/input) or to one node per data-store record (list/toggle
/// lists).
struct ElementTemplate {
    enum class Kind { Button, Text, Input, List, ToggleList };
    Kind kind = Kind::Button;
    std::string id;              // button/text/input
    std::string label;
    std::string source;          // text: "selected:<collection>.<field>" | "const:<text>"
    std::string buffer;          // input: buffer name written by Type
    std::string collection;      // list/toggle_list
    std::string id_prefix;       // list item ids: "<prefix>.<suffix>"
    std::string id_field;        // suffix = sanitized record field; empty -> record index
    std::string label_template;  // list labels, "{field}" substitution
    std::string value_field;     // toggle_list: bool field rendered on/off
    // Optional list filter: keep records whose filter_field equals the
    // same-named field of the currently selected record of filter_collection.
    std::string filter_field;
    std::string filter_collection;
    std::string filter_selected_field;
};

/// One field of an appended record and where its value comes from:
/// "buffer:<name>", "selection:<collection>.<field>", "const:<text>", or a
/// typed JSON constant.
struct FieldSource {
    std::string from;
    bool as_number = false;
    std::optional<nlohmann::json> const_value;
};

struct Effect {
    enum class Op { ClearBuffers, ClearBuffer, Select, Append };
    Op op = Op::ClearBuffers;
    std::string buffer;                        // ClearBuffer
    std::string collection;                    // Select / Append
    std::map<std::string, FieldSource> fields; // Append
};

struct Transition {
    std::string screen;
    std::string element;         // exact element id, or
    std::string element_prefix;  // any id "<prefix>.<suffix>"
    std::string push;            // push target screen
    std::string replace;         // replace top of stack
    bool pop = false;
    std::vector<Effect> effects;
};

struct Screen {
    std::string id;
    std::vector<ElementTemplate> elements;
};

struct CollectionSchema {
    std::vector<std::string> fields;
};

/// A scriptable app: screen graph, data-store schema and seed records.
struct AppMachine {
    std::string id;
    std::string label;
    std::string home_screen;
    std::map<std::string, CollectionSchema> collections;
    std::map<std::string, std::vector<nlohmann::json>> seed_records;
    std::map<std::string, Screen> screens;
    std::vector<Transition> transitions;

    const Screen& screen(const std::string& id) const;
    const Transition* find_transition(const std::string& screen_id,
                                      const std::string& element_id) const;
};

AppMachine load_app_machine(const nlohmann::json& j);
AppMachine load_app_machine_file(const std::string& path);

/// The registered apps of a simulated device, in fixed launcher order.
class DeviceConfig {
  public:
    explicit DeviceConfig(std::vector<AppMachine> apps);

    const std::vector<AppMachine>& apps() const { return apps_; }
    const AppMachine* find(const std::string& app_id) const;
    bool has(const std::string& app_id) const { return find(app_id) != nullptr; }

    /// Stable fingerprint of the app definitions; folded into state hashes.
    uint64_t fingerprint() const { return fingerprint_; }

    /// Schema lookup covering registered apps plus the built-in "system"
    /// pseudo-store (collections: answers{text}).
    const std::map<std::string, CollectionSchema>* schemas_for(const std::string& app_id) const;

  private:
    std::vector<AppMachine> apps_;
    std::map<std::string, size_t> index_;
    std::map<std::string, CollectionSchema> system_schema_;
    uint64_t fingerprint_ = 0;
};

using DeviceConfigPtr = std::shared_ptr<const DeviceConfig>;

/// Loads every *.json app file in a directory (sorted by filename).
DeviceConfigPtr load_device_config(const std::string& apps_dir);

/// Lowercases and maps non-alphanumerics to '_' for use in element ids.
std::string sanitize_id_fragment(const std::string& s);

/// FNV-1a over bytes; the project-wide stable hash.
uint64_t fnv1a64(const std::string& bytes, uint64_t seed = 1469598103934665603ull);

}  // namespace nexus
