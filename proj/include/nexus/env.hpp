#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nexus/app_machine.hpp"
#include "nexus/task.hpp"

namespace nexus {

enum class SwipeDir { Up, Down, Left, Right };

/// The device input alphabet. Every value is a legal argument to step();
/// invalid targets degrade to no-ops that still consume a step.
struct Action {
    enum class Kind { Tap, Type, Swipe, Back, Home, Stop };
    Kind kind = Kind::Home;
    std::string target;             // Tap
    std::string text;               // Type / Stop answer
    bool has_answer = false;        // Stop carries an answer
    SwipeDir dir = SwipeDir::Up;

    static Action tap(std::string element_id);
    static Action type_text(std::string text);
    static Action swipe(SwipeDir d);
    static Action back();
    static Action home();
    static Action stop(std::optional<std::string> answer = std::nullopt);

    std::string to_string() const;
    bool operator==(const Action& other) const;
};

void to_json(nlohmann::json& j, const Action& a);
void from_json(const nlohmann::json& j, Action& a);

const char* to_string(SwipeDir d);
SwipeDir swipe_dir_from_string(const std::string& s);

/// Per-app mutable runtime: navigation stack, typed-input buffers, list
/// selection and input focus.
struct AppRuntime {
    std::vector<std::string> screen_stack;
    std::map<std::string, std::string> buffers;
    std::map<std::string, long> selection;  // collection -> record index
    std::string focus;                      // buffer name currently focused
};

using Store = std::map<std::string, std::vector<nlohmann::json>>;

struct EnvState {
    DeviceConfigPtr device;
    std::string foreground = "home";
    std::map<std::string, AppRuntime> apps;
    std::map<std::string, Store> stores;    // app ids plus "system"
    long step_count = 0;
    long rng_seed = 0;

    nlohmann::json to_json_value() const;
    static EnvState from_json_value(const nlohmann::json& j, DeviceConfigPtr device);
};

/// Canonical state hash, stable across runs and platforms.
uint64_t state_hash(const EnvState& s);
std::string state_hash_hex(const EnvState& s);

struct ElementNode {
    std::string id;
    Role role = Role::Text;
    std::string label;
    std::optional<std::string> value;
    bool actionable = false;
};

struct Observation {
    std::string foreground;
    std::string screen;
    std::vector<ElementNode> elements;

    /// Deterministic flat rendering: one header pair then one line per element,
    ///   [<id>] <role> "<label>"( = "<value>")?( (actionable))?
    std::string flat_text() const;
};

struct EffectReport {
    bool noop = false;
    std::string detail;
};

struct StepOutcome {
    EnvState state;
    EffectReport report;
};

/// Transition function. Total and deterministic; step_count increments by
/// exactly 1 on every call.
StepOutcome step(const EnvState& s, const Action& a);

/// Pure render of the current state.
Observation observe(const EnvState& s);

struct Goal {
    std::string instruction;
    std::vector<Checkpoint> checkpoints;
    LogicExpr logic;
    int horizon = 1;

    static Goal from_task(const CompositionalTask& task,
                          std::optional<int> horizon_override = std::nullopt);
};

/// Single checkpoint probe. Throws SchemaMismatchError when the path does not
/// resolve against the app's declared store schema.
bool checkpoint_satisfied(const EnvState& s, const Checkpoint& cp);

/// Logic leaves whose checkpoints all pass. Leaves without any checkpoint are
/// vacuously satisfied.
std::set<std::string> satisfied_leaves(const EnvState& s, const Goal& g);

/// Binary task reward: evaluate_logic over the satisfied leaves. Pure in its
/// arguments; `completion_order` feeds Sequential nodes and is recorded by the
/// episode runner.
int reward(const EnvState& s, const Goal& g,
           const std::vector<std::string>& completion_order = {});

/// Checks a task's app references and checkpoint paths against the device's
/// declared schemas.
ValidationReport validate_against_device(const CompositionalTask& task,
                                         const DeviceConfig& device);

/// Snapshot registry over immutable app definitions. reset() returns the exact
/// stored state; the "clean" snapshot (seed records, everything at home) is
/// always registered.
class Environment {
  public:
    explicit Environment(DeviceConfigPtr device);

    EnvState reset(const std::string& snapshot_id) const;
    void register_snapshot(const std::string& id, const EnvState& s);
    void load_snapshot_file(const std::string& id, const std::string& path);
    bool has_snapshot(const std::string& id) const { return snapshots_.count(id) > 0; }
    DeviceConfigPtr device() const { return device_; }

    static EnvState clean_state(DeviceConfigPtr device);

  private:
    DeviceConfigPtr device_;
    std::map<std::string, nlohmann::json> snapshots_;
};

}  // namespace nexus
