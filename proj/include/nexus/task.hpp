#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nexus/logic.hpp"

namespace nexus {

/// A self-contained instruction unit: what to do, with which parameters, in
/// which app environment. The environment is a registered app id or "system".
struct AtomicSubtaskSpec {
    std::string id;
    std::string command;
    std::map<std::string, std::string> params;
    std::string environment;
};

enum class CheckpointOp { Eq, Contains, CountEq, Ge };

/// A comparison over one app's data store, addressed by a path expression:
///   collection                     (record count, for count_eq)
///   collection[*].field            (every record's field value)
///   collection[3].field            (index; negative counts from the end)
///   collection[name=wifi].field    (records whose `name` field stringifies to "wifi")
/// Predicates are existential over the resolved value set.
struct CheckpointPredicate {
    std::string path;
    CheckpointOp op = CheckpointOp::Eq;
    nlohmann::json expected;
};

/// Ground-truth probe used by the judge; tied to one logic leaf via subtask_id.
struct Checkpoint {
    std::string subtask_id;
    std::string app;
    CheckpointPredicate predicate;
};

enum class CompositionType { SimpleConcatenation, ContextTransition, DeepDive };

struct CompositionalTask {
    std::string id;
    std::string instruction;
    std::vector<AtomicSubtaskSpec> subtasks;
    std::vector<std::pair<std::string, std::string>> dependencies;  // (before, after)
    LogicExpr logic;
    CompositionType composition_type = CompositionType::SimpleConcatenation;
    std::vector<Checkpoint> checkpoints;
    int optimal_steps = 1;
};

/// Instruction skeleton with named {placeholder}s and finite value domains.
struct TaskTemplate {
    std::string id;
    std::string instruction;
    std::map<std::string, std::vector<std::string>> placeholders;
    std::vector<AtomicSubtaskSpec> subtasks;
    std::vector<std::pair<std::string, std::string>> dependencies;
    LogicExpr logic;
    CompositionType composition_type = CompositionType::SimpleConcatenation;
    std::vector<Checkpoint> checkpoints;
    int optimal_steps = 1;
};

struct ValidationFinding {
    enum class Severity { Error, Warning } severity = Severity::Error;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationFinding> findings;

    bool ok() const;  // no Error-severity findings
    std::vector<std::string> errors() const;
    std::vector<std::string> warnings() const;
};

/// Structural validation: dependency graph is a DAG over declared subtask ids,
/// logic leaves resolve, commands non-empty, arity constraints hold. A declared
/// ContextTransition with an empty dependency set draws a consistency warning.
ValidationReport validate(const CompositionalTask& task);

/// Fills every {placeholder} in the template's instruction, subtask fields and
/// checkpoints. Pure: identical arguments yield byte-identical tasks. Throws
/// MissingBindingError / ValueOutOfDomainError.
CompositionalTask instantiate(const TaskTemplate& tmpl,
                              const std::map<std::string, std::string>& bindings,
                              long seed);

const char* to_string(CompositionType t);
const char* to_string(CheckpointOp op);
CompositionType composition_type_from_string(const std::string& s);
CheckpointOp checkpoint_op_from_string(const std::string& s);

void to_json(nlohmann::json& j, const AtomicSubtaskSpec& s);
void from_json(const nlohmann::json& j, AtomicSubtaskSpec& s);
void to_json(nlohmann::json& j, const Checkpoint& c);
void from_json(const nlohmann::json& j, Checkpoint& c);
void to_json(nlohmann::json& j, const CompositionalTask& t);
void from_json(const nlohmann::json& j, CompositionalTask& t);
void to_json(nlohmann::json& j, const TaskTemplate& t);
void from_json(const nlohmann::json& j, TaskTemplate& t);

}  // namespace nexus
