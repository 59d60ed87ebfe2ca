#include "nexus/task.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "nexus/errors.hpp"

namespace nexus {

bool ValidationReport::ok() const {
    return std::none_of(findings.begin(), findings.end(), [](const ValidationFinding& f) {
        return f.severity == ValidationFinding::Severity::Error;
    });
}

std::vector<std::string> ValidationReport::errors() const {
    std::vector<std::string> out;
    for (const auto& f : findings)
        if (f.severity == ValidationFinding::Severity::Error) out.push_back(f.message);
    return out;
}

std::vector<std::string> ValidationReport::warnings() const {
    std::vector<std::string> out;
    for (const auto& f : findings)
        if (f.severity == ValidationFinding::Severity::Warning) out.push_back(f.message);
    return out;
}

namespace {

void check_logic_arity(const LogicExpr& e, ValidationReport& report) {
    if (e.kind != LogicKind::Leaf) {
        if ((e.kind == LogicKind::Conjunctive || e.kind == LogicKind::Disjunctive) &&
            e.children.size() < 2) {
            report.findings.push_back(
                {ValidationFinding::Severity::Error,
                 std::string(e.kind == LogicKind::Conjunctive ? "conjunctive" : "disjunctive") +
                     " node has fewer than 2 children"});
        }
        if (e.children.empty() && e.kind != LogicKind::Leaf) {
            report.findings.push_back(
                {ValidationFinding::Severity::Error, "non-leaf logic node has no children"});
        }
        for (const auto& c : e.children) check_logic_arity(c, report);
    }
}

// Kahn's algorithm; leftover nodes sit on at least one cycle.
bool is_dag(const std::vector<std::string>& ids,
            const std::vector<std::pair<std::string, std::string>>& edges) {
    std::unordered_map<std::string, int> indegree;
    std::unordered_map<std::string, std::vector<std::string>> out;
    for (const auto& id : ids) indegree[id] = 0;
    for (const auto& [a, b] : edges) {
        out[a].push_back(b);
        indegree[b]++;
    }
    std::deque<std::string> queue;
    for (const auto& [id, d] : indegree)
        if (d == 0) queue.push_back(id);
    size_t seen = 0;
    while (!queue.empty()) {
        std::string n = queue.front();
        queue.pop_front();
        ++seen;
        for (const auto& m : out[n])
            if (--indegree[m] == 0) queue.push_back(m);
    }
    return seen == indegree.size();
}

}  // namespace

ValidationReport validate(const CompositionalTask& task) {
    ValidationReport report;
    auto error = [&](const std::string& m) {
        report.findings.push_back({ValidationFinding::Severity::Error, m});
    };
    auto warn = [&](const std::string& m) {
        report.findings.push_back({ValidationFinding::Severity::Warning, m});
    };

    std::set<std::string> ids;
    for (const auto& s : task.subtasks) {
        if (s.id.empty()) error("subtask with empty id");
        if (!ids.insert(s.id).second) error("duplicate subtask id: " + s.id);
        if (s.command.empty()) error("subtask " + s.id + " has empty command");
        if (s.environment.empty()) error("subtask " + s.id + " has empty environment");
    }
    if (task.subtasks.empty()) error("task has no subtasks");
    if (task.optimal_steps < 1) error("optimal_steps must be >= 1");

    for (const auto& [a, b] : task.dependencies) {
        if (!ids.count(a)) error("dependency endpoint not a declared subtask id: " + a);
        if (!ids.count(b)) error("dependency endpoint not a declared subtask id: " + b);
    }
    std::vector<std::string> id_list(ids.begin(), ids.end());
    if (!is_dag(id_list, task.dependencies)) error("dependency graph contains a cycle");

    for (const auto& leaf : task.logic.leaf_ids()) {
        if (!ids.count(leaf)) error("logic leaf references undeclared subtask id: " + leaf);
    }
    check_logic_arity(task.logic, report);

    for (const auto& cp : task.checkpoints) {
        if (!ids.count(cp.subtask_id))
            error("checkpoint references undeclared subtask id: " + cp.subtask_id);
        if (cp.app.empty()) error("checkpoint with empty app");
        if (cp.predicate.path.empty()) error("checkpoint with empty path");
    }

    if (task.composition_type == CompositionType::ContextTransition &&
        task.dependencies.empty()) {
        warn("task declared ContextTransition but its dependency set is empty");
    }
    return report;
}

namespace {

// Substitutes {name} occurrences. Unbound placeholders raise MissingBindingError.
std::string substitute(const std::string& text,
                       const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            size_t close = text.find('}', i + 1);
            if (close == std::string::npos) {
                out += text[i++];
                continue;
            }
            std::string name = text.substr(i + 1, close - i - 1);
            auto it = bindings.find(name);
            if (it == bindings.end())
                throw MissingBindingError("no binding for placeholder {" + name + "}");
            out += it->second;
            i = close + 1;
        } else {
            out += text[i++];
        }
    }
    return out;
}

}  // namespace

CompositionalTask instantiate(const TaskTemplate& tmpl,
                              const std::map<std::string, std::string>& bindings,
                              long seed) {
    for (const auto& [name, domain] : tmpl.placeholders) {
        auto it = bindings.find(name);
        if (it == bindings.end())
            throw MissingBindingError("no binding for placeholder {" + name + "}");
        if (std::find(domain.begin(), domain.end(), it->second) == domain.end())
            throw ValueOutOfDomainError("value '" + it->second +
                                        "' not in the domain of placeholder {" + name + "}");
    }

    CompositionalTask task;
    std::ostringstream id;
    id << tmpl.id;
    for (const auto& [name, domain] : tmpl.placeholders) id << "." << bindings.at(name);
    id << "#" << seed;
    task.id = id.str();
    task.instruction = substitute(tmpl.instruction, bindings);
    task.composition_type = tmpl.composition_type;
    task.optimal_steps = tmpl.optimal_steps;
    task.dependencies = tmpl.dependencies;
    task.logic = tmpl.logic;
    for (const auto& s : tmpl.subtasks) {
        AtomicSubtaskSpec filled = s;
        filled.command = substitute(s.command, bindings);
        filled.environment = substitute(s.environment, bindings);
        for (auto& [k, v] : filled.params) v = substitute(v, bindings);
        task.subtasks.push_back(std::move(filled));
    }
    for (const auto& cp : tmpl.checkpoints) {
        Checkpoint filled = cp;
        filled.predicate.path = substitute(cp.predicate.path, bindings);
        if (cp.predicate.expected.is_string())
            filled.predicate.expected = substitute(cp.predicate.expected.get<std::string>(), bindings);
        task.checkpoints.push_back(std::move(filled));
    }
    return task;
}

const char* to_string(CompositionType t) {
    switch (t) {
        case CompositionType::SimpleConcatenation: return "SimpleConcatenation";
        case CompositionType::ContextTransition: return "ContextTransition";
        case CompositionType::DeepDive: return "DeepDive";
    }
    return "SimpleConcatenation";
}

const char* to_string(CheckpointOp op) {
    switch (op) {
        case CheckpointOp::Eq: return "eq";
        case CheckpointOp::Contains: return "contains";
        case CheckpointOp::CountEq: return "count_eq";
        case CheckpointOp::Ge: return "ge";
    }
    return "eq";
}

CompositionType composition_type_from_string(const std::string& s) {
    if (s == "SimpleConcatenation") return CompositionType::SimpleConcatenation;
    if (s == "ContextTransition") return CompositionType::ContextTransition;
    if (s == "DeepDive") return CompositionType::DeepDive;
    throw Error("unknown composition_type: " + s);
}

CheckpointOp checkpoint_op_from_string(const std::string& s) {
    if (s == "eq") return CheckpointOp::Eq;
    if (s == "contains") return CheckpointOp::Contains;
    if (s == "count_eq") return CheckpointOp::CountEq;
    if (s == "ge") return CheckpointOp::Ge;
    throw Error("unknown checkpoint operator: " + s);
}

void to_json(nlohmann::json& j, const AtomicSubtaskSpec& s) {
    j = {{"id", s.id}, {"command", s.command}, {"params", s.params}, {"environment", s.environment}};
}

void from_json(const nlohmann::json& j, AtomicSubtaskSpec& s) {
    s.id = j.at("id").get<std::string>();
    s.command = j.at("command").get<std::string>();
    s.params = j.value("params", std::map<std::string, std::string>{});
    s.environment = j.at("environment").get<std::string>();
}

void to_json(nlohmann::json& j, const Checkpoint& c) {
    j = {{"subtask_id", c.subtask_id},
         {"app", c.app},
         {"predicate",
          {{"path", c.predicate.path},
           {"op", to_string(c.predicate.op)},
           {"expected", c.predicate.expected}}}};
}

void from_json(const nlohmann::json& j, Checkpoint& c) {
    c.subtask_id = j.at("subtask_id").get<std::string>();
    c.app = j.at("app").get<std::string>();
    const auto& p = j.at("predicate");
    c.predicate.path = p.at("path").get<std::string>();
    c.predicate.op = checkpoint_op_from_string(p.at("op").get<std::string>());
    c.predicate.expected = p.at("expected");
}

void to_json(nlohmann::json& j, const CompositionalTask& t) {
    j = {{"id", t.id},
         {"instruction", t.instruction},
         {"subtasks", t.subtasks},
         {"dependencies", t.dependencies},
         {"logic", t.logic},
         {"composition_type", to_string(t.composition_type)},
         {"checkpoints", t.checkpoints},
         {"optimal_steps", t.optimal_steps}};
}

void from_json(const nlohmann::json& j, CompositionalTask& t) {
    t.id = j.at("id").get<std::string>();
    t.instruction = j.at("instruction").get<std::string>();
    t.subtasks = j.at("subtasks").get<std::vector<AtomicSubtaskSpec>>();
    t.dependencies =
        j.value("dependencies", std::vector<std::pair<std::string, std::string>>{});
    t.logic = j.at("logic").get<LogicExpr>();
    t.composition_type = composition_type_from_string(j.at("composition_type").get<std::string>());
    t.checkpoints = j.value("checkpoints", std::vector<Checkpoint>{});
    t.optimal_steps = j.at("optimal_steps").get<int>();
}

void to_json(nlohmann::json& j, const TaskTemplate& t) {
    j = {{"id", t.id},
         {"instruction", t.instruction},
         {"placeholders", t.placeholders},
         {"subtasks", t.subtasks},
         {"dependencies", t.dependencies},
         {"logic", t.logic},
         {"composition_type", to_string(t.composition_type)},
         {"checkpoints", t.checkpoints},
         {"optimal_steps", t.optimal_steps}};
}

void from_json(const nlohmann::json& j, TaskTemplate& t) {
    t.id = j.at("id").get<std::string>();
    t.instruction = j.at("instruction").get<std::string>();
    t.placeholders = j.at("placeholders").get<std::map<std::string, std::vector<std::string>>>();
    t.subtasks = j.at("subtasks").get<std::vector<AtomicSubtaskSpec>>();
    t.dependencies =
        j.value("dependencies", std::vector<std::pair<std::string, std::string>>{});
    t.logic = j.at("logic").get<LogicExpr>();
    t.composition_type = composition_type_from_string(j.at("composition_type").get<std::string>());
    t.checkpoints = j.value("checkpoints", std::vector<Checkpoint>{});
    t.optimal_steps = j.at("optimal_steps").get<int>();
}

}  // namespace nexus
