#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace nexus {

/// Node kinds of a compound-logic expression tree.
///
/// Leaf nodes reference atomic subtask ids; the other kinds combine children:
///   Sequential   - all children complete, in the declared order
///   Conjunctive  - all children complete (AND)
///   Disjunctive  - any child completes (OR)
///   Hierarchical - grouping under a parent label; completes like AND
enum class LogicKind { Leaf, Sequential, Conjunctive, Disjunctive, Hierarchical };

struct LogicExpr {
    LogicKind kind = LogicKind::Leaf;
    std::string leaf_id;                // set when kind == Leaf
    std::string label;                  // Hierarchical parent label, grouping only
    std::vector<LogicExpr> children;    // non-leaf kinds

    static LogicExpr leaf(std::string id);
    static LogicExpr sequential(std::vector<LogicExpr> children);
    static LogicExpr conjunctive(std::vector<LogicExpr> children);
    static LogicExpr disjunctive(std::vector<LogicExpr> children);
    static LogicExpr hierarchical(std::string label, std::vector<LogicExpr> children);

    /// All leaf ids in the subtree, depth-first.
    std::vector<std::string> leaf_ids() const;
};

void to_json(nlohmann::json& j, const LogicExpr& e);
void from_json(const nlohmann::json& j, LogicExpr& e);

/// Evaluates a logic expression against the set of completed subtask ids.
///
/// `completion_order` lists completed ids in the order they were observed to
/// complete; it is consulted only by Sequential nodes. An id that is completed
/// but absent from the order list imposes no ordering constraint. Throws
/// UnknownIdError when `completed` contains an id that is not a leaf of the
/// expression.
bool evaluate_logic(const LogicExpr& expr, const std::set<std::string>& completed,
                    const std::vector<std::string>& completion_order);

}  // namespace nexus
