#include "nexus/logic.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>

#include "nexus/errors.hpp"

namespace nexus {

LogicExpr LogicExpr::leaf(std::string id) {
    LogicExpr e;
    e.kind = LogicKind::Leaf;
    e.leaf_id = std::move(id);
    return e;
}

LogicExpr LogicExpr::sequential(std::vector<LogicExpr> children) {
    LogicExpr e;
    e.kind = LogicKind::Sequential;
    e.children = std::move(children);
    return e;
}

LogicExpr LogicExpr::conjunctive(std::vector<LogicExpr> children) {
    LogicExpr e;
    e.kind = LogicKind::Conjunctive;
    e.children = std::move(children);
    return e;
}

LogicExpr LogicExpr::disjunctive(std::vector<LogicExpr> children) {
    LogicExpr e;
    e.kind = LogicKind::Disjunctive;
    e.children = std::move(children);
    return e;
}

LogicExpr LogicExpr::hierarchical(std::string label, std::vector<LogicExpr> children) {
    LogicExpr e;
    e.kind = LogicKind::Hierarchical;
    e.label = std::move(label);
    e.children = std::move(children);
    return e;
}

static void collect_leaves(const LogicExpr& e, std::vector<std::string>& out) {
    if (e.kind == LogicKind::Leaf) {
        out.push_back(e.leaf_id);
        return;
    }
    for (const auto& c : e.children) collect_leaves(c, out);
}

std::vector<std::string> LogicExpr::leaf_ids() const {
    std::vector<std::string> out;
    collect_leaves(*this, out);
    return out;
}

static const char* kind_name(LogicKind k) {
    switch (k) {
        case LogicKind::Leaf: return "leaf";
        case LogicKind::Sequential: return "sequential";
        case LogicKind::Conjunctive: return "conjunctive";
        case LogicKind::Disjunctive: return "disjunctive";
        case LogicKind::Hierarchical: return "hierarchical";
    }
    return "leaf";
}

void to_json(nlohmann::json& j, const LogicExpr& e) {
    j = nlohmann::json::object();
    j["kind"] = kind_name(e.kind);
    if (e.kind == LogicKind::Leaf) {
        j["id"] = e.leaf_id;
        return;
    }
    if (e.kind == LogicKind::Hierarchical) j["label"] = e.label;
    j["children"] = e.children;
}

void from_json(const nlohmann::json& j, LogicExpr& e) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "leaf") {
        e = LogicExpr::leaf(j.at("id").get<std::string>());
        return;
    }
    std::vector<LogicExpr> children = j.value("children", std::vector<LogicExpr>{});
    if (kind == "sequential") {
        e = LogicExpr::sequential(std::move(children));
    } else if (kind == "conjunctive") {
        e = LogicExpr::conjunctive(std::move(children));
    } else if (kind == "disjunctive") {
        e = LogicExpr::disjunctive(std::move(children));
    } else if (kind == "hierarchical") {
        e = LogicExpr::hierarchical(j.value("label", std::string{}), std::move(children));
    } else {
        throw Error("unknown logic node kind: " + kind);
    }
}

namespace {

constexpr long kNoPosition = std::numeric_limits<long>::max();

struct EvalContext {
    const std::set<std::string>& completed;
    std::unordered_map<std::string, long> position;  // id -> index in completion_order
};

struct EvalResult {
    bool satisfied = false;
    // Position at which the subtree became complete: max of constituent leaf
    // positions (min over satisfied children for Disjunctive). kNoPosition when
    // unknown, which exempts the node from Sequential ordering checks.
    long completed_at = kNoPosition;
};

EvalResult eval(const LogicExpr& e, const EvalContext& ctx) {
    switch (e.kind) {
        case LogicKind::Leaf: {
            EvalResult r;
            r.satisfied = ctx.completed.count(e.leaf_id) > 0;
            auto it = ctx.position.find(e.leaf_id);
            r.completed_at = (r.satisfied && it != ctx.position.end()) ? it->second : kNoPosition;
            return r;
        }
        case LogicKind::Conjunctive:
        case LogicKind::Hierarchical:
        case LogicKind::Sequential: {
            EvalResult r;
            r.satisfied = true;
            long max_pos = std::numeric_limits<long>::min();
            bool any_pos = false;
            long prev_pos = std::numeric_limits<long>::min();
            for (const auto& c : e.children) {
                EvalResult cr = eval(c, ctx);
                if (!cr.satisfied) r.satisfied = false;
                if (cr.completed_at != kNoPosition) {
                    any_pos = true;
                    max_pos = std::max(max_pos, cr.completed_at);
                }
                if (e.kind == LogicKind::Sequential && r.satisfied &&
                    cr.completed_at != kNoPosition) {
                    if (cr.completed_at < prev_pos) r.satisfied = false;
                    prev_pos = cr.completed_at;
                }
            }
            r.completed_at = any_pos ? max_pos : kNoPosition;
            return r;
        }
        case LogicKind::Disjunctive: {
            EvalResult r;
            for (const auto& c : e.children) {
                EvalResult cr = eval(c, ctx);
                if (cr.satisfied) {
                    r.satisfied = true;
                    r.completed_at = std::min(r.completed_at, cr.completed_at);
                }
            }
            return r;
        }
    }
    return {};
}

}  // namespace

bool evaluate_logic(const LogicExpr& expr, const std::set<std::string>& completed,
                    const std::vector<std::string>& completion_order) {
    const std::vector<std::string> leaves = expr.leaf_ids();
    const std::set<std::string> leaf_set(leaves.begin(), leaves.end());
    for (const auto& id : completed) {
        if (!leaf_set.count(id)) throw UnknownIdError("completed id not declared in logic: " + id);
    }
    EvalContext ctx{completed, {}};
    for (size_t i = 0; i < completion_order.size(); ++i) {
        ctx.position.emplace(completion_order[i], static_cast<long>(i));
    }
    return eval(expr, ctx).satisfied;
}

}  // namespace nexus
