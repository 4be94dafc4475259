#pragma once
//
// Goal formulas over scenario objects and an exact best-first planner for
// them, with optional movement restrictions on either agent.
//

#include <queue>
#include <unordered_map>
#include <vector>

#include "clips/core.hpp"

namespace clips {

enum class PredicateKind : std::uint8_t { PickedUpBy, Has, Unlocked, IsColor };

/// A predicate argument: either a concrete item index or a quantified
/// variable index into GoalFormula::vars.
struct Term {
    bool isVar = false;
    int index = -1;
    bool operator==(const Term&) const = default;
};

struct Predicate {
    PredicateKind kind = PredicateKind::Unlocked;
    Agent agent = Agent::Robot;  // PickedUpBy, Has
    Term object;
    Color color = Color::Red;  // IsColor
    bool operator==(const Predicate&) const = default;
};

struct FormulaVar {
    std::string name;
    ItemKind type = ItemKind::Key;
    bool operator==(const FormulaVar&) const = default;
};

/// Existentially quantified conjunction. pickedup-by(a, x) holds once agent a
/// has held x (keys held at planning start count); has(a, x) is current
/// possession, with has(human, gem) meaning the gem is collected.
struct GoalFormula {
    std::vector<FormulaVar> vars;
    std::vector<Predicate> conjuncts;
    bool unsatisfiable = false;  // a variable's type has no objects
    bool operator==(const GoalFormula&) const = default;
};

inline GoalFormula gem_formula(const Scenario& sc, int gemSlot) {
    GoalFormula f;
    f.conjuncts.push_back({PredicateKind::Has, Agent::Human, Term{false, sc.gemSlots[gemSlot]}});
    return f;
}

inline std::string to_string(const Scenario& sc, const GoalFormula& f) {
    if (f.unsatisfiable) return "(unsatisfiable)";
    auto term = [&](const Term& t) { return t.isVar ? "?" + f.vars[t.index].name : sc.items[t.index].id; };
    std::string body = "(and";
    for (const auto& p : f.conjuncts) {
        switch (p.kind) {
            case PredicateKind::PickedUpBy:
                body += " (pickedup-by " + std::string(to_string(p.agent)) + " " + term(p.object) + ")";
                break;
            case PredicateKind::Has: body += " (has " + std::string(to_string(p.agent)) + " " + term(p.object) + ")"; break;
            case PredicateKind::Unlocked: body += " (unlocked " + term(p.object) + ")"; break;
            case PredicateKind::IsColor:
                body += " (iscolor " + term(p.object) + " " + std::string(to_string(p.color)) + ")";
                break;
        }
    }
    body += ")";
    if (f.vars.empty()) return body;
    std::string out = "(exists (";
    for (std::size_t i = 0; i < f.vars.size(); ++i) {
        if (i) out += ' ';
        out += "?" + f.vars[i].name + " - " + std::string(to_string(f.vars[i].type));
    }
    return out + ") " + body + ")";
}

/// All distinct-object assignments of the formula's variables, as item
/// indices, that satisfy its static (iscolor) constraints.
inline std::vector<std::vector<int>> formula_groundings(const Scenario& sc, const GoalFormula& f) {
    std::vector<std::vector<int>> out;
    if (f.unsatisfiable) return out;
    std::vector<int> cur(f.vars.size(), -1);
    auto staticOk = [&](std::size_t bound) {
        for (const auto& p : f.conjuncts) {
            if (p.kind != PredicateKind::IsColor) continue;
            if (p.object.isVar && static_cast<std::size_t>(p.object.index) >= bound) continue;
            const int item = p.object.isVar ? cur[p.object.index] : p.object.index;
            if (sc.items[item].color != p.color) return false;
        }
        return true;
    };
    auto rec = [&](auto&& self, std::size_t v) -> void {
        if (!staticOk(v)) return;
        if (v == f.vars.size()) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = 0; i < sc.items.size(); ++i) {
            if (sc.items[i].kind != f.vars[v].type) continue;
            if (std::find(cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(v), static_cast<int>(i)) !=
                cur.begin() + static_cast<std::ptrdiff_t>(v))
                continue;
            cur[v] = static_cast<int>(i);
            self(self, v + 1);
        }
        cur[v] = -1;
    };
    rec(rec, 0);
    return out;
}

/// One ground formula per grounding, with variables replaced by objects.
inline std::vector<GoalFormula> ground_formulas(const Scenario& sc, const GoalFormula& f) {
    std::vector<GoalFormula> out;
    for (const auto& g : formula_groundings(sc, f)) {
        GoalFormula ground;
        for (auto p : f.conjuncts) {
            if (p.object.isVar) p.object = Term{false, g[p.object.index]};
            ground.conjuncts.push_back(p);
        }
        out.push_back(std::move(ground));
    }
    return out;
}

/// Which agents have held each key (bit per key slot).
struct HoldHistory {
    std::uint16_t robot = 0;
    std::uint16_t human = 0;
    bool operator==(const HoldHistory&) const = default;

    static HoldHistory from(const Scenario& sc, const State& s) {
        HoldHistory h;
        for (std::size_t k = 0; k < sc.keySlots.size(); ++k) {
            if (s.key(static_cast<int>(k)) == KeyLocation::Robot) h.robot |= static_cast<std::uint16_t>(1u << k);
            if (s.key(static_cast<int>(k)) == KeyLocation::Human) h.human |= static_cast<std::uint16_t>(1u << k);
        }
        return h;
    }
    HoldHistory after(const Scenario& sc, const State& next) const {
        HoldHistory h = *this;
        HoldHistory now = from(sc, next);
        h.robot |= now.robot;
        h.human |= now.human;
        return h;
    }
};

namespace detail {

inline bool ground_predicate_holds(const Scenario& sc, const State& s, const HoldHistory& hist, const Predicate& p,
                                   int item) {
    const Item& it = sc.items[item];
    const int slot = sc.slotOf[item];
    switch (p.kind) {
        case PredicateKind::IsColor: return it.color == p.color;
        case PredicateKind::Unlocked: return it.kind == ItemKind::Door && !s.door_locked(slot);
        case PredicateKind::Has:
            if (it.kind == ItemKind::Gem) return p.agent == Agent::Human && s.has_gem(slot);
            return it.kind == ItemKind::Key && s.key(slot) == held_by(p.agent);
        case PredicateKind::PickedUpBy:
            if (it.kind == ItemKind::Gem) return p.agent == Agent::Human && s.has_gem(slot);
            if (it.kind != ItemKind::Key) return false;
            return ((p.agent == Agent::Robot ? hist.robot : hist.human) >> slot) & 1u;
    }
    return false;
}

}  // namespace detail

/// Evaluates a formula with the given variable assignment.
inline bool formula_holds(const Scenario& sc, const State& s, const HoldHistory& hist, const GoalFormula& f,
                          const std::vector<int>& grounding) {
    for (const auto& p : f.conjuncts) {
        const int item = p.object.isVar ? grounding[p.object.index] : p.object.index;
        if (!detail::ground_predicate_holds(sc, s, hist, p, item)) return false;
    }
    return true;
}

inline bool formula_holds(const Scenario& sc, const State& s, const HoldHistory& hist, const GoalFormula& f) {
    for (const auto& g : formula_groundings(sc, f)) {
        if (formula_holds(sc, s, hist, f, g)) return true;
    }
    return false;
}

enum class PlanMode : std::uint8_t { Joint, RobotOnly, HumanOnlyMoves };
enum class PlanStatus : std::uint8_t { Found, Unsatisfiable, BudgetExhausted };

inline std::string_view to_string(PlanMode m) {
    switch (m) {
        case PlanMode::Joint: return "joint";
        case PlanMode::RobotOnly: return "robot-only";
        case PlanMode::HumanOnlyMoves: return "human-only-moves";
    }
    return "?";
}

inline std::string_view to_string(PlanStatus s) {
    switch (s) {
        case PlanStatus::Found: return "found";
        case PlanStatus::Unsatisfiable: return "unsatisfiable";
        case PlanStatus::BudgetExhausted: return "budget-exhausted";
    }
    return "?";
}

struct PlanResult {
    PlanStatus status = PlanStatus::Unsatisfiable;
    std::vector<AgentAction> actions;
    double cost = 0.0;
    std::size_t expansions = 0;

    bool found() const { return status == PlanStatus::Found; }
};

/// Legal actions of the acting agent under a movement restriction: in
/// RobotOnly mode the human may not move, in HumanOnlyMoves the robot may not.
inline void restricted_actions(const Scenario& sc, const State& s, PlanMode mode, ActionList& out) {
    legal_actions(sc, s, s.turn, out);
    const bool frozen = (mode == PlanMode::RobotOnly && s.turn == Agent::Human) ||
                        (mode == PlanMode::HumanOnlyMoves && s.turn == Agent::Robot);
    if (frozen) out.erase(std::remove_if(out.begin(), out.end(), [](const Action& a) { return is_move(a.kind); }), out.end());
}

namespace detail {

// Admissible bound for a ground formula: the most expensive single conjunct
// under relaxed (doors open) distances.
inline double formula_bound(const Scenario& sc, const CostProfile& cp, const State& s, const HoldHistory& hist,
                            const GoalFormula& f, const std::vector<int>& grounding) {
    double bound = 0.0;
    const double minMove = cp.min_over_agents(CostClass::Move);
    for (const auto& p : f.conjuncts) {
        const int item = p.object.isVar ? grounding[p.object.index] : p.object.index;
        if (ground_predicate_holds(sc, s, hist, p, item)) continue;
        const int cell = sc.item_cell(item);
        double b = 0.0;
        switch (p.kind) {
            case PredicateKind::IsColor: return kUnreachable;
            case PredicateKind::Unlocked: {
                const int slot = sc.slotOf[item];
                const int d = std::min(sc.maze.doorDist[slot][s.human], sc.maze.doorDist[slot][s.robot]);
                b = d * minMove + cp.min_over_agents(CostClass::Unlock);
                break;
            }
            case PredicateKind::Has:
            case PredicateKind::PickedUpBy: {
                if (sc.items[item].kind == ItemKind::Gem) {
                    b = sc.maze.distance(s.human, cell) * cp.cost(Agent::Human, CostClass::Move) +
                        cp.cost(Agent::Human, CostClass::PickUp);
                } else if (p.kind == PredicateKind::PickedUpBy && s.key(sc.slotOf[item]) == KeyLocation::Floor) {
                    b = sc.maze.distance(s.pos(p.agent), cell) * cp.cost(p.agent, CostClass::Move) +
                        cp.cost(p.agent, CostClass::PickUp);
                }
                break;
            }
        }
        bound = std::max(bound, b);
    }
    return bound;
}

}  // namespace detail

/// Minimal-cost plan from s to any state satisfying `goal`, under `mode`.
/// Costs come from cost profile `profile`. Expansions beyond `budget` stop
/// the search with BudgetExhausted; an exhausted open list proves
/// Unsatisfiable.
inline PlanResult optimal_plan(const Scenario& sc, const State& s, const GoalFormula& goal, PlanMode mode,
                               std::size_t budget, int profile = 0) {
    PlanResult result;
    const auto groundings = formula_groundings(sc, goal);
    if (groundings.empty()) return result;
    const CostProfile& cp = cost_profile(profile);

    struct Node {
        State s;
        HoldHistory hist;
        double g;
        int parent;
        Action via;
    };
    std::vector<Node> nodes;
    using Key = std::pair<std::uint64_t, std::uint32_t>;
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return std::hash<std::uint64_t>{}(k.first ^ (static_cast<std::uint64_t>(k.second) * 0x9E3779B97F4A7C15ull));
        }
    };
    std::unordered_map<Key, int, KeyHash> index;
    auto key = [](const State& st, const HoldHistory& h) {
        return Key{st.fingerprint(), static_cast<std::uint32_t>(h.robot) | (static_cast<std::uint32_t>(h.human) << 16)};
    };
    auto heuristic = [&](const State& st, const HoldHistory& h) {
        double best = kUnreachable;
        for (const auto& g : groundings) best = std::min(best, detail::formula_bound(sc, cp, st, h, goal, g));
        return best;
    };
    struct Open {
        double f, g;
        std::uint32_t seq;
        int node;
        bool operator<(const Open& o) const {
            if (f != o.f) return f > o.f;
            if (g != o.g) return g < o.g;
            return seq > o.seq;
        }
    };
    std::priority_queue<Open> open;
    std::vector<std::uint8_t> closed;
    std::uint32_t seq = 0;
    const HoldHistory h0 = HoldHistory::from(sc, s);
    nodes.push_back({s, h0, 0.0, -1, Action::wait()});
    closed.push_back(0);
    index.emplace(key(s, h0), 0);
    open.push({heuristic(s, h0), 0.0, seq++, 0});

    ActionList actions;
    while (!open.empty()) {
        const Open top = open.top();
        open.pop();
        if (closed[top.node] || top.g > nodes[top.node].g) continue;
        const Node node = nodes[top.node];
        bool done = false;
        for (const auto& g : groundings) {
            if (formula_holds(sc, node.s, node.hist, goal, g)) {
                done = true;
                break;
            }
        }
        if (done) {
            result.status = PlanStatus::Found;
            result.cost = node.g;
            for (int i = top.node; nodes[i].parent >= 0; i = nodes[i].parent)
                result.actions.push_back({nodes[nodes[i].parent].s.turn, nodes[i].via});
            std::reverse(result.actions.begin(), result.actions.end());
            return result;
        }
        if (result.expansions >= budget) {
            result.status = PlanStatus::BudgetExhausted;
            return result;
        }
        closed[top.node] = 1;
        ++result.expansions;
        restricted_actions(sc, node.s, mode, actions);
        for (const Action& a : actions) {
            State next = apply_unchecked(sc, node.s, node.s.turn, a);
            HoldHistory hist = node.hist.after(sc, next);
            const double g = node.g + action_cost(cp, node.s.turn, a);
            auto [it, fresh] = index.try_emplace(key(next, hist), static_cast<int>(nodes.size()));
            if (fresh) {
                nodes.push_back({next, hist, g, top.node, a});
                closed.push_back(0);
            } else {
                Node& n = nodes[it->second];
                if (g >= n.g - 1e-12) continue;
                n.g = g;
                n.parent = top.node;
                n.via = a;
                closed[it->second] = 0;
            }
            const double h = heuristic(next, hist);
            if (h >= kUnreachable) continue;
            open.push({g + h, g, seq++, it->second});
        }
    }
    result.status = PlanStatus::Unsatisfiable;
    return result;
}

inline double plan_cost(const CostProfile& cp, const std::vector<AgentAction>& plan) {
    double c = 0.0;
    for (const auto& a : plan) c += action_cost(cp, a.agent, a.action);
    return c;
}

}  // namespace clips
