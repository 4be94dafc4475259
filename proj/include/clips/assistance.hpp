#pragma once
//
// Assistant action selection (Q_MDP, posterior sampling) and the literal
// listener baseline: goal-free command inference from the current state,
// systematic sampling, command -> goal formula, two-phase planning.
//

#include <random>
#include <set>

#include "clips/inference.hpp"
#include "clips/search.hpp"

namespace clips {

enum class AssistMode { QmdpOffline, QmdpOnline, Pibar, LiteralNaive, LiteralEfficient };

inline std::string_view to_string(AssistMode m) {
    switch (m) {
        case AssistMode::QmdpOffline: return "qmdp-offline";
        case AssistMode::QmdpOnline: return "qmdp-online";
        case AssistMode::Pibar: return "pibar";
        case AssistMode::LiteralNaive: return "literal-naive";
        case AssistMode::LiteralEfficient: return "literal-efficient";
    }
    return "?";
}

inline std::optional<AssistMode> assist_mode_from_string(std::string_view s) {
    for (auto m : {AssistMode::QmdpOffline, AssistMode::QmdpOnline, AssistMode::Pibar, AssistMode::LiteralNaive,
                   AssistMode::LiteralEfficient}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

inline bool is_literal(AssistMode m) { return m == AssistMode::LiteralNaive || m == AssistMode::LiteralEfficient; }

struct AssistConfig {
    AssistMode mode = AssistMode::QmdpOffline;
    double weightThreshold = 0.02;
    std::size_t plannerBudget = std::size_t{1} << 16;
    std::optional<double> timeLimitSeconds = 10.0;
    int sampleCount = 10;
    std::uint64_t seed = 0;
    UtteranceModelConfig utterance;  // K and pruning for the literal listener

    void validate() const {
        if (!(weightThreshold >= 0.0 && weightThreshold < 1.0)) throw std::invalid_argument("weightThreshold must lie in [0, 1)");
        if (sampleCount < 1) throw std::invalid_argument("sampleCount must be >= 1");
    }

    PlannerConfig planner() const { return PlannerConfig{plannerBudget, timeLimitSeconds, true}; }
};

// ---------------------------------------------------------------------------
// Q_MDP and posterior sampling
// ---------------------------------------------------------------------------

/// Hypotheses at or above the threshold, weights renormalized over them.
/// If pruning would empty the set, the heaviest hypothesis is kept.
inline std::vector<std::pair<std::size_t, double>> surviving_hypotheses(const Belief& b, double threshold) {
    std::vector<std::pair<std::size_t, double>> out;
    double z = 0.0;
    for (std::size_t i = 0; i < b.hypotheses.size(); ++i) {
        if (b.hypotheses[i].weight >= threshold && b.hypotheses[i].weight > 0.0) {
            out.push_back({i, b.hypotheses[i].weight});
            z += b.hypotheses[i].weight;
        }
    }
    if (out.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < b.hypotheses.size(); ++i) {
            if (b.hypotheses[i].weight > b.hypotheses[best].weight) best = i;
        }
        return {{best, 1.0}};
    }
    for (auto& [_, w] : out) w /= z;
    return out;
}

struct AssistChoice {
    Action action;
    std::vector<Action> candidates;
    std::vector<double> scores;  // expected Q per candidate
    std::vector<std::size_t> ties;  // candidates tied with the winner
    std::vector<std::size_t> survivors;
};

/// argmin over legal robot actions of the posterior-expected Q̂. Ties go to
/// the earliest action in legal-action order.
inline AssistChoice qmdp_action(const Belief& b, const State& s, const AssistConfig& cfg) {
    if (s.turn != Agent::Robot) throw std::invalid_argument("qmdp_action: not the robot's turn");
    const Scenario& sc = *b.scenario;
    AssistChoice out;
    const auto surv = surviving_hypotheses(b, cfg.weightThreshold);
    const PlannerConfig pc = cfg.planner();
    for (auto [i, _] : surv) {
        b.hypotheses[i].policy->update(s, pc);
        out.survivors.push_back(i);
    }
    ActionList acts;
    legal_actions(sc, s, Agent::Robot, acts);
    out.candidates.assign(acts.begin(), acts.end());
    for (const Action& a : acts) {
        double q = 0.0;
        for (auto [i, w] : surv) q += w * b.hypotheses[i].policy->q_value(s, a);
        out.scores.push_back(q);
    }
    const std::size_t best = stable_argmin(out.scores);
    if (best == static_cast<std::size_t>(-1)) {
        out.action = Action::wait();
        return out;
    }
    out.action = acts[best];
    for (std::size_t k = 0; k < acts.size(); ++k) {
        if (k != best && std::abs(out.scores[k] - out.scores[best]) <= kTieTolerance) out.ties.push_back(k);
    }
    return out;
}

/// Posterior sampling: one hypothesis drawn by weight, held for the episode.
struct PibarState {
    std::optional<std::size_t> hypothesis;
};

inline std::size_t sample_hypothesis(const Belief& b, std::mt19937_64& rng) {
    std::vector<double> w;
    for (const auto& h : b.hypotheses) w.push_back(h.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    return pick(rng);
}

inline AssistChoice pibar_action(const Belief& b, const State& s, const AssistConfig& cfg, PibarState& st,
                                 std::mt19937_64& rng) {
    if (s.turn != Agent::Robot) throw std::invalid_argument("pibar_action: not the robot's turn");
    if (!st.hypothesis) st.hypothesis = sample_hypothesis(b, rng);
    AssistChoice out;
    const PlannerConfig pc = cfg.planner();
    out.survivors = {*st.hypothesis};
    out.action = greedy_action(*b.hypotheses[*st.hypothesis].policy, s, &pc);
    return out;
}

// ---------------------------------------------------------------------------
// Literal listener
// ---------------------------------------------------------------------------

namespace detail {

struct Reach {
    std::set<int> keys;   // key items the agent holds or can collect
    std::set<int> doors;  // locked door items it can open
};

/// Fixpoint over cells reachable from `from`, collecting floor keys and
/// opening locked doors whose colour matches a collected key.
inline Reach reach(const Scenario& sc, const State& s, Agent agent) {
    Reach r;
    const KeyLocation held = agent == Agent::Robot ? KeyLocation::Robot : KeyLocation::Human;
    for (std::size_t k = 0; k < sc.keySlots.size(); ++k) {
        if (s.key(static_cast<int>(k)) == held) r.keys.insert(sc.keySlots[k]);
    }
    const int from = agent == Agent::Robot ? s.robot : s.human;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(sc.cell_count()), 0);
    std::vector<int> frontier = {from};
    seen[static_cast<std::size_t>(from)] = 1;
    auto colorAvailable = [&](Color c) {
        for (int k : r.keys) {
            if (sc.items[k].color == c) return true;
        }
        return false;
    };
    bool grew = true;
    while (grew) {
        grew = false;
        while (!frontier.empty()) {
            const int c = frontier.back();
            frontier.pop_back();
            for (int slot : sc.keysAt[c]) {
                if (s.key(slot) == KeyLocation::Floor && r.keys.insert(sc.keySlots[slot]).second) grew = true;
            }
            for (int n : sc.neighbors[c]) {
                if (n < 0 || seen[static_cast<std::size_t>(n)] || sc.is_wall(n)) continue;
                const int d = sc.doorAt[n];
                if (d >= 0 && s.door_locked(d)) continue;
                seen[static_cast<std::size_t>(n)] = 1;
                frontier.push_back(n);
            }
        }
        for (int c = 0; c < sc.cell_count(); ++c) {
            if (!seen[static_cast<std::size_t>(c)]) continue;
            for (int n : sc.neighbors[c]) {
                if (n < 0) continue;
                const int d = sc.doorAt[n];
                if (d < 0 || !s.door_locked(d) || r.doors.count(sc.doorSlots[d])) continue;
                if (!colorAvailable(sc.door_item(d).color)) continue;
                r.doors.insert(sc.doorSlots[d]);
                if (!seen[static_cast<std::size_t>(n)]) {
                    seen[static_cast<std::size_t>(n)] = 1;
                    frontier.push_back(n);
                    grew = true;
                }
            }
        }
    }
    return r;
}

}  // namespace detail

/// Salient actions available from s, ignoring the other agent: robot
/// pickups, unlocks and handovers to the human, then the human's own pickups
/// and unlocks (so "i'm getting ..." clauses can be grounded).
inline std::vector<SalientAction> reachable_salient_actions(const Scenario& sc, const State& s) {
    std::vector<SalientAction> out;
    for (Agent agent : {Agent::Robot, Agent::Human}) {
        const auto r = detail::reach(sc, s, agent);
        for (int k : r.keys) {
            if (s.key(sc.slotOf[k]) == KeyLocation::Floor) out.push_back({agent, ActionKind::PickUp, other(agent), {k}});
        }
        for (int d : r.doors) {
            for (int k : r.keys) {
                if (sc.items[k].color == sc.items[d].color) out.push_back({agent, ActionKind::Unlock, other(agent), {k, d}});
            }
        }
        if (agent == Agent::Robot) {
            for (int k : r.keys) out.push_back({agent, ActionKind::Handover, Agent::Human, {k}});
        }
    }
    return out;
}

struct CommandPosterior {
    std::vector<Command> commands;
    std::vector<double> probs;
};

/// P(c | u, s) over commands built from reachable robot actions, uniform
/// prior; independent of any goal or policy.
inline CommandPosterior literal_infer_commands(const Scenario& sc, const std::string& u, const State& s,
                                               const UtteranceModelConfig& cfg, UtteranceScorer& scorer) {
    CommandPosterior out;
    out.commands = enumerate_commands(sc, reachable_salient_actions(sc, s), cfg);
    if (out.commands.empty()) return out;
    const auto scores = scorer.score(u, out.commands);
    const double z = log_sum_exp(scores);
    for (double x : scores) out.probs.push_back(std::exp(x - z));
    return out;
}

/// Systematic sampling with an explicit offset x in [0, 1/m): entries are
/// sorted by probability (descending, stable) and point (i-1)/m + x picks
/// the entry whose cumulative bin contains it. Returns indices into probs.
inline std::vector<std::size_t> systematic_sample_at(const std::vector<double>& probs, int m, double x) {
    if (m < 1) throw std::invalid_argument("systematic_sample: m must be >= 1");
    if (probs.empty()) return {};
    std::vector<std::size_t> order(probs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    std::vector<std::size_t> out;
    double cum = probs[order[0]];
    std::size_t j = 0;
    for (int i = 0; i < m; ++i) {
        const double xi = static_cast<double>(i) / m + x;
        while (xi >= cum && j + 1 < order.size()) cum += probs[order[++j]];
        out.push_back(order[j]);
    }
    return out;
}

inline std::vector<std::size_t> systematic_sample(const std::vector<double>& probs, int m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0 / m);
    return systematic_sample_at(probs, m, u(rng));
}

enum class Grounding { Naive, Lifted };

/// Goal predicates for a command: pickup -> pickedup-by, handover ->
/// pickedup-by(giver) and has(receiver), unlock -> unlocked(door); colour
/// constraints kept for variables that appear. Naive grounding returns one
/// formula per object assignment; lifted returns a single existential.
inline std::vector<GoalFormula> command_to_goal_formula(const Scenario& sc, const Command& c, Grounding grounding) {
    GoalFormula f;
    std::vector<int> varMap(c.vars.size(), -1);
    auto term = [&](int v) {
        if (varMap[v] < 0) {
            varMap[v] = static_cast<int>(f.vars.size());
            f.vars.push_back({c.vars[v].name, c.vars[v].type});
        }
        return Term{true, varMap[v]};
    };
    auto add = [&](Predicate p) {
        if (std::find(f.conjuncts.begin(), f.conjuncts.end(), p) == f.conjuncts.end()) f.conjuncts.push_back(p);
    };
    for (const auto& a : c.actions) {
        switch (a.kind) {
            case ActionKind::PickUp: add({PredicateKind::PickedUpBy, a.actor, term(a.args[0])}); break;
            case ActionKind::Handover:
                add({PredicateKind::PickedUpBy, a.actor, term(a.args[0])});
                add({PredicateKind::Has, a.to, term(a.args[0])});
                break;
            case ActionKind::Unlock: add({PredicateKind::Unlocked, Agent::Robot, term(a.args[1])}); break;
            default: break;
        }
    }
    for (const auto& p : c.predicates) {
        if (varMap[p.var] >= 0) add({PredicateKind::IsColor, Agent::Robot, Term{true, varMap[p.var]}, p.color});
    }
    for (const auto& v : f.vars) {
        bool any = false;
        for (const auto& it : sc.items) any = any || it.kind == v.type;
        if (!any) f.unsatisfiable = true;
    }
    if (grounding == Grounding::Lifted || f.unsatisfiable) return {f};
    auto ground = ground_formulas(sc, f);
    if (ground.empty()) {
        f.unsatisfiable = true;
        return {f};
    }
    return ground;
}

struct LiteralPlan {
    std::vector<AgentAction> actions;
    PlanStatus phase1 = PlanStatus::Unsatisfiable;
    bool phase1RobotOnly = false;  // joint plan failed, robot-only fallback used
    bool commandFailure = false;   // no phase-1 plan at all
    bool phase2Joint = false;      // human could not finish alone
    bool reachedGoal = false;
    std::size_t phase1Length = 0;
};

/// Phase 1: optimal joint plan to the command goal (robot-only fallback).
/// Phase 2: the human completes the true goal with the robot standing still.
/// The listener does not know the principal's costs, so phase 1 plans under
/// profile 0; phase 2 uses the true profile.
inline LiteralPlan literal_plan_for(const Scenario& sc, const GoalFormula* commandGoal, const State& s,
                                    const GoalSpec& gTrue, std::size_t budget) {
    LiteralPlan out;
    State cur = s;
    if (commandGoal) {
        auto p1 = optimal_plan(sc, s, *commandGoal, PlanMode::Joint, budget, 0);
        out.phase1 = p1.status;
        if (!p1.found()) {
            auto robot = optimal_plan(sc, s, *commandGoal, PlanMode::RobotOnly, budget, 0);
            if (robot.found()) {
                p1 = std::move(robot);
                out.phase1RobotOnly = true;
            }
        }
        if (p1.found()) {
            for (const auto& a : p1.actions) cur = step(sc, cur, a.action);
            out.actions = std::move(p1.actions);
            out.phase1Length = out.actions.size();
        } else {
            out.commandFailure = true;
        }
    } else {
        out.commandFailure = true;
    }
    const GoalFormula target = gem_formula(sc, gTrue.gem);
    auto p2 = optimal_plan(sc, cur, target, PlanMode::HumanOnlyMoves, budget, gTrue.profile);
    if (!p2.found()) {
        p2 = optimal_plan(sc, cur, target, PlanMode::Joint, budget, gTrue.profile);
        out.phase2Joint = true;
    }
    if (p2.found()) {
        out.actions.insert(out.actions.end(), p2.actions.begin(), p2.actions.end());
        out.reachedGoal = true;
    }
    return out;
}

enum class LiteralVariant { Naive, Efficient };

/// Plans for one sampled command: all groundings (naive) or the existential
/// formula (efficient). An empty command means the human solves alone.
inline std::vector<LiteralPlan> literal_assist_plan(const Scenario& sc, const Command* c, const State& s,
                                                    const GoalSpec& gTrue, LiteralVariant variant, std::size_t budget) {
    if (!c) return {literal_plan_for(sc, nullptr, s, gTrue, budget)};
    const auto formulas =
        command_to_goal_formula(sc, *c, variant == LiteralVariant::Naive ? Grounding::Naive : Grounding::Lifted);
    std::vector<LiteralPlan> out;
    for (const auto& f : formulas) {
        out.push_back(literal_plan_for(sc, f.unsatisfiable ? nullptr : &f, s, gTrue, budget));
    }
    return out;
}

}  // namespace clips
