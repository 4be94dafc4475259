#pragma once
//
// Episode driver: replays the scenario's scripted prefix through the belief,
// then lets the assistant act with a simulated human until the true gem is
// collected or the step limit is hit. Literal baselines instead execute their
// two-phase plans for every sampled command.
//

#include <chrono>
#include <limits>
#include <set>

#include "clips/assistance.hpp"
#include "clips/human.hpp"
#include "clips/trace.hpp"

namespace clips {

struct RunConfig {
    InferenceConfig inference;
    AssistConfig assist;
    SimulatedHumanConfig human;
};

/// One executed (or planned) continuation after the prefix.
struct Rollout {
    double weight = 1.0;
    int length = 0;          // steps after the prefix
    double humanCost = 0.0;  // human action costs after the prefix, true profile
    std::set<std::string> options;  // keys picked up and doors unlocked by the robot
    bool success = false;
    bool truncated = false;
};

struct EpisodeResult {
    std::string scenario;
    std::vector<json> events;
    std::vector<double> goalPosterior;  // after the prefix (offline) or at the end (online)
    double pTrueGoal = std::numeric_limits<double>::quiet_NaN();
    std::vector<Rollout> rollouts;
    std::optional<int> fallbackAt;
    bool degenerate = false;
    double seconds = 0.0;

    double mean_length() const {
        double m = 0.0;
        for (const auto& r : rollouts) m += r.weight * r.length;
        return m;
    }
    double mean_human_cost() const {
        double m = 0.0;
        for (const auto& r : rollouts) m += r.weight * r.humanCost;
        return m;
    }
};

namespace detail {

inline void note_option(const Scenario& sc, Agent agent, const Action& a, std::set<std::string>& options) {
    if (agent != Agent::Robot) return;
    if (a.kind == ActionKind::PickUp || a.kind == ActionKind::Unlock) options.insert(sc.items[a.item].id);
}

inline const ScriptEvent* script_event(const Scenario& sc, int t, Agent agent) {
    for (const auto& e : sc.script) {
        if (e.t == t && e.agent == agent) return &e;
    }
    return nullptr;
}

inline int script_end(const Scenario& sc) {
    int last = 0;
    for (const auto& e : sc.script) last = std::max(last, e.t);
    return last;
}

}  // namespace detail

inline EpisodeResult run_assistant(std::shared_ptr<const Scenario> scp, const RunConfig& cfg, UtteranceScorer& scorer) {
    cfg.assist.validate();
    const auto start = std::chrono::steady_clock::now();
    const Scenario& sc = *scp;
    const GoalSpec gTrue{*sc.gem_slot(sc.trueGoal), sc.trueProfile};
    const CostProfile& trueCosts = cost_profile(gTrue.profile);
    const bool literal = is_literal(cfg.assist.mode);
    std::mt19937_64 rng(cfg.assist.seed);

    EpisodeResult out;
    out.scenario = sc.name;
    auto& ev = out.events;

    PlannerPool pool(scp, cfg.inference.planner);
    std::optional<Belief> belief;
    if (!literal) belief = belief_init(pool, cfg.inference);

    State s = initial_state(sc);
    ev.push_back(state_event(sc, s));
    if (belief) ev.push_back(belief_event(*belief, s.t));

    auto observe = [&](const Observation& o) {
        if (!belief || out.degenerate) return;
        try {
            belief = belief_update(*belief, o, cfg.inference, scorer);
        } catch (const DegenerateBelief&) {
            // Keep the last proper belief; the trace records the event.
            out.degenerate = true;
            ev.push_back(metric_event("degenerate_belief", o.t));
        }
    };

    // Scripted prefix.
    std::optional<std::string> lastUtterance;
    const int prefixEnd = detail::script_end(sc);
    while (s.t <= prefixEnd && !is_goal(s, gTrue)) {
        const ScriptEvent* e = detail::script_event(sc, s.t, s.turn);
        Action a = Action::wait();
        std::optional<std::string> u;
        if (e) {
            if (e->action) a = parse_action(sc, s.turn, *e->action, e->args);
            if (e->utterance && s.turn == Agent::Human) u = *e->utterance;
        }
        if (u) {
            ev.push_back(utterance_event(s.t, *u));
            lastUtterance = u;
        }
        const Observation o = make_observation(sc, s, a, u);
        ev.push_back(action_event(sc, s.turn, s.t, a));
        observe(o);
        s = o.stateNext;
        ev.push_back(state_event(sc, s));
        if (belief) ev.push_back(belief_event(*belief, s.t));
    }
    const State postPrefix = s;
    if (belief) {
        out.goalPosterior = goal_posterior(*belief);
        out.pTrueGoal = goal_probability(*belief, sc.trueGoal);
    }

    if (literal) {
        const LiteralVariant variant =
            cfg.assist.mode == AssistMode::LiteralNaive ? LiteralVariant::Naive : LiteralVariant::Efficient;
        std::vector<std::optional<Command>> samples;
        if (lastUtterance) {
            auto post = literal_infer_commands(sc, *lastUtterance, postPrefix, cfg.assist.utterance, scorer);
            for (std::size_t i : systematic_sample(post.probs, cfg.assist.sampleCount, rng)) samples.push_back(post.commands[i]);
        }
        if (samples.empty()) samples.push_back(std::nullopt);
        bool traced = false;
        for (const auto& c : samples) {
            const auto plans = literal_assist_plan(sc, c ? &*c : nullptr, postPrefix, gTrue, variant, cfg.assist.plannerBudget);
            if (!traced && c) ev.push_back(metric_event("command", to_string(*c)));
            for (const auto& p : plans) {
                Rollout r;
                r.weight = 1.0 / static_cast<double>(samples.size() * plans.size());
                State cur = postPrefix;
                for (const auto& [agent, a] : p.actions) {
                    if (agent == Agent::Human) r.humanCost += action_cost(trueCosts, agent, a);
                    detail::note_option(sc, agent, a, r.options);
                    if (!traced) ev.push_back(action_event(sc, agent, cur.t, a));
                    cur = step(sc, cur, a);
                    if (!traced) ev.push_back(state_event(sc, cur));
                }
                r.success = p.reachedGoal && is_goal(cur, gTrue);
                // A plan that never reaches the goal is charged like an assistant
                // that stalls until the step limit.
                r.truncated = !r.success;
                r.length = r.success ? static_cast<int>(p.actions.size()) : sc.maxSteps - postPrefix.t + 1;
                traced = true;
                out.rollouts.push_back(std::move(r));
            }
        }
    } else {
        SimulatedHuman human(scp, gTrue, SimulatedHuman::ground_truth_plan(sc, postPrefix, gTrue), cfg.human);
        PibarState pibar;
        const bool online = cfg.assist.mode == AssistMode::QmdpOnline;
        Rollout r;
        while (!is_goal(s, gTrue)) {
            if (s.t > sc.maxSteps) {
                r.truncated = true;
                break;
            }
            Action a;
            if (s.turn == Agent::Robot) {
                const bool firstSample = cfg.assist.mode == AssistMode::Pibar && !pibar.hypothesis;
                const AssistChoice choice = cfg.assist.mode == AssistMode::Pibar
                                                ? pibar_action(*belief, s, cfg.assist, pibar, rng)
                                                : qmdp_action(*belief, s, cfg.assist);
                a = choice.action;
                if (firstSample) {
                    const auto& h = belief->hypotheses[*pibar.hypothesis];
                    ev.push_back(metric_event("sampled_hypothesis",
                                              {{"goal", sc.gem_item(h.goal.gem).id}, {"profile", h.goal.profile}}));
                }
                if (!choice.ties.empty()) ev.push_back(metric_event("tie", {{"t", s.t}, {"count", choice.ties.size() + 1}}));
                human.observe_robot(s, a);
            } else {
                a = human.act(s);
                r.humanCost += action_cost(trueCosts, Agent::Human, a);
            }
            detail::note_option(sc, s.turn, a, r.options);
            const Observation o = make_observation(sc, s, a);
            ev.push_back(action_event(sc, s.turn, s.t, a));
            if (online) observe(o);
            s = o.stateNext;
            ++r.length;
            ev.push_back(state_event(sc, s));
            if (online && belief) ev.push_back(belief_event(*belief, s.t));
        }
        r.success = is_goal(s, gTrue);
        out.fallbackAt = human.fallback_at();
        out.rollouts.push_back(std::move(r));
        if (online && belief) {
            out.goalPosterior = goal_posterior(*belief);
            out.pTrueGoal = goal_probability(*belief, sc.trueGoal);
        }
    }

    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isnan(out.pTrueGoal)) ev.push_back(metric_event("p_true_goal", out.pTrueGoal));
    ev.push_back(metric_event("plan_length", out.mean_length()));
    ev.push_back(metric_event("human_cost", out.mean_human_cost()));
    json opts = json::array();
    if (!out.rollouts.empty()) {
        for (const auto& o : out.rollouts.front().options) opts.push_back(o);
    }
    ev.push_back(metric_event("options", opts));
    if (out.fallbackAt) ev.push_back(metric_event("fallback_at", *out.fallbackAt));
    return out;
}

}  // namespace clips
