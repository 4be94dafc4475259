#pragma once
//
// Enumerative goal inference: one hypothesis per (goal gem, cost profile),
// log-space weights, a per-hypothesis rationality posterior on a fixed grid,
// and the robot's own actions entering only through the transition.
//

#include <boost/math/distributions/gamma.hpp>

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clips/planner.hpp"
#include "clips/utterance.hpp"

namespace clips {

/// Rationality values with a normalized prior over them.
struct BetaGrid {
    std::vector<double> values;
    std::vector<double> prior;

    /// 2^(-3 + 0.25 j), j = 0..32, under a Gamma(0.5, 1) prior.
    static BetaGrid standard() {
        std::vector<double> v;
        for (int j = 0; j <= 32; ++j) v.push_back(std::exp2(-3.0 + 0.25 * j));
        return with_gamma_prior(std::move(v));
    }

    static BetaGrid with_gamma_prior(std::vector<double> values, double shape = 0.5, double scale = 1.0) {
        if (values.empty()) throw std::invalid_argument("beta grid is empty");
        boost::math::gamma_distribution<double> gamma(shape, scale);
        std::vector<double> p;
        for (double b : values) {
            if (!(b > 0.0)) throw std::invalid_argument("beta values must be positive");
            p.push_back(boost::math::pdf(gamma, b));
        }
        return with_prior(std::move(values), std::move(p));
    }

    static BetaGrid with_prior(std::vector<double> values, std::vector<double> prior) {
        if (values.size() != prior.size() || values.empty()) throw std::invalid_argument("beta grid/prior size mismatch");
        double z = 0.0;
        for (double x : prior) z += x;
        if (!(z > 0.0)) throw std::invalid_argument("beta prior has no mass");
        for (double& x : prior) x /= z;
        return {std::move(values), std::move(prior)};
    }

    double mean(const std::vector<double>& posterior) const {
        double m = 0.0;
        for (std::size_t j = 0; j < values.size(); ++j) m += posterior[j] * values[j];
        return m;
    }
};

enum class InferenceMode { Multimodal, ActionOnly, LanguageOnly };

inline std::string_view to_string(InferenceMode m) {
    switch (m) {
        case InferenceMode::Multimodal: return "multimodal";
        case InferenceMode::ActionOnly: return "action-only";
        case InferenceMode::LanguageOnly: return "language-only";
    }
    return "?";
}

inline std::optional<InferenceMode> inference_mode_from_string(std::string_view s) {
    for (auto m : {InferenceMode::Multimodal, InferenceMode::ActionOnly, InferenceMode::LanguageOnly}) {
        if (to_string(m) == s) return m;
    }
    return std::nullopt;
}

/// Policies shared between beliefs over the same scenario (e.g. the
/// multimodal belief and its unimodal ablations), keyed by goal spec.
class PlannerPool {
public:
    PlannerPool(std::shared_ptr<const Scenario> sc, PlannerConfig cfg = PlannerConfig::inference())
        : scenario_(std::move(sc)), cfg_(cfg) {}

    std::shared_ptr<PolicyHandle> get(const GoalSpec& g) {
        auto& slot = handles_[{g.gem, g.profile}];
        if (!slot) slot = std::make_shared<PolicyHandle>(scenario_, g, cfg_);
        return slot;
    }

    const std::shared_ptr<const Scenario>& scenario() const { return scenario_; }
    const PlannerConfig& config() const { return cfg_; }

private:
    std::shared_ptr<const Scenario> scenario_;
    PlannerConfig cfg_;
    std::map<std::pair<int, int>, std::shared_ptr<PolicyHandle>> handles_;
};

struct InferenceConfig {
    InferenceMode mode = InferenceMode::Multimodal;
    UtteranceModelConfig utterance;
    BetaGrid grid = BetaGrid::standard();
    PlannerConfig planner = PlannerConfig::inference();
};

struct Hypothesis {
    GoalSpec goal;
    double logWeight = 0.0;
    double weight = 0.0;
    std::shared_ptr<PolicyHandle> policy;
    std::vector<double> betaPosterior;
};

/// Policies are shared, not copied: copying a Belief gives independent
/// weights over the same (monotonically refined) value tables.
struct Belief {
    std::shared_ptr<const Scenario> scenario;
    InferenceMode mode = InferenceMode::Multimodal;
    std::vector<Hypothesis> hypotheses;
    std::vector<double> betaValues;

    double beta_mean(const Hypothesis& h) const {
        double m = 0.0;
        for (std::size_t j = 0; j < betaValues.size(); ++j) m += h.betaPosterior[j] * betaValues[j];
        return m;
    }
};

/// Every weight vanished; the observation is impossible under the model.
struct DegenerateBelief : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Observation {
    int t = 0;
    State statePrev;
    State stateNext;
    std::optional<Action> humanAction;
    std::optional<Action> robotAction;
    bool spoke = false;
    std::optional<std::string> utterance;

    /// The acting agent's action (the other agent does not move this step).
    const Action& acting() const { return statePrev.turn == Agent::Human ? *humanAction : *robotAction; }
};

inline void validate(const Observation& o) {
    if (o.spoke != o.utterance.has_value()) throw std::invalid_argument("observation: utterance present iff spoke");
    const bool human = o.statePrev.turn == Agent::Human;
    if (human ? !o.humanAction : !o.robotAction)
        throw std::invalid_argument("observation: missing action of the agent whose turn it is");
    if (human ? o.robotAction.has_value() : o.humanAction.has_value())
        throw std::invalid_argument("observation: action given for the agent that is not on turn");
    if (o.spoke && !human) throw std::invalid_argument("observation: only the human speaks, on their own turn");
}

namespace detail {

inline void normalize(Belief& b) {
    double m = -kInfinity;
    for (const auto& h : b.hypotheses) m = std::max(m, h.logWeight);
    if (!(m > -kInfinity) || std::isnan(m)) throw DegenerateBelief("every hypothesis has zero weight");
    double z = 0.0;
    for (const auto& h : b.hypotheses) z += std::exp(h.logWeight - m);
    const double logZ = m + std::log(z);
    for (auto& h : b.hypotheses) {
        h.logWeight -= logZ;
        h.weight = std::exp(h.logWeight);
    }
}

}  // namespace detail

inline Belief belief_init(PlannerPool& pool, const InferenceConfig& cfg) {
    const Scenario& sc = *pool.scenario();
    if (sc.goals.empty()) throw std::invalid_argument("belief_init: empty goal set");
    Belief b{pool.scenario(), cfg.mode, {}, cfg.grid.values};
    const State s0 = initial_state(sc);
    for (const auto& gem : sc.goals) {
        for (int p : sc.costProfiles) {
            Hypothesis h;
            h.goal = {*sc.gem_slot(gem), p};
            h.policy = pool.get(h.goal);
            h.policy->update(s0);
            h.betaPosterior = cfg.grid.prior;
            b.hypotheses.push_back(std::move(h));
        }
    }
    for (auto& h : b.hypotheses) h.logWeight = -std::log(static_cast<double>(b.hypotheses.size()));
    detail::normalize(b);
    return b;
}

inline Belief belief_init(std::shared_ptr<const Scenario> sc, const InferenceConfig& cfg) {
    PlannerPool pool(std::move(sc), cfg.planner);
    return belief_init(pool, cfg);
}

struct ActionLikelihood {
    double likelihood = 0.0;
    std::vector<double> betaPosterior;
};

/// L = sum_j post[j] * P_beta_j(a | s) and the updated rationality posterior.
/// A zero likelihood leaves the posterior unchanged.
inline ActionLikelihood marginal_action_likelihood(const Hypothesis& h, const BetaGrid& grid, const State& s,
                                                   const Action& a) {
    if (auto why = illegality(h.policy->scenario(), s, s.turn, a); !why.empty())
        throw IllegalAction("marginal_action_likelihood: " + why);
    ActionList actions;
    legal_actions(h.policy->scenario(), s, s.turn, actions);
    std::vector<double> q;
    std::size_t idx = actions.size();
    for (std::size_t i = 0; i < actions.size(); ++i) {
        q.push_back(h.policy->q_value(s, actions[i]));
        if (actions[i] == a) idx = i;
    }
    ActionLikelihood out;
    out.betaPosterior.resize(grid.values.size());
    for (std::size_t j = 0; j < grid.values.size(); ++j) {
        const double p = boltzmann_probs(q, grid.values[j])[idx];
        out.betaPosterior[j] = h.betaPosterior[j] * p;
        out.likelihood += out.betaPosterior[j];
    }
    if (out.likelihood > 0.0) {
        for (double& x : out.betaPosterior) x /= out.likelihood;
    } else {
        out.betaPosterior = h.betaPosterior;
    }
    return out;
}

struct UpdateTerms {
    double transition = 0.0;  // log, 0 or -inf
    double speak = 0.0;
    double utterance = 0.0;
    double action = 0.0;
    double robotAction = 0.0;  // only in the external-observer update
};

namespace detail {

inline Belief update_impl(const Belief& b, const Observation& obs, const InferenceConfig& cfg, UtteranceScorer& scorer,
                          bool external, std::vector<UpdateTerms>* terms) {
    validate(obs);
    cfg.utterance.validate();
    const Scenario& sc = *b.scenario;
    const Action& acted = obs.acting();
    const State expected = transition(sc, obs.statePrev, obs.humanAction.value_or(Action::wait()),
                                      obs.robotAction.value_or(Action::wait()));
    const double logTransition = expected == obs.stateNext ? 0.0 : -kInfinity;
    const double logSpeak = std::log(obs.spoke ? cfg.utterance.pSpeak : 1.0 - cfg.utterance.pSpeak);

    Belief out = b;
    if (terms) terms->assign(out.hypotheses.size(), {});
    for (std::size_t i = 0; i < out.hypotheses.size(); ++i) {
        Hypothesis& h = out.hypotheses[i];
        UpdateTerms t;
        h.policy->update(obs.statePrev);
        t.transition = logTransition;
        t.speak = logSpeak;
        if (obs.spoke && b.mode != InferenceMode::ActionOnly) {
            t.utterance = utterance_log_likelihood(*obs.utterance, command_prior(*h.policy, obs.statePrev, cfg.utterance),
                                                   scorer);
        }
        if (obs.humanAction && b.mode != InferenceMode::LanguageOnly) {
            auto al = marginal_action_likelihood(h, cfg.grid, obs.statePrev, acted);
            t.action = std::log(al.likelihood);
            h.betaPosterior = std::move(al.betaPosterior);
        }
        if (external && obs.robotAction) {
            // Robot action under the joint policy, marginal over the current
            // rationality posterior; the posterior itself is not updated.
            auto al = marginal_action_likelihood(h, cfg.grid, obs.statePrev, acted);
            t.robotAction = std::log(al.likelihood);
        }
        h.logWeight += t.transition + t.speak + t.utterance + t.action + t.robotAction;
        if (logTransition == 0.0) h.policy->update(obs.stateNext);
        if (terms) (*terms)[i] = t;
    }
    normalize(out);
    return out;
}

}  // namespace detail

/// Posterior under intervention on the robot's actions: they condition only
/// through state transitions, never as evidence.
inline Belief belief_update(const Belief& b, const Observation& obs, const InferenceConfig& cfg, UtteranceScorer& scorer,
                            std::vector<UpdateTerms>* terms = nullptr) {
    return detail::update_impl(b, obs, cfg, scorer, false, terms);
}

/// Observer posterior: robot actions are also scored under each hypothesis.
inline Belief external_posterior_update(const Belief& b, const Observation& obs, const InferenceConfig& cfg,
                                        UtteranceScorer& scorer, std::vector<UpdateTerms>* terms = nullptr) {
    return detail::update_impl(b, obs, cfg, scorer, true, terms);
}

/// Marginal over cost profiles, indexed like scenario.goals.
inline std::vector<double> goal_posterior(const Belief& b) {
    const Scenario& sc = *b.scenario;
    std::vector<double> out(sc.goals.size(), 0.0);
    for (const auto& h : b.hypotheses) {
        for (std::size_t k = 0; k < sc.goals.size(); ++k) {
            if (sc.gem_slot(sc.goals[k]) == h.goal.gem) out[k] += h.weight;
        }
    }
    return out;
}

inline double goal_probability(const Belief& b, std::string_view gem) {
    const auto post = goal_posterior(b);
    for (std::size_t k = 0; k < b.scenario->goals.size(); ++k) {
        if (b.scenario->goals[k] == gem) return post[k];
    }
    return 0.0;
}

/// Builds the observation for one step from the state before it.
inline Observation make_observation(const Scenario& sc, const State& s, const Action& a,
                                    std::optional<std::string> utterance = std::nullopt) {
    Observation o;
    o.t = s.t;
    o.statePrev = s;
    if (s.turn == Agent::Human) o.humanAction = a;
    else o.robotAction = a;
    o.spoke = utterance.has_value();
    o.utterance = std::move(utterance);
    o.stateNext = step(sc, s, a);
    return o;
}

}  // namespace clips
