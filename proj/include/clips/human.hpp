#pragma once
//
// Simulated principal: follows a ground-truth joint plan, switches to the
// joint policy when the plan breaks, and gives up on the assistant (solo
// policy) once its behaviour looks 10x more like random than cooperative.
//

#include <cmath>

#include "clips/planner.hpp"
#include "clips/search.hpp"

namespace clips {

enum class HumanMode { Scripted, Joint, Fallback };

inline std::string_view to_string(HumanMode m) {
    switch (m) {
        case HumanMode::Scripted: return "scripted";
        case HumanMode::Joint: return "joint";
        case HumanMode::Fallback: return "fallback";
    }
    return "?";
}

struct SimulatedHumanConfig {
    double deviationRatio = 10.0;
    double deviationBeta = 1.0;
    std::size_t budget = std::size_t{1} << 16;
};

class SimulatedHuman {
public:
    SimulatedHuman(std::shared_ptr<const Scenario> sc, GoalSpec goal, std::vector<AgentAction> groundTruthPlan,
                   SimulatedHumanConfig cfg = {})
        : sc_(std::move(sc)), goal_(goal), cfg_(cfg), joint_(sc_, goal, PlannerConfig::assistance()) {
        for (const auto& a : groundTruthPlan) {
            if (a.agent == Agent::Human) script_.push_back(a.action);
        }
    }

    /// Ground-truth plan: optimal joint plan for the true goal from s.
    static std::vector<AgentAction> ground_truth_plan(const Scenario& sc, const State& s, const GoalSpec& g,
                                                      std::size_t budget = std::size_t{1} << 18) {
        auto p = optimal_plan(sc, s, gem_formula(sc, g.gem), PlanMode::Joint, budget, g.profile);
        return p.found() ? p.actions : std::vector<AgentAction>{};
    }

    Action act(const State& s) {
        if (s.turn != Agent::Human) throw std::invalid_argument("simulated human: not the human's turn");
        if (mode_ == HumanMode::Scripted) {
            if (next_ < script_.size() && illegality(*sc_, s, Agent::Human, script_[next_]).empty()) return script_[next_++];
            mode_ = HumanMode::Joint;
        }
        if (mode_ == HumanMode::Joint) return greedy_action(joint_, s);
        auto solo = optimal_plan(*sc_, s, gem_formula(*sc_, goal_.gem), PlanMode::HumanOnlyMoves, cfg_.budget, goal_.profile);
        if (solo.found() && !solo.actions.empty()) return solo.actions.front().action;
        return greedy_action(joint_, s);
    }

    /// Accumulates log P_random(a) - log P_joint(a) over robot actions and
    /// switches to the solo policy once it reaches log(deviationRatio).
    void observe_robot(const State& s, const Action& a) {
        joint_.update(s);
        const auto d = boltzmann_dist(joint_, s, cfg_.deviationBeta);
        const double pJoint = d.prob_of(a);
        const double pRandom = 1.0 / static_cast<double>(d.actions.size());
        logRatio_ += std::log(pRandom) - std::log(pJoint);
        ++observed_;
        if (mode_ != HumanMode::Fallback && logRatio_ >= std::log(cfg_.deviationRatio) - 1e-12) {
            mode_ = HumanMode::Fallback;
            fallbackAt_ = observed_;
        }
    }

    HumanMode mode() const { return mode_; }
    double log_ratio() const { return logRatio_; }
    /// Number of observed robot actions when fallback triggered.
    std::optional<int> fallback_at() const { return fallbackAt_; }
    PolicyHandle& joint_policy() { return joint_; }

private:
    std::shared_ptr<const Scenario> sc_;
    GoalSpec goal_;
    SimulatedHumanConfig cfg_;
    PolicyHandle joint_;
    std::vector<Action> script_;
    std::size_t next_ = 0;
    HumanMode mode_ = HumanMode::Scripted;
    double logRatio_ = 0.0;
    int observed_ = 0;
    std::optional<int> fallbackAt_;
};

}  // namespace clips
