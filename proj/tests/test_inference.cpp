#include <gtest/gtest.h>

#include <random>

#include "clips/inference.hpp"
#include "support.hpp"

using namespace clips;

namespace {

// Two goals; g2 sits behind the red door, whose key is in the robot's row.
const char* kTwoGoals = R"({"grid": ["########", "#g1.h.d1g2#", "#r.k1####", "########"],
  "legend": {"g1": {"kind":"gem","color":"yellow"}, "g2": {"kind":"gem","color":"blue"},
             "k1": {"kind":"key","color":"red"}, "d1": {"kind":"door","color":"red"}},
  "goals": ["g1", "g2"], "true_goal": "g2", "cost_profiles": [0, 1]})";

// Mirror-symmetric corridor, single profile.
const char* kSymmetric = R"({"grid": ["###########", "#g1...h...g2#", "#####r#####", "###########"],
  "legend": {"g1": {"kind":"gem","color":"yellow"}, "g2": {"kind":"gem","color":"blue"}},
  "goals": ["g1", "g2"], "true_goal": "g1", "cost_profiles": [0]})";

InferenceConfig small_config(InferenceMode mode = InferenceMode::Multimodal) {
    InferenceConfig cfg;
    cfg.mode = mode;
    cfg.grid = BetaGrid::with_gamma_prior({0.5, 1.0, 2.0});
    return cfg;
}

double sum_weights(const Belief& b) {
    double z = 0.0;
    for (const auto& h : b.hypotheses) z += h.weight;
    return z;
}

const Hypothesis& find(const Belief& b, int gem, int profile) {
    for (const auto& h : b.hypotheses) {
        if (h.goal.gem == gem && h.goal.profile == profile) return h;
    }
    throw std::logic_error("no such hypothesis");
}

// Q* for each legal action of the acting agent, from the exhaustive oracle.
std::vector<double> exact_q(const Scenario& sc, test::ExactValues& v, const GoalSpec& g, const State& s,
                            const ActionList& acts) {
    std::vector<double> q;
    for (const Action& a : acts) q.push_back(action_cost(cost_profile(g.profile), s.turn, a) + v(apply_unchecked(sc, s, s.turn, a)));
    return q;
}

double boltzmann_oracle(const std::vector<double>& q, std::size_t i, double beta) {
    double z = 0.0;
    for (double x : q) z += std::isinf(x) ? 0.0 : std::exp(-beta * x);
    if (z == 0.0) return 1.0 / static_cast<double>(q.size());
    return std::isinf(q[i]) ? 0.0 : std::exp(-beta * q[i]) / z;
}

}  // namespace

TEST(BetaGrid, StandardGrid) {
    auto g = BetaGrid::standard();
    ASSERT_EQ(g.values.size(), 33u);
    EXPECT_DOUBLE_EQ(g.values.front(), 0.125);
    EXPECT_DOUBLE_EQ(g.values.back(), 32.0);
    double z = 0.0;
    for (std::size_t j = 0; j < 33; ++j) {
        if (j) {
            EXPECT_GT(g.values[j], g.values[j - 1]);
        }
        z += g.prior[j];
    }
    EXPECT_NEAR(z, 1.0, 1e-12);
    // Gamma(0.5, 1) density is proportional to x^-1/2 e^-x.
    auto dens = [](double x) { return std::exp(-x) / std::sqrt(x); };
    EXPECT_NEAR(g.prior[4] / g.prior[0], dens(g.values[4]) / dens(g.values[0]), 1e-9);
    EXPECT_THROW(BetaGrid::with_gamma_prior({}), std::invalid_argument);
    EXPECT_THROW(BetaGrid::with_gamma_prior({-1.0}), std::invalid_argument);
}

TEST(BeliefInit, UniformOverGoalsAndProfiles) {
    auto four = parse_scenario(R"({"grid": ["hrg1g2g3g4"], "legend": {"g1": {"kind":"gem","color":"red"},
        "g2": {"kind":"gem","color":"blue"}, "g3": {"kind":"gem","color":"green"}, "g4": {"kind":"gem","color":"yellow"}},
        "goals": ["g1","g2","g3","g4"], "true_goal": "g1"})");
    auto b = belief_init(test::share(four), small_config());
    ASSERT_EQ(b.hypotheses.size(), 16u);
    for (const auto& h : b.hypotheses) EXPECT_NEAR(h.weight, 1.0 / 16, 1e-15);
    for (double p : goal_posterior(b)) EXPECT_NEAR(p, 0.25, 1e-12);

    auto one = parse_scenario(R"({"grid": ["hrg1"], "legend": {"g1": {"kind":"gem","color":"red"}},
        "goals": ["g1"], "true_goal": "g1", "cost_profiles": [2]})");
    auto b1 = belief_init(test::share(one), small_config());
    ASSERT_EQ(b1.hypotheses.size(), 1u);
    EXPECT_DOUBLE_EQ(b1.hypotheses[0].weight, 1.0);

    auto b4 = belief_init(test::share(parse_scenario(kTwoGoals)), small_config());
    ASSERT_EQ(b4.hypotheses.size(), 4u);
    for (const auto& h : b4.hypotheses) EXPECT_DOUBLE_EQ(h.weight, 0.25);
}

TEST(GoalPosterior, Marginalizes) {
    auto b = belief_init(test::share(parse_scenario(kTwoGoals)), small_config());
    std::vector<double> w = {0.3, 0.2, 0.4, 0.1};
    for (std::size_t i = 0; i < 4; ++i) b.hypotheses[i].weight = w[i];
    auto post = goal_posterior(b);
    EXPECT_NEAR(post[0], 0.5, 1e-12);
    EXPECT_NEAR(post[1], 0.5, 1e-12);
    EXPECT_NEAR(goal_probability(b, "g1"), 0.5, 1e-12);
    for (auto& h : b.hypotheses) h.weight = 0.0;
    b.hypotheses[2].weight = 1.0;
    EXPECT_DOUBLE_EQ(goal_probability(b, "g2"), 1.0);
}

TEST(MarginalActionLikelihood, SingleBetaIsBoltzmann) {
    auto sc = test::share(parse_scenario(kTwoGoals));
    InferenceConfig cfg = small_config();
    cfg.grid = BetaGrid::with_prior({1.5}, {1.0});
    auto b = belief_init(sc, cfg);
    const State s0 = initial_state(*sc);
    const auto& h = b.hypotheses[0];
    auto dist = boltzmann_dist(*h.policy, s0, 1.5);
    for (std::size_t i = 0; i < dist.actions.size(); ++i) {
        auto al = marginal_action_likelihood(h, cfg.grid, s0, dist.actions[i]);
        EXPECT_NEAR(al.likelihood, dist.probs[i], 1e-12);
        EXPECT_DOUBLE_EQ(al.betaPosterior[0], 1.0);
    }
    EXPECT_THROW(marginal_action_likelihood(h, cfg.grid, s0, Action::pickup(*sc->find_item("k1"))), IllegalAction);
}

TEST(MarginalActionLikelihood, OptimalActionFavoursLargerBeta) {
    auto sc = test::share(parse_scenario(kSymmetric));
    InferenceConfig cfg;
    auto b = belief_init(sc, cfg);
    const State s0 = initial_state(*sc);
    const auto& h = find(b, 0, 0);  // goal g1: moving left is optimal
    auto al = marginal_action_likelihood(h, cfg.grid, s0, Action::move(ActionKind::Left));
    double cdfPrior = 0.0, cdfPost = 0.0;
    for (std::size_t j = 0; j < cfg.grid.values.size(); ++j) {
        cdfPrior += h.betaPosterior[j];
        cdfPost += al.betaPosterior[j];
        EXPECT_LE(cdfPost, cdfPrior + 1e-12) << j;
    }
    EXPECT_GT(cfg.grid.mean(al.betaPosterior), cfg.grid.mean(h.betaPosterior));
}

TEST(MarginalActionLikelihood, UninformativeWhenGoalUnreachable) {
    // The gem is walled off: every Q-value is infinite, so the policy is uniform.
    auto sc = test::share(parse_scenario(R"({"grid": ["#######", "#h.r#g1#", "#######"],
        "legend": {"g1": {"kind":"gem","color":"red"}}, "goals": ["g1"], "true_goal": "g1"})"));
    InferenceConfig cfg;
    auto b = belief_init(sc, cfg);
    const State s0 = initial_state(*sc);
    const auto acts = legal_actions(*sc, s0, Agent::Human);
    for (const auto& h : b.hypotheses) {
        auto al = marginal_action_likelihood(h, cfg.grid, s0, acts[0]);
        EXPECT_NEAR(al.likelihood, 1.0 / static_cast<double>(acts.size()), 1e-12);
        for (std::size_t j = 0; j < al.betaPosterior.size(); ++j) EXPECT_NEAR(al.betaPosterior[j], h.betaPosterior[j], 1e-15);
    }
}

TEST(BeliefUpdate, StepTowardGoalIsDecisive) {
    auto sc = test::share(parse_scenario(kSymmetric));
    InferenceConfig cfg;
    cfg.grid = BetaGrid::with_prior({8.0}, {1.0});
    TemplateScorer ts;
    auto b = belief_init(sc, cfg);
    const State s0 = initial_state(*sc);
    auto b1 = belief_update(b, make_observation(*sc, s0, Action::move(ActionKind::Left)), cfg, ts);
    EXPECT_GT(goal_probability(b1, "g1"), 0.9);

    // Brute force: two hypotheses, one beta.
    test::ExactValues v1(*sc, s0, {0, 0}), v2(*sc, s0, {1, 0});
    const auto acts = legal_actions(*sc, s0, Agent::Human);
    const std::size_t left = std::find(acts.begin(), acts.end(), Action::move(ActionKind::Left)) - acts.begin();
    const double p1 = boltzmann_oracle(exact_q(*sc, v1, {0, 0}, s0, acts), left, 8.0);
    const double p2 = boltzmann_oracle(exact_q(*sc, v2, {1, 0}, s0, acts), left, 8.0);
    EXPECT_NEAR(goal_probability(b1, "g1"), p1 / (p1 + p2), 1e-9);
}

TEST(BeliefUpdate, SymmetricWaitLeavesWeights) {
    auto sc = test::share(parse_scenario(kSymmetric));
    InferenceConfig cfg;
    TemplateScorer ts;
    auto b = belief_init(sc, cfg);
    auto b1 = belief_update(b, make_observation(*sc, initial_state(*sc), Action::wait()), cfg, ts);
    for (std::size_t i = 0; i < b.hypotheses.size(); ++i) EXPECT_NEAR(b1.hypotheses[i].weight, b.hypotheses[i].weight, 1e-12);
}

TEST(BeliefUpdate, RobotActionsAreInterventions) {
    auto sc = test::share(parse_scenario(kTwoGoals));
    InferenceConfig cfg = small_config();
    TemplateScorer ts;
    auto b = belief_init(sc, cfg);
    State s = step(*sc, initial_state(*sc), Action::move(ActionKind::Left));
    auto b1 = belief_update(b, make_observation(*sc, initial_state(*sc), Action::move(ActionKind::Left)), cfg, ts);
    ASSERT_EQ(s.turn, Agent::Robot);
    // Every legal robot action leaves the weights alone, whatever the
    // hypotheses think of it.
    for (const Action& a : legal_actions(*sc, s, Agent::Robot)) {
        std::vector<UpdateTerms> terms;
        auto b2 = belief_update(b1, make_observation(*sc, s, a), cfg, ts, &terms);
        for (std::size_t i = 0; i < b1.hypotheses.size(); ++i) {
            EXPECT_NEAR(b2.hypotheses[i].weight, b1.hypotheses[i].weight, 1e-12);
            EXPECT_EQ(b2.hypotheses[i].betaPosterior, b1.hypotheses[i].betaPosterior);
            EXPECT_EQ(terms[i].action, 0.0);
            EXPECT_EQ(terms[i].robotAction, 0.0);
        }
    }
}

TEST(ExternalPosterior, ScoresRobotActions) {
    auto sc = test::share(parse_scenario(kTwoGoals));
    InferenceConfig cfg = small_config();
    TemplateScorer ts;
    auto b = belief_init(sc, cfg);
    const State s0 = initial_state(*sc);
    const Action left = Action::move(ActionKind::Left);
    const State s1 = step(*sc, s0, left);
    auto b1 = belief_update(b, make_observation(*sc, s0, left), cfg, ts);

    // Robot waits: under g2 it should be heading for the key, under g1 it has
    // nothing to do, so the g2 hypotheses lose weight in the observer update.
    std::vector<UpdateTerms> ti, te;
    auto internal = belief_update(b1, make_observation(*sc, s1, Action::wait()), cfg, ts, &ti);
    auto external = external_posterior_update(b1, make_observation(*sc, s1, Action::wait()), cfg, ts, &te);
    const int g2 = *sc->gem_slot("g2");
    for (int p : {0, 1}) EXPECT_LT(find(external, g2, p).weight, find(internal, g2, p).weight);

    // Weight ratios differ exactly by the robot-action likelihoods.
    for (std::size_t i = 1; i < internal.hypotheses.size(); ++i) {
        const double lhs = std::log(external.hypotheses[i].weight / external.hypotheses[0].weight) -
                           std::log(internal.hypotheses[i].weight / internal.hypotheses[0].weight);
        EXPECT_NEAR(lhs, te[i].robotAction - te[0].robotAction, 1e-9);
    }

    // Robot action scored equally by every hypothesis: no difference.
    auto sc1 = test::share(parse_scenario(kSymmetric));
    auto bs = belief_init(sc1, cfg);
    const State t0 = initial_state(*sc1);
    const State t1 = step(*sc1, t0, Action::wait());
    auto bs1 = belief_update(bs, make_observation(*sc1, t0, Action::wait()), cfg, ts);
    auto in2 = belief_update(bs1, make_observation(*sc1, t1, Action::wait()), cfg, ts);
    auto ex2 = external_posterior_update(bs1, make_observation(*sc1, t1, Action::wait()), cfg, ts);
    for (std::size_t i = 0; i < in2.hypotheses.size(); ++i) EXPECT_NEAR(in2.hypotheses[i].weight, ex2.hypotheses[i].weight, 1e-12);
}

TEST(BeliefUpdate, ImpossibleObservationIsDegenerate) {
    auto sc = test::share(parse_scenario(kTwoGoals));
    InferenceConfig cfg = small_config();
    TemplateScorer ts;
    auto b = belief_init(sc, cfg);
    Observation o = make_observation(*sc, initial_state(*sc), Action::move(ActionKind::Left));
    o.stateNext = step(*sc, initial_state(*sc), Action::move(ActionKind::Right));
    EXPECT_THROW(belief_update(b, o, cfg, ts), DegenerateBelief);

    Observation bad = make_observation(*sc, initial_state(*sc), Action::wait());
    bad.spoke = true;
    EXPECT_THROW(belief_update(b, bad, cfg, ts), std::invalid_argument);
    bad.spoke = false;
    bad.robotAction = Action::wait();
    EXPECT_THROW(belief_update(b, bad, cfg, ts), std::invalid_argument);
}

TEST(BeliefUpdate, MatchesJointEnumerationOracle) {
    auto sc = test::share(parse_scenario(kTwoGoals));
    InferenceConfig cfg = small_config();
    TemplateScorer ts;
    const State s0 = initial_state(*sc);
    const std::vector<const char*> utterances = {"can you get the red key", "can you unlock the red door",
                                                 "hand me the red key", "i'm getting the yellow gem"};
    std::vector<GoalSpec> specs;
    std::vector<std::unique_ptr<test::ExactValues>> exact;
    for (int g = 0; g < 2; ++g) {
        for (int p : {0, 1}) {
            specs.push_back({*sc->gem_slot(sc->goals[g]), p});
            exact.push_back(std::make_unique<test::ExactValues>(*sc, s0, specs.back()));
        }
    }

    // Greedy rollout under Q*, earliest action on ties, for the command prior.
    auto oracle_language = [&](std::size_t hi, const State& s, const std::string& u) {
        std::vector<AgentAction> roll;
        State cur = s;
        for (int i = 0; i < cfg.utterance.horizon() && !is_goal(cur, specs[hi]); ++i) {
            const auto acts = legal_actions(*sc, cur, cur.turn);
            const auto q = exact_q(*sc, *exact[hi], specs[hi], cur, acts);
            std::size_t best = 0;
            for (std::size_t k = 1; k < q.size(); ++k) {
                if (q[k] < q[best] - kTieTolerance) best = k;
            }
            roll.push_back({cur.turn, acts[best]});
            cur = apply_unchecked(*sc, cur, cur.turn, acts[best]);
        }
        CommandPrior prior;
        prior.commands = enumerate_commands(*sc, extract_salient_actions(roll), cfg.utterance);
        if (prior.commands.empty()) return 1e-6;
        double l = 0.0;
        for (const auto& c : prior.commands) l += std::exp(template_score(u, c)) / static_cast<double>(prior.commands.size());
        return l;
    };

    std::mt19937 rng(2024);
    for (int episode = 0; episode < 12; ++episode) {
        const InferenceMode mode = static_cast<InferenceMode>(episode % 3);
        cfg.mode = mode;
        auto b = belief_init(sc, cfg);
        // joint[hi][j]: unnormalized P(g, profile, beta_j, observations).
        std::vector<std::vector<double>> joint(specs.size(), cfg.grid.prior);
        State s = s0;
        for (int t = 0; t < 10; ++t) {
            auto acts = legal_actions(*sc, s, s.turn);
            const Action a = acts[rng() % acts.size()];
            const State next = step(*sc, s, a);
            if (is_goal(next, specs[0]) || is_goal(next, specs[2])) break;
            std::optional<std::string> u;
            if (s.turn == Agent::Human && rng() % 3 == 0) u = utterances[rng() % utterances.size()];

            for (std::size_t hi = 0; hi < specs.size(); ++hi) {
                double factor = u ? cfg.utterance.pSpeak : 1.0 - cfg.utterance.pSpeak;
                if (u && mode != InferenceMode::ActionOnly) factor *= oracle_language(hi, s, *u);
                for (std::size_t j = 0; j < cfg.grid.values.size(); ++j) {
                    double f = factor;
                    if (s.turn == Agent::Human && mode != InferenceMode::LanguageOnly) {
                        const std::size_t ai = std::find(acts.begin(), acts.end(), a) - acts.begin();
                        f *= boltzmann_oracle(exact_q(*sc, *exact[hi], specs[hi], s, acts), ai, cfg.grid.values[j]);
                    }
                    joint[hi][j] *= f;
                }
            }
            b = belief_update(b, make_observation(*sc, s, a, u), cfg, ts);
            s = next;

            double z = 0.0;
            for (const auto& row : joint) {
                for (double x : row) z += x;
            }
            double tv = 0.0;
            for (std::size_t hi = 0; hi < specs.size(); ++hi) {
                const auto& h = find(b, specs[hi].gem, specs[hi].profile);
                double wh = 0.0;
                for (double x : joint[hi]) wh += x;
                tv += std::abs(h.weight - wh / z);
                if (mode != InferenceMode::LanguageOnly) {
                    for (std::size_t j = 0; j < cfg.grid.values.size(); ++j)
                        EXPECT_NEAR(h.betaPosterior[j], joint[hi][j] / wh, 1e-9) << "episode " << episode << " t " << t;
                }
            }
            EXPECT_LT(0.5 * tv, 1e-9) << "episode " << episode << " t " << t;
        }
    }
}

TEST(BeliefUpdate, NormalizationContinuityAndAblation) {
    auto sc = test::share(parse_scenario(kTwoGoals));
    TemplateScorer ts;
    PlannerPool pool(sc);
    InferenceConfig mm = small_config(InferenceMode::Multimodal);
    InferenceConfig ao = small_config(InferenceMode::ActionOnly);
    InferenceConfig lo = small_config(InferenceMode::LanguageOnly);
    auto bm = belief_init(pool, mm), ba = belief_init(pool, ao), bl = belief_init(pool, lo);
    std::mt19937 rng(99);
    State s = initial_state(*sc);
    const std::vector<const char*> utterances = {"can you get the red key", "go away", "i'm getting the yellow gem"};
    for (int t = 0; t < 12; ++t) {
        auto acts = legal_actions(*sc, s, s.turn);
        const Action a = acts[rng() % acts.size()];
        std::optional<std::string> u;
        if (s.turn == Agent::Human && rng() % 2) u = utterances[rng() % utterances.size()];
        const auto obs = make_observation(*sc, s, a, u);
        std::vector<UpdateTerms> tm, ta, tl;
        bm = belief_update(bm, obs, mm, ts, &tm);
        ba = belief_update(ba, obs, ao, ts, &ta);
        bl = belief_update(bl, obs, lo, ts, &tl);
        for (const Belief* b : {&bm, &ba, &bl}) {
            EXPECT_NEAR(sum_weights(*b), 1.0, 1e-12);
            for (const auto& h : b->hypotheses) {
                double z = 0.0;
                for (double x : h.betaPosterior) z += x;
                EXPECT_NEAR(z, 1.0, 1e-12);
            }
        }
        for (const auto& h : bl.hypotheses) EXPECT_GT(h.weight, 0.0);
        for (std::size_t i = 0; i < tm.size(); ++i) {
            EXPECT_NEAR(tm[i].utterance + tm[i].action, ta[i].action + tl[i].utterance, 1e-12);
            EXPECT_EQ(ta[i].utterance, 0.0);
            EXPECT_EQ(tl[i].action, 0.0);
        }
        s = obs.stateNext;
        if (is_goal(s, {0, 0}) || is_goal(s, {1, 0})) break;
    }
}

TEST(BeliefUpdate, UtteranceShiftsTowardMatchingGoal) {
    auto sc = test::share(parse_scenario(kTwoGoals));
    InferenceConfig cfg = small_config(InferenceMode::LanguageOnly);
    TemplateScorer ts;
    auto b = belief_init(sc, cfg);
    const State s0 = initial_state(*sc);
    auto b1 = belief_update(b, make_observation(*sc, s0, Action::wait(), "Can you get the red key?"), cfg, ts);
    EXPECT_GT(goal_probability(b1, "g2"), 0.99);
}
