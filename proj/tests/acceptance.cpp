// Acceptance checks, one line per criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include "clips/episode.hpp"
#include "clips/evaluation.hpp"
#include "support.hpp"

using namespace clips;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = "failed: " + what;
        pass = pass && ok;
    }
};

int failures = 0;

void run(int id, const char* title, double limitSeconds, const std::function<Verdict()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v.pass = false;
        v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= limitSeconds) {
        v.pass = false;
        v.detail += " (over the " + std::to_string(static_cast<int>(limitSeconds)) + " s limit)";
    }
    if (!v.pass) ++failures;
    std::printf("[%s] %d. %s: %s [%.2f s]\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double x, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    return buf;
}

std::shared_ptr<const Scenario> pack_scenario(const std::string& name) {
    return test::share(load_scenario(std::string(CLIPS_DATA_DIR) + "/pack/" + name + ".json"));
}

const std::vector<std::string> kPack = {"ambiguous_predicates", "ambiguous_indexicals", "partial_instructions",
                                        "uncertain_goals",      "joint_instructions",   "safe_assistance"};

// Small maps for the exact-inference checks: two gems, two cost profiles.
const std::vector<const char*> kSmallMaps = {
    R"({"name": "open", "grid": ["g1...g2", "..h..", "#.r.#"],
      "legend": {"g1": {"kind":"gem","color":"yellow"}, "g2": {"kind":"gem","color":"blue"}},
      "goals": ["g1", "g2"], "true_goal": "g1", "cost_profiles": [0, 1]})",
    R"({"name": "door", "grid": ["g1.hd1g2", ".####", "k1.r.."],
      "legend": {"g1": {"kind":"gem","color":"yellow"}, "g2": {"kind":"gem","color":"blue"},
                 "k1": {"kind":"key","color":"red"}, "d1": {"kind":"door","color":"red"}},
      "goals": ["g1", "g2"], "true_goal": "g2", "cost_profiles": [0, 2]})",
    R"({"name": "ring", "grid": ["h...g1", ".###.", "..r..", ".###.", "g2...."],
      "legend": {"g1": {"kind":"gem","color":"red"}, "g2": {"kind":"gem","color":"blue"}},
      "goals": ["g1", "g2"], "true_goal": "g2", "cost_profiles": [1, 3]})",
};

const std::vector<const char*> kUtterances = {"can you get the red key", "can you unlock the red door",
                                              "hand me the red key", "i'm getting the yellow gem",
                                              "get the blue gem"};

InferenceConfig three_betas(InferenceMode mode) {
    InferenceConfig cfg;
    cfg.mode = mode;
    cfg.grid = BetaGrid::with_gamma_prior({0.5, 1.0, 2.0});
    return cfg;
}

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

const Hypothesis& find(const Belief& b, const GoalSpec& g) {
    for (const auto& h : b.hypotheses) {
        if (h.goal.gem == g.gem && h.goal.profile == g.profile) return h;
    }
    throw std::logic_error("no such hypothesis");
}

bool any_goal(const Scenario& sc, const State& s) {
    for (const auto& g : sc.goals) {
        if (is_goal(s, {*sc.gem_slot(g), 0})) return true;
    }
    return false;
}

// Random legal action that does not end the episode by picking up a gem.
Action nonterminal_action(const Scenario& sc, const State& s, const ActionList& acts, std::mt19937& rng) {
    std::vector<Action> ok;
    for (const Action& a : acts) {
        if (!any_goal(sc, apply_unchecked(sc, s, s.turn, a))) ok.push_back(a);
    }
    return ok[rng() % ok.size()];
}

// ---------------------------------------------------------------------------

Verdict exact_inference() {
    Verdict v;
    TemplateScorer ts;
    double worstTv = 0.0;
    int steps = 0;
    for (const char* text : kSmallMaps) {
        auto sc = test::share(parse_scenario(text));
        const State s0 = initial_state(*sc);
        std::vector<GoalSpec> specs;
        std::vector<std::unique_ptr<test::ExactValues>> exact;
        for (const auto& gem : sc->goals) {
            for (int p : sc->costProfiles) {
                specs.push_back({*sc->gem_slot(gem), p});
                exact.push_back(std::make_unique<test::ExactValues>(*sc, s0, specs.back()));
            }
        }
        std::mt19937 rng(2024);
        for (int episode = 0; episode < 3; ++episode) {
            InferenceConfig cfg = three_betas(static_cast<InferenceMode>(episode));
            // Command prior from a greedy rollout under Q*, earliest action on ties.
            auto language = [&](std::size_t hi, const State& s, const std::string& u) {
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
                const auto cmds = enumerate_commands(*sc, extract_salient_actions(roll), cfg.utterance);
                if (cmds.empty()) return 1e-6;
                double l = 0.0;
                for (const auto& c : cmds) l += std::exp(template_score(u, c)) / static_cast<double>(cmds.size());
                return l;
            };

            auto b = belief_init(sc, cfg);
            std::vector<std::vector<double>> joint(specs.size(), cfg.grid.prior);
            State s = s0;
            for (int t = 0; t < 10; ++t) {
                const auto acts = legal_actions(*sc, s, s.turn);
                const Action a = nonterminal_action(*sc, s, acts, rng);
                const State next = step(*sc, s, a);
                std::optional<std::string> u;
                if (s.turn == Agent::Human && rng() % 3 == 0) u = kUtterances[rng() % kUtterances.size()];
                const std::size_t ai = std::find(acts.begin(), acts.end(), a) - acts.begin();
                for (std::size_t hi = 0; hi < specs.size(); ++hi) {
                    double factor = u ? cfg.utterance.pSpeak : 1.0 - cfg.utterance.pSpeak;
                    if (u && cfg.mode != InferenceMode::ActionOnly) factor *= language(hi, s, *u);
                    const auto q = exact_q(*sc, *exact[hi], specs[hi], s, acts);
                    for (std::size_t j = 0; j < cfg.grid.values.size(); ++j) {
                        double f = factor;
                        if (s.turn == Agent::Human && cfg.mode != InferenceMode::LanguageOnly)
                            f *= boltzmann_oracle(q, ai, cfg.grid.values[j]);
                        joint[hi][j] *= f;
                    }
                }
                b = belief_update(b, make_observation(*sc, s, a, u), cfg, ts);
                s = next;
                ++steps;

                double z = 0.0;
                for (const auto& row : joint) {
                    for (double x : row) z += x;
                }
                double tv = 0.0;
                for (std::size_t hi = 0; hi < specs.size(); ++hi) {
                    double wh = 0.0;
                    for (double x : joint[hi]) wh += x;
                    tv += std::abs(find(b, specs[hi]).weight - wh / z);
                }
                worstTv = std::max(worstTv, 0.5 * tv);
            }
        }
    }
    v.require(worstTv <= 1e-9, "total variation " + fmt(worstTv));
    v.require(steps == 90, "wrong number of scripted steps (" + std::to_string(steps) + ")");
    if (v.pass) v.detail = std::to_string(kSmallMaps.size()) + " maps, " + std::to_string(steps) + " steps, max TV " + fmt(worstTv, 3);
    return v;
}

// ---------------------------------------------------------------------------

// Every reachable state of a small map, for pre-solving value tables.
std::vector<State> reachable(const Scenario& sc) {
    std::vector<State> out{initial_state(sc)};
    std::set<std::uint64_t> seen{out[0].fingerprint()};
    for (std::size_t i = 0; i < out.size(); ++i) {
        const State s = out[i];
        for (const Action& a : legal_actions(sc, s, s.turn)) {
            const State n = apply_unchecked(sc, s, s.turn, a);
            if (seen.insert(n.fingerprint()).second) out.push_back(n);
        }
    }
    return out;
}

Verdict do_operator() {
    Verdict v;
    TemplateScorer ts;
    int internalSame = 0, externalDiffer = 0;
    for (const char* text : kSmallMaps) {
        auto sc = test::share(parse_scenario(text));
        const InferenceConfig cfg = three_betas(InferenceMode::Multimodal);
        const auto states = reachable(*sc);
        PlannerPool plain(sc), perturbed(sc);
        auto ia = belief_init(plain, cfg), ib = belief_init(perturbed, cfg);
        auto ea = ia, eb = ib;
        // Solve every table to a fixed point, where later updates leave it
        // alone. Backups can differ from search results in the last bit, so
        // one pass is not always enough.
        for (auto* pool : {&plain, &perturbed}) {
            for (const auto& h : ia.hypotheses) {
                auto p = pool->get(h.goal);
                for (bool changed = true; changed;) {
                    changed = false;
                    for (const State& s : states) {
                        const double before = p->value(s);
                        p->update(s);
                        changed = changed || p->value(s) != before;
                    }
                }
                for (const State& s : states) v.require(p->is_exact(s) || std::isinf(p->value(s)), "table not exact");
            }
        }
        // Lower V̂ on human-turn states only: this moves every robot Q̂ and no
        // human Q̂, and backups (which only raise values) cannot undo it.
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> drop(0.5, 3.0);
        for (const auto& h : ib.hypotheses) {
            auto p = perturbed.get(h.goal);
            for (const State& s : states) {
                if (s.turn == Agent::Human && !std::isinf(p->value(s))) p->set_value(s, p->value(s) - drop(rng));
            }
        }

        State s = initial_state(*sc);
        std::mt19937 walk(11);
        for (int t = 0; t < 10; ++t) {
            const auto acts = legal_actions(*sc, s, s.turn);
            const Action a = nonterminal_action(*sc, s, acts, walk);
            // No utterances here: the command prior is built from joint
            // rollouts, so it does depend on the robot's values.
            const auto obs = make_observation(*sc, s, a);
            ia = belief_update(ia, obs, cfg, ts);
            ib = belief_update(ib, obs, cfg, ts);
            ea = external_posterior_update(ea, obs, cfg, ts);
            eb = external_posterior_update(eb, obs, cfg, ts);
            bool same = true, differ = false;
            for (std::size_t i = 0; i < ia.hypotheses.size(); ++i) {
                same = same && ia.hypotheses[i].weight == ib.hypotheses[i].weight &&
                       ia.hypotheses[i].betaPosterior == ib.hypotheses[i].betaPosterior;
                differ = differ || std::abs(ea.hypotheses[i].weight - eb.hypotheses[i].weight) > 1e-9;
            }
            internalSame += same;
            v.require(same, "intervention beliefs diverged on " + sc->name);
            externalDiffer += differ;
            s = obs.stateNext;
        }
    }
    v.require(externalDiffer > 0, "observer updates never differed");
    if (v.pass)
        v.detail = std::to_string(internalSame) + " steps bit-identical under intervention; observer posterior differs on " +
                   std::to_string(externalDiffer);
    return v;
}

// ---------------------------------------------------------------------------

Verdict planner_convergence() {
    Verdict v;
    std::mt19937 rng(31);
    int visited = 0, stored = 0;
    for (int m = 0; m < 20;) {
        auto sc = test::share(test::random_map(rng));
        const GoalSpec g{0, m % kProfileCount};
        const State s0 = initial_state(*sc);
        test::ExactValues exact(*sc, s0, g);
        if (std::isinf(exact(s0))) continue;
        ++m;
        PolicyHandle h(sc, g, PlannerConfig{std::max<std::size_t>(exact.size(), 1024), std::nullopt, true});
        State s = s0;
        double cost = 0.0;
        for (int i = 0; i < 400 && !is_goal(s, g); ++i) {
            const Action a = greedy_action(h, s);
            ++visited;
            v.require(h.value(s) <= exact(s) + 1e-9, "V̂ above V* on map " + std::to_string(m));
            cost += action_cost(h.profile(), s.turn, a);
            s = step(*sc, s, a);
        }
        v.require(is_goal(s, g), "greedy run did not reach the goal on map " + std::to_string(m));
        v.require(std::abs(cost - exact(s0)) <= 1e-9,
                  "map " + std::to_string(m) + " cost " + fmt(cost) + " vs V* " + fmt(exact(s0)));
        for (const State& r : reachable(*sc)) {
            const auto val = h.stored_value(r);
            if (!val || !exact.contains(r)) continue;
            ++stored;
            v.require(*val <= exact(r) + 1e-9, "stored V̂ above V* on map " + std::to_string(m));
        }
    }
    if (v.pass)
        v.detail = "20 maps, " + std::to_string(visited) + " visited and " + std::to_string(stored) +
                   " stored states admissible, greedy cost = V*(s0)";
    return v;
}

// ---------------------------------------------------------------------------

Verdict boltzmann() {
    Verdict v;
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> q(0.0, 30.0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x(1 + i % 9);
        for (double& e : x) e = q(rng);
        for (double beta : {0.125, 1.0, 8.0, 64.0}) {
            double z = 0.0;
            for (double p : boltzmann_probs(x, beta)) z += p;
            worst = std::max(worst, std::abs(z - 1.0));
        }
    }
    v.require(worst <= 1e-12, "normalization error " + fmt(worst));
    const double p = boltzmann_probs({1.0, 2.0}, 1.0)[0];
    v.require(std::abs(p - 0.73106) <= 1e-5, "P(a1) = " + fmt(p, 8));

    // Rationality posterior after a run of human actions vs direct Bayes on
    // the grid with the same Q̂.
    auto sc = test::share(parse_scenario(kSmallMaps[1]));
    const InferenceConfig cfg = three_betas(InferenceMode::ActionOnly);
    TemplateScorer ts;
    PlannerPool pool(sc);
    auto b = belief_init(pool, cfg);
    std::vector<std::vector<double>> direct(b.hypotheses.size(), cfg.grid.prior);
    std::mt19937 walk(5);
    State s = initial_state(*sc);
    double rb = 0.0;
    for (int t = 0; t < 12; ++t) {
        const auto acts = legal_actions(*sc, s, s.turn);
        const Action a = acts[walk() % acts.size()];
        if (s.turn == Agent::Human) {
            for (std::size_t i = 0; i < b.hypotheses.size(); ++i) {
                auto& pol = *b.hypotheses[i].policy;
                pol.update(s);
                std::vector<double> qs;
                std::size_t idx = 0;
                for (std::size_t k = 0; k < acts.size(); ++k) {
                    qs.push_back(pol.q_value(s, acts[k]));
                    if (acts[k] == a) idx = k;
                }
                for (std::size_t j = 0; j < cfg.grid.values.size(); ++j) direct[i][j] *= boltzmann_probs(qs, cfg.grid.values[j])[idx];
            }
        }
        b = belief_update(b, make_observation(*sc, s, a), cfg, ts);
        s = step(*sc, s, a);
        for (std::size_t i = 0; i < b.hypotheses.size(); ++i) {
            double z = 0.0;
            for (double x : direct[i]) z += x;
            for (std::size_t j = 0; j < cfg.grid.values.size(); ++j)
                rb = std::max(rb, std::abs(b.hypotheses[i].betaPosterior[j] - direct[i][j] / z));
        }
        if (any_goal(*sc, s)) break;
    }
    v.require(rb <= 1e-12, "beta posterior off by " + fmt(rb));
    if (v.pass) v.detail = "sum err " + fmt(worst, 2) + ", P = " + fmt(p, 7) + ", beta posterior err " + fmt(rb, 2);
    return v;
}

// ---------------------------------------------------------------------------

std::vector<PackRun> gPackRuns;

Verdict mode_orderings() {
    Verdict v;
    const auto pack = load_pack(std::string(CLIPS_DATA_DIR) + "/pack");
    v.require(pack.entries.size() == 6, "pack does not have 6 scenarios");
    TemplateScorer scorer;
    gPackRuns = run_pack(pack, standard_modes(0), scorer);
    std::map<std::string, const MetricsReport*> by;
    for (const auto& r : gPackRuns) {
        v.require(r.failures.empty(), r.label + " had failures");
        by[r.label] = &r.report;
    }
    const auto& clips = *by.at("clips");
    const auto& naive = *by.at("literal-naive");
    v.require(clips.precision.mean == 1.0 && clips.recall.mean == 1.0, "CLIPS precision/recall " + fmt(clips.precision.mean) +
                                                                           "/" + fmt(clips.recall.mean));
    v.require(naive.precision.mean <= clips.precision.mean - 0.2, "literal-naive precision " + fmt(naive.precision.mean));
    v.require(naive.relPlanLength.mean >= 1.2, "literal-naive relative length " + fmt(naive.relPlanLength.mean));
    const double ao = by.at("action-only")->pTrueGoal.mean, lo = by.at("language-only")->pTrueGoal.mean,
                 mm = clips.pTrueGoal.mean;
    v.require(ao <= lo && lo <= mm, "P(g_true) " + fmt(ao) + " / " + fmt(lo) + " / " + fmt(mm));
    if (v.pass)
        v.detail = "CLIPS P/R 1/1, naive P " + fmt(naive.precision.mean, 3) + " rel.len " + fmt(naive.relPlanLength.mean, 3) +
                   "; P(g_true) action " + fmt(ao, 3) + " <= language " + fmt(lo, 3) + " <= CLIPS " + fmt(mm, 3);
    return v;
}

// ---------------------------------------------------------------------------

Verdict reconstructions() {
    Verdict v;
    TemplateScorer scorer;
    {
        const auto sc = pack_scenario("ambiguous_predicates");
        const auto res = run_assistant(sc, RunConfig{}, scorer);
        const auto marg = option_marginals(res);
        const double k2 = marg.count("k2") ? marg.at("k2") : 0.0;
        v.require(k2 >= 0.9, "ambiguous_predicates k2 marginal " + fmt(k2));
        v.detail = "predicates: k2 marginal " + fmt(k2, 3);
    }
    const auto sc = pack_scenario("safe_assistance");
    auto first_unlock = [](const EpisodeResult& r) {
        for (const auto& e : r.events) {
            if (e["type"] == "robot_action" && e["action"] == "unlock") return e["args"][0].get<std::string>();
        }
        return std::string();
    };
    RunConfig qc;
    const auto q = run_assistant(sc, qc, scorer);
    v.require(first_unlock(q) == "d3", "Q_MDP unlocked '" + first_unlock(q) + "'");
    const double g1 = q.goalPosterior.at(0), g2 = q.goalPosterior.at(1);
    v.require(g1 > 0.2 && g2 > 0.2, "both gems should stay likely");

    RunConfig pc;
    pc.assist.mode = AssistMode::Pibar;
    int unsafe = 0;
    const int n = 1000;
    for (int seed = 0; seed < n; ++seed) {
        pc.assist.seed = static_cast<std::uint64_t>(seed);
        if (first_unlock(run_assistant(sc, pc, scorer)) == "d2") ++unsafe;
    }
    const double freq = unsafe / static_cast<double>(n);
    v.require(std::abs(freq - g1) <= 0.05, "pibar unsafe frequency " + fmt(freq) + " vs weight " + fmt(g1));
    if (v.pass)
        v.detail += "; safe: Q_MDP opens d3 (P(g1)=" + fmt(g1, 3) + ", P(g2)=" + fmt(g2, 3) + "), pibar opens d2 in " +
                    fmt(freq, 3) + " of " + std::to_string(n) + " runs";
    return v;
}

// ---------------------------------------------------------------------------

Verdict systematic() {
    Verdict v;
    std::mt19937_64 rng(42);
    std::gamma_distribution<double> g(0.7, 1.0);
    std::uniform_int_distribution<int> size(1, 12);
    const int m = 10;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(static_cast<std::size_t>(size(rng)));
        double z = 0.0;
        for (auto& x : p) z += (x = g(rng) + 1e-9);
        for (auto& x : p) x /= z;
        std::vector<int> c(p.size(), 0);
        const auto idx = systematic_sample(p, m, rng);
        v.require(idx.size() == static_cast<std::size_t>(m), "wrong sample count");
        for (auto i : idx) ++c.at(i);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double mp = m * p[i];
            v.require(c[i] == static_cast<int>(std::floor(mp)) || c[i] == static_cast<int>(std::ceil(mp)),
                      "trial " + std::to_string(trial) + " count " + std::to_string(c[i]) + " for m*p " + fmt(mp));
        }
    }
    if (v.pass) v.detail = "50 distributions, every count in {floor(mp), ceil(mp)}";
    return v;
}

// ---------------------------------------------------------------------------

Verdict fallback() {
    Verdict v;
    // Human boxed in behind a door; only the robot can fetch the key, and
    // the adversarial robot only ever waits.
    auto sc = test::share(parse_scenario(R"({"grid": ["#########", "#hd1.g1.rk1#", "#########"],
      "legend": {"g1": {"kind":"gem","color":"yellow"}, "k1": {"kind":"key","color":"red"},
                 "d1": {"kind":"door","color":"red"}},
      "goals": ["g1"], "true_goal": "g1", "cost_profiles": [0]})"));
    const GoalSpec g{0, 0};
    const State s = step(*sc, initial_state(*sc), Action::wait());
    test::ExactValues ex(*sc, initial_state(*sc), g);
    const auto acts = legal_actions(*sc, s, Agent::Robot);
    double z = 0.0, qWait = 0.0;
    for (const Action& a : acts) {
        const double q = action_cost(cost_profile(0), Agent::Robot, a) + ex(apply_unchecked(*sc, s, Agent::Robot, a));
        z += std::exp(-q);
        if (a == Action::wait()) qWait = q;
    }
    const double delta = std::log(1.0 / static_cast<double>(acts.size())) - (-qWait - std::log(z));
    const int expected = static_cast<int>(std::ceil(std::log(10.0) / delta - 1e-12));
    SimulatedHuman human(sc, g, SimulatedHuman::ground_truth_plan(*sc, initial_state(*sc), g));
    for (int i = 1; i <= expected + 2; ++i) human.observe_robot(s, Action::wait());
    v.require(human.fallback_at() == expected, "fallback at " + (human.fallback_at() ? std::to_string(*human.fallback_at()) : "never") +
                                                   ", expected " + std::to_string(expected));

    TemplateScorer scorer;
    for (const auto& name : kPack) {
        const auto res = run_assistant(pack_scenario(name), RunConfig{}, scorer);
        v.require(!res.fallbackAt, name + " triggered the fallback");
    }
    if (v.pass) v.detail = "adversarial waits trip it at step " + std::to_string(expected) + "; cooperative runs: 0 of 6";
    return v;
}

// ---------------------------------------------------------------------------

Verdict metrics() {
    Verdict v;
    const auto pack = load_pack(std::string(CLIPS_DATA_DIR) + "/pack");
    if (gPackRuns.empty()) {
        TemplateScorer scorer;
        gPackRuns = run_pack(pack, standard_modes(0), scorer);
    }
    for (const auto& run : gPackRuns) {
        const auto self = compute_metrics(run.episodes, pack, run.episodes);
        for (const auto& row : self.rows)
            v.require(row.relPlanLength == 1.0 && row.relHumanCost == 1.0, run.label + " self ratio on " + row.scenario);
    }
    // x, y zero-mean with sum(xy)=2, sum(xx)=2, sum(yy)=8: r = 1/2.
    const std::vector<double> x = {1.0, -1.0, 0.0, 0.0};
    const std::vector<double> y = {1.0, -1.0, std::sqrt(3.0), -std::sqrt(3.0)};
    const double r = pearson(x, y);
    v.require(std::abs(r - 0.5) <= 1e-9, "pearson fixture " + fmt(r, 12));

    const std::vector<double> model = {0.9, 0.1, 0.5, 0.7, 0.2};
    const std::vector<std::vector<double>> ratings = {{1, 1, 0.8}, {0, 0.2, 0}, {0.5, 0.4, 0.6}, {0.9, 0.6, 0.7}, {0.1, 0.3, 0}};
    std::mt19937_64 r1(17), r2(17);
    const auto a = pearson_bootstrap(model, ratings, 1000, r1);
    const auto b = pearson_bootstrap(model, ratings, 1000, r2);
    v.require(a.r == b.r && a.lo == b.lo && a.hi == b.hi, "bootstrap CI not reproducible");
    if (v.pass)
        v.detail = "self ratios 1.00 for " + std::to_string(gPackRuns.size()) + " modes, r = " + fmt(r, 12) + ", CI [" +
                   fmt(a.lo, 3) + ", " + fmt(a.hi, 3) + "] reproducible";
    return v;
}

}  // namespace

int main() {
    run(1, "exact inference vs joint enumeration", 10, exact_inference);
    run(2, "robot actions as interventions", 1, do_operator);
    run(3, "planner admissibility and convergence", 60, planner_convergence);
    run(4, "Boltzmann and rationality posterior", 1, boltzmann);
    run(5, "mode orderings on the pack", 300, mode_orderings);
    run(6, "ambiguous-predicates and safe-assistance behaviour", 300, reconstructions);
    run(7, "systematic sampling", 1, systematic);
    run(8, "simulated-human fallback", 30, fallback);
    run(9, "metric identities", 60, metrics);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures;
}
