#pragma once
//
// Utterance model: salient actions from policy rollouts, lifted command
// enumeration, a deterministic template scorer and the command-mixture
// utterance likelihood. The LLM scorer lives in llm.hpp.
//

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "clips/planner.hpp"

namespace clips {

inline constexpr double kTemplateEpsilon = 0.01;
inline constexpr double kFloorScore = 1e-6;

/// An utterance-relevant action: PickUp, Unlock or Handover. `items` are item
/// indices: pickup [x], unlock [key, door], handover [key].
struct SalientAction {
    Agent agent = Agent::Robot;
    ActionKind kind = ActionKind::PickUp;
    Agent to = Agent::Human;  // Handover recipient
    std::vector<int> items;
    bool operator==(const SalientAction&) const = default;
};

inline bool is_salient(ActionKind k) {
    return k == ActionKind::PickUp || k == ActionKind::Unlock || k == ActionKind::Handover;
}

inline SalientAction to_salient(Agent agent, const Action& a) {
    SalientAction s{agent, a.kind, other(agent), {}};
    switch (a.kind) {
        case ActionKind::PickUp: s.items = {a.item}; break;
        case ActionKind::Unlock: s.items = {a.key, a.item}; break;
        case ActionKind::Handover: s.items = {a.item}; s.to = a.to; break;
        default: break;
    }
    return s;
}

/// Keeps PickUp/Unlock/Handover actions of a rollout in order, dropping repeats.
inline std::vector<SalientAction> extract_salient_actions(const std::vector<AgentAction>& rollout) {
    std::vector<SalientAction> out;
    for (const auto& [agent, a] : rollout) {
        if (!is_salient(a.kind)) continue;
        SalientAction s = to_salient(agent, a);
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommandVar {
    std::string name;  // without '?'
    ItemKind type = ItemKind::Key;
    bool operator==(const CommandVar&) const = default;
};

struct CommandAction {
    ActionKind kind = ActionKind::PickUp;
    Agent actor = Agent::Robot;
    Agent to = Agent::Human;  // Handover recipient
    std::vector<int> args;    // variable indices
    bool operator==(const CommandAction&) const = default;
};

struct ColorConstraint {
    int var = 0;
    Color color = Color::Red;
    bool operator==(const ColorConstraint&) const = default;
};

/// Lifted action sequence with typed variables and iscolor constraints.
/// Agents print as indexicals: the human speaker is "me", the robot "you".
struct Command {
    std::vector<CommandAction> actions;
    std::vector<ColorConstraint> predicates;
    std::vector<CommandVar> vars;
    bool operator==(const Command&) const = default;
};

inline std::string_view indexical(Agent a) { return a == Agent::Human ? "me" : "you"; }

inline std::string to_string(const Command& c) {
    std::string out;
    for (const auto& a : c.actions) {
        if (!out.empty()) out += ' ';
        out += "(" + std::string(to_string(a.kind)) + " " + std::string(indexical(a.actor));
        if (a.kind == ActionKind::Handover) out += " " + std::string(indexical(a.to));
        for (int v : a.args) out += " ?" + c.vars[v].name;
        out += ")";
    }
    if (!c.predicates.empty()) {
        out += " where";
        for (const auto& p : c.predicates) out += " (iscolor ?" + c.vars[p.var].name + " " + std::string(to_string(p.color)) + ")";
    }
    return out;
}

/// Renames variables to <type><n> in first-appearance order and orders
/// predicates by variable. Lifting an already canonical command is identity.
inline Command canonicalize(const Command& c) {
    Command out;
    std::vector<int> remap(c.vars.size(), -1);
    std::map<ItemKind, int> counters;
    for (const auto& a : c.actions) {
        CommandAction na = a;
        for (int& v : na.args) {
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(out.vars.size());
                const ItemKind t = c.vars[v].type;
                out.vars.push_back({std::string(to_string(t)) + std::to_string(++counters[t]), t});
            }
            v = remap[v];
        }
        out.actions.push_back(std::move(na));
    }
    for (const auto& p : c.predicates) {
        if (remap[p.var] >= 0) out.predicates.push_back({remap[p.var], p.color});
    }
    std::stable_sort(out.predicates.begin(), out.predicates.end(),
                     [](const ColorConstraint& a, const ColorConstraint& b) { return a.var < b.var; });
    out.predicates.erase(std::unique(out.predicates.begin(), out.predicates.end()), out.predicates.end());
    return out;
}

/// Replaces object names by typed variables and agents by indexicals.
inline Command lift(const Scenario& sc, const std::vector<SalientAction>& actions) {
    Command c;
    std::map<int, int> varOf;
    for (const auto& a : actions) {
        CommandAction ca{a.kind, a.agent, a.to, {}};
        for (int item : a.items) {
            auto [it, fresh] = varOf.emplace(item, static_cast<int>(c.vars.size()));
            if (fresh) {
                c.vars.push_back({sc.items[item].id, sc.items[item].kind});
                c.predicates.push_back({it->second, sc.items[item].color});
            }
            ca.args.push_back(it->second);
        }
        c.actions.push_back(std::move(ca));
    }
    return canonicalize(c);
}

struct UtteranceModelConfig {
    double pSpeak = 0.05;
    std::optional<int> rolloutHorizon;  // unset: until goal, capped at 50
    int K = 3;
    int rolloutCap = 50;

    int horizon() const { return rolloutHorizon.value_or(rolloutCap); }
    void validate() const {
        if (!(pSpeak > 0.0 && pSpeak < 1.0)) throw std::invalid_argument("pSpeak must lie in (0, 1)");
        if (K < 1) throw std::invalid_argument("K must be >= 1");
    }
};

/// Whether a subset of salient actions survives pruning: at most two action
/// kinds, at least one action by the listener, and no two actions touching
/// the same object (dependent chains such as pickup-then-handover).
inline bool command_subset_allowed(const std::vector<SalientAction>& subset) {
    if (subset.empty()) return false;
    std::vector<ActionKind> kinds;
    bool listener = false;
    for (const auto& a : subset) {
        if (std::find(kinds.begin(), kinds.end(), a.kind) == kinds.end()) kinds.push_back(a.kind);
        listener |= a.agent == Agent::Robot;
    }
    if (kinds.size() > 2 || !listener) return false;
    for (std::size_t i = 0; i < subset.size(); ++i) {
        for (std::size_t j = i + 1; j < subset.size(); ++j) {
            for (int x : subset[i].items) {
                if (std::find(subset[j].items.begin(), subset[j].items.end(), x) != subset[j].items.end()) return false;
            }
        }
    }
    return true;
}

/// All order-preserving subsets of size <= K that survive pruning, lifted and
/// deduplicated, sorted by canonical serialization.
inline std::vector<Command> enumerate_commands(const Scenario& sc, const std::vector<SalientAction>& salient,
                                               const UtteranceModelConfig& cfg) {
    std::map<std::string, Command> unique;
    std::vector<SalientAction> subset;
    auto rec = [&](auto&& self, std::size_t start) -> void {
        if (!subset.empty() && command_subset_allowed(subset)) {
            Command c = lift(sc, subset);
            unique.emplace(to_string(c), std::move(c));
        }
        if (static_cast<int>(subset.size()) == cfg.K) return;
        for (std::size_t i = start; i < salient.size(); ++i) {
            subset.push_back(salient[i]);
            self(self, i + 1);
            subset.pop_back();
        }
    };
    rec(rec, 0);
    std::vector<Command> out;
    out.reserve(unique.size());
    for (auto& [_, c] : unique) out.push_back(std::move(c));
    return out;
}

/// Uniform prior over the commands of one hypothesis at s.
struct CommandPrior {
    std::vector<Command> commands;
    std::vector<SalientAction> salient;
    std::vector<AgentAction> rollout;

    double probability(std::size_t) const { return commands.empty() ? 0.0 : 1.0 / static_cast<double>(commands.size()); }
    double probability(const Command& c) const {
        return std::find(commands.begin(), commands.end(), c) == commands.end() ? 0.0 : probability(std::size_t{0});
    }
};

inline CommandPrior command_prior(PolicyHandle& h, const State& s, const UtteranceModelConfig& cfg) {
    CommandPrior prior;
    prior.rollout = rollout_policy(h, s, cfg.horizon());
    prior.salient = extract_salient_actions(prior.rollout);
    prior.commands = enumerate_commands(h.scenario(), prior.salient, cfg);
    return prior;
}

// ---------------------------------------------------------------------------
// Templates and scoring
// ---------------------------------------------------------------------------

/// Lowercase, punctuation removed, whitespace collapsed.
inline std::string normalize_utterance(std::string_view u) {
    std::string out;
    bool space = false;
    for (unsigned char ch : u) {
        if (std::isalnum(ch)) {
            if (space && !out.empty()) out += ' ';
            space = false;
            out += static_cast<char>(std::tolower(ch));
        } else if (std::isspace(ch)) {
            space = true;
        }
    }
    return out;
}

namespace detail {

inline std::string var_color(const Command& c, int var) {
    for (const auto& p : c.predicates) {
        if (p.var == var) return std::string(to_string(p.color)) + " ";
    }
    return {};
}

inline std::string phrase(const Command& c, const CommandAction& a) {
    const bool me = a.actor == Agent::Human;
    const auto& args = a.args;
    auto noun = [&](int var) { return "the " + var_color(c, var) + std::string(to_string(c.vars[var].type)); };
    switch (a.kind) {
        case ActionKind::PickUp: return (me ? "i'm getting " : "get ") + noun(args[0]);
        case ActionKind::Unlock: return (me ? "i'm unlocking " : "unlock ") + noun(args[1]);
        case ActionKind::Handover: return (me ? "i'm handing you " : "hand me ") + noun(args[0]);
        default: return {};
    }
}

}  // namespace detail

/// The canonical surface forms of a command (currently exactly one):
/// speaker clauses first, then "can you ..." for the listener's actions.
inline std::vector<std::string> command_templates(const Command& c) {
    std::string mine, yours;
    for (const auto& a : c.actions) {
        std::string& dst = a.actor == Agent::Human ? mine : yours;
        if (!dst.empty()) dst += " and ";
        dst += detail::phrase(c, a);
    }
    std::string out = mine;
    if (!yours.empty()) out += (out.empty() ? "can you " : ", can you ") + yours;
    return {out};
}

class UtteranceScorer {
public:
    virtual ~UtteranceScorer() = default;
    /// log P(u | c) for every command, in input order.
    virtual std::vector<double> score(const std::string& u, const std::vector<Command>& commands) = 0;
    virtual std::string name() const = 0;
};

inline double template_score(const std::string& u, const Command& c) {
    const auto forms = command_templates(c);
    const std::string nu = normalize_utterance(u);
    for (const auto& f : forms) {
        if (normalize_utterance(f) == nu) return std::log((1.0 - kTemplateEpsilon) / static_cast<double>(forms.size()));
    }
    return std::log(kFloorScore);
}

class TemplateScorer : public UtteranceScorer {
public:
    std::vector<double> score(const std::string& u, const std::vector<Command>& commands) override {
        std::vector<double> out;
        out.reserve(commands.size());
        for (const auto& c : commands) out.push_back(template_score(u, c));
        return out;
    }
    std::string name() const override { return "template"; }
};

/// log of sum_i exp(logW[i] + logS[i]); -inf when empty.
inline double log_sum_exp(const std::vector<double>& terms) {
    double m = -kInfinity;
    for (double t : terms) m = std::max(m, t);
    if (std::isinf(m)) return m;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

/// log P(u | s, pi) = log sum_c P(u | c) P(c | s, pi); empty support gives
/// the floor score.
inline double utterance_log_likelihood(const std::string& u, const CommandPrior& prior, UtteranceScorer& scorer) {
    if (prior.commands.empty()) return std::log(kFloorScore);
    const auto scores = scorer.score(u, prior.commands);
    const double logP = -std::log(static_cast<double>(prior.commands.size()));
    std::vector<double> terms;
    terms.reserve(scores.size());
    for (double sc : scores) terms.push_back(sc + logP);
    return log_sum_exp(terms);
}

inline double utterance_likelihood(const std::string& u, PolicyHandle& h, const State& s,
                                   const UtteranceModelConfig& cfg, UtteranceScorer& scorer) {
    return std::exp(utterance_log_likelihood(u, command_prior(h, s, cfg), scorer));
}

// ---------------------------------------------------------------------------
// Few-shot examples
// ---------------------------------------------------------------------------

struct FewShotExample {
    std::string command;
    std::string utterance;
    bool operator==(const FewShotExample&) const = default;
};

/// Parses "Command: ..." / "Utterance: ..." line pairs; blank lines and lines
/// starting with '#' are skipped.
inline std::vector<FewShotExample> parse_examples(std::string_view text) {
    std::vector<FewShotExample> out;
    std::optional<std::string> pending;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineNo = 0;
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineNo;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("Command:", 0) == 0) {
            if (pending) throw std::invalid_argument("examples line " + std::to_string(lineNo) + ": command without utterance");
            pending = trim(line.substr(8));
        } else if (line.rfind("Utterance:", 0) == 0) {
            if (!pending) throw std::invalid_argument("examples line " + std::to_string(lineNo) + ": utterance without command");
            out.push_back({*pending, trim(line.substr(10))});
            pending.reset();
        } else {
            throw std::invalid_argument("examples line " + std::to_string(lineNo) + ": expected 'Command:' or 'Utterance:'");
        }
    }
    if (pending) throw std::invalid_argument("examples: trailing command without utterance");
    return out;
}

inline std::vector<FewShotExample> load_examples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open examples file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_examples(ss.str());
}

}  // namespace clips
