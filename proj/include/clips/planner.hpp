#pragma once
//
// Joint-policy computation for one goal specification: an admissible
// minimum-spanning-tree heuristic, real-time adaptive A* value updates with
// cost-minimal path reuse, Q-values and Boltzmann action distributions.
//

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <queue>
#include <unordered_map>
#include <vector>

#include "clips/core.hpp"

namespace clips {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kTieTolerance = 1e-9;

// ---------------------------------------------------------------------------
// Heuristic
// ---------------------------------------------------------------------------

namespace detail {

// A node of the heuristic's spanning tree: a cell that must be visited, or a
// locked door whose neighbourhood must be reached.
struct MstNode {
    int cell = -1;
    int door = -1;
};

inline int door_to_cell(const Scenario& sc, int door, int cell) { return sc.maze.doorDist[door][cell]; }

inline int node_distance(const Scenario& sc, const MstNode& a, const MstNode& b) {
    if (a.door < 0 && b.door < 0) return sc.maze.distance(a.cell, b.cell);
    if (a.door >= 0 && b.door < 0) return door_to_cell(sc, a.door, b.cell);
    if (a.door < 0 && b.door >= 0) return door_to_cell(sc, b.door, a.cell);
    int best = kUnreachable;
    for (int n : sc.neighbors[sc.item_cell(sc.doorSlots[b.door])]) {
        if (n >= 0) best = std::min(best, door_to_cell(sc, a.door, n));
    }
    return best;
}

}  // namespace detail

/// Admissible lower bound on the remaining joint cost to collect g's gem.
///
/// Necessary doors are locked doors whose removal from the relaxed maze
/// disconnects the human from the gem; necessary keys are floor keys that
/// are forced by colour counting (every remaining key of that colour is
/// needed). Doors that separate a forced key from both agents are added
/// until a fixpoint. The movement bound is the larger of the human's own
/// relaxed distance to the gem and the MST over {agents, forced keys,
/// necessary doors, gem}, scaled by the cheapest move; the pickup, unlock
/// and gem-collection costs are added on top.
inline double mst_heuristic(const Scenario& sc, const State& s, const GoalSpec& g) {
    if (is_goal(s, g)) return 0.0;
    const CostProfile& cp = cost_profile(g.profile);
    const Maze& m = sc.maze;
    const int gemCell = sc.item_cell(sc.gemSlots[g.gem]);
    const int dHuman = m.distance(s.human, gemCell);
    if (dHuman >= kUnreachable) return kInfinity;

    const int nDoors = static_cast<int>(sc.doorSlots.size());
    const int nKeys = static_cast<int>(sc.keySlots.size());
    auto separates = [&](int d, int a, int b) { return m.blockedComp[d][a] != m.blockedComp[d][b]; };

    std::uint32_t necDoors = 0;
    for (int d = 0; d < nDoors; ++d) {
        if (s.door_locked(d) && separates(d, s.human, gemCell)) necDoors |= 1u << d;
    }

    std::uint32_t forcedKeys = 0;
    int pickups = 0;
    for (bool changed = true; changed;) {
        changed = false;
        pickups = 0;
        for (int color = 0; color < 4; ++color) {
            int need = 0, held = 0, floor = 0;
            for (int d = 0; d < nDoors; ++d) {
                if ((necDoors >> d & 1u) && static_cast<int>(sc.door_item(d).color) == color) ++need;
            }
            if (need == 0) continue;
            for (int k = 0; k < nKeys; ++k) {
                if (static_cast<int>(sc.key_item(k).color) != color) continue;
                KeyLocation loc = s.key(k);
                if (loc == KeyLocation::Floor) ++floor;
                else if (loc != KeyLocation::Consumed) ++held;
            }
            const int remaining = need - held;
            if (remaining <= 0) continue;
            if (remaining > floor) return kInfinity;
            pickups += remaining;
            if (remaining < floor) continue;
            for (int k = 0; k < nKeys; ++k) {
                if (static_cast<int>(sc.key_item(k).color) == color && s.key(k) == KeyLocation::Floor)
                    forcedKeys |= 1u << k;
            }
        }
        for (int k = 0; k < nKeys; ++k) {
            if (!(forcedKeys >> k & 1u)) continue;
            const int kc = sc.item_cell(sc.keySlots[k]);
            if (m.distance(s.human, kc) >= kUnreachable && m.distance(s.robot, kc) >= kUnreachable) return kInfinity;
            for (int d = 0; d < nDoors; ++d) {
                if (!s.door_locked(d) || (necDoors >> d & 1u)) continue;
                if (separates(d, kc, s.human) && separates(d, kc, s.robot)) {
                    necDoors |= 1u << d;
                    changed = true;
                }
            }
        }
    }

    boost::container::small_vector<detail::MstNode, 16> nodes;
    nodes.push_back({gemCell, -1});
    int unlocks = 0;
    for (int d = 0; d < nDoors; ++d) {
        if (necDoors >> d & 1u) {
            nodes.push_back({-1, d});
            ++unlocks;
        }
    }
    for (int k = 0; k < nKeys; ++k) {
        if (forcedKeys >> k & 1u) nodes.push_back({sc.item_cell(sc.keySlots[k]), -1});
    }

    // Prim's algorithm; the two agents are contracted into one source node.
    const std::size_t n = nodes.size();
    boost::container::small_vector<int, 16> best(n, kUnreachable);
    boost::container::small_vector<bool, 16> inTree(n, false);
    const detail::MstNode humanNode{s.human, -1}, robotNode{s.robot, -1};
    for (std::size_t i = 0; i < n; ++i) {
        best[i] = std::min(detail::node_distance(sc, humanNode, nodes[i]),
                           detail::node_distance(sc, robotNode, nodes[i]));
    }
    long long mst = 0;
    for (std::size_t iter = 0; iter < n; ++iter) {
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!inTree[i] && (pick == n || best[i] < best[pick])) pick = i;
        }
        if (best[pick] >= kUnreachable) return kInfinity;
        inTree[pick] = true;
        mst += best[pick];
        for (std::size_t i = 0; i < n; ++i) {
            if (!inTree[i]) best[i] = std::min(best[i], detail::node_distance(sc, nodes[pick], nodes[i]));
        }
    }

    const double minMove = cp.min_over_agents(CostClass::Move);
    const double movement = std::max(static_cast<double>(mst) * minMove,
                                     static_cast<double>(dHuman) * cp.cost(Agent::Human, CostClass::Move));
    return cp.cost(Agent::Human, CostClass::PickUp) + movement + unlocks * cp.min_over_agents(CostClass::Unlock) +
           pickups * cp.min_over_agents(CostClass::PickUp);
}

// ---------------------------------------------------------------------------
// Planner
// ---------------------------------------------------------------------------

struct PlannerConfig {
    std::size_t nodeBudget = std::size_t{1} << 18;
    std::optional<double> timeLimitSeconds;
    bool pruneIrrelevant = true;

    static PlannerConfig inference() { return PlannerConfig{}; }
    static PlannerConfig assistance() { return PlannerConfig{std::size_t{1} << 16, 10.0, true}; }
};

struct PlannerStats {
    std::size_t updates = 0;
    std::size_t searches = 0;
    std::size_t expansions = 0;
    std::size_t reuseHits = 0;
    std::size_t goalHits = 0;
    std::size_t deadEnds = 0;
    std::size_t budgetStops = 0;
    double seconds = 0.0;
};

/// V̂ estimates keyed by state fingerprint. Entries are seeded lazily from
/// the heuristic and only ever raised; `exact` marks states on a cached
/// cost-minimal path, whose `next` action continues that path.
class ValueTable {
public:
    struct Entry {
        double value = 0.0;
        Action next;
        bool exact = false;
    };

    const Entry* find(std::uint64_t fp) const {
        auto it = entries_.find(fp);
        return it == entries_.end() ? nullptr : &it->second;
    }
    Entry* find(std::uint64_t fp) {
        auto it = entries_.find(fp);
        return it == entries_.end() ? nullptr : &it->second;
    }
    template <typename Seed>
    Entry& get_or_seed(std::uint64_t fp, Seed&& seed) {
        auto [it, inserted] = entries_.try_emplace(fp);
        if (inserted) it->second.value = seed();
        return it->second;
    }
    std::size_t size() const { return entries_.size(); }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& [fp, e] : entries_) f(fp, e);
    }
    void reserve(std::size_t n) { entries_.reserve(n); }

private:
    std::unordered_map<std::uint64_t, Entry> entries_;
};

struct ActionDistribution {
    std::vector<Action> actions;
    std::vector<double> q;
    std::vector<double> probs;

    double prob_of(const Action& a) const {
        for (std::size_t i = 0; i < actions.size(); ++i) {
            if (actions[i] == a) return probs[i];
        }
        return 0.0;
    }
};

/// Incrementally refined value function for one goal specification.
/// Not internally synchronized: one writer at a time.
class PolicyHandle {
public:
    PolicyHandle(std::shared_ptr<const Scenario> scenario, GoalSpec goal, PlannerConfig config = {})
        : scenario_(std::move(scenario)), goal_(goal), config_(config), profile_(&cost_profile(goal.profile)) {
        table_.reserve(1 << 12);
    }

    const Scenario& scenario() const { return *scenario_; }
    const std::shared_ptr<const Scenario>& scenario_ptr() const { return scenario_; }
    const GoalSpec& goal() const { return goal_; }
    const PlannerConfig& config() const { return config_; }
    const CostProfile& profile() const { return *profile_; }
    const PlannerStats& stats() const { return stats_; }
    const ValueTable& table() const { return table_; }

    double heuristic(const State& s) const { return mst_heuristic(*scenario_, s, goal_); }

    /// Current V̂(s), seeding the table from the heuristic on first touch.
    double value(const State& s) {
        if (is_goal(s, goal_)) return 0.0;
        return entry(s).value;
    }

    std::optional<double> stored_value(const State& s) const {
        if (const auto* e = table_.find(s.fingerprint())) return e->value;
        return std::nullopt;
    }

    /// Overwrites V̂(s). Only for perturbation experiments: a value above
    /// V*(s) breaks admissibility.
    void set_value(const State& s, double v) {
        if (!is_goal(s, goal_)) entry(s).value = v;
    }

    bool is_exact(const State& s) const {
        if (is_goal(s, goal_)) return true;
        const auto* e = table_.find(s.fingerprint());
        return e && e->exact;
    }

    /// Cached cost-minimal action sequence from s to the goal, if one is known.
    std::optional<std::vector<AgentAction>> reused_path(const State& s) const {
        std::vector<AgentAction> path;
        State cur = s;
        while (!is_goal(cur, goal_)) {
            const auto* e = table_.find(cur.fingerprint());
            if (!e || !e->exact || std::isinf(e->value)) return std::nullopt;
            path.push_back({cur.turn, e->next});
            cur = apply_unchecked(*scenario_, cur, cur.turn, e->next);
        }
        return path;
    }

    double q_value(const State& s, const Action& a) {
        State next = apply_unchecked(*scenario_, s, s.turn, a);
        return action_cost(*profile_, s.turn, a) + value(next);
    }

    void update(const State& s) { update(s, config_); }

    /// One real-time update around s: bounded A* from every successor of s,
    /// RTAA* value updates for each search's interior, then a Bellman
    /// backup at s itself.
    void update(const State& s, const PlannerConfig& cfg) {
        const auto start = std::chrono::steady_clock::now();
        ++stats_.updates;
        if (is_goal(s, goal_)) return;
        std::optional<std::chrono::steady_clock::time_point> deadline;
        if (cfg.timeLimitSeconds)
            deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                   std::chrono::duration<double>(*cfg.timeLimitSeconds));
        ActionList actions;
        legal_actions(*scenario_, s, s.turn, actions);
        for (const Action& a : actions) {
            State next = apply_unchecked(*scenario_, s, s.turn, a);
            if (is_goal(next, goal_)) continue;
            search_from(next, cfg, deadline);
        }
        backup(s, actions);
        stats_.seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    /// Actions expanded during search: legal actions minus goal-irrelevant
    /// pickups (other gems, keys whose colour no locked door shares).
    void search_actions(const State& s, ActionList& out, bool prune) const {
        legal_actions(*scenario_, s, s.turn, out);
        if (!prune) return;
        const Scenario& sc = *scenario_;
        unsigned lockedColors = 0;
        for (std::size_t d = 0; d < sc.doorSlots.size(); ++d) {
            if (s.door_locked(static_cast<int>(d))) lockedColors |= 1u << static_cast<int>(sc.door_item(static_cast<int>(d)).color);
        }
        auto irrelevant = [&](const Action& a) {
            if (a.kind != ActionKind::PickUp && a.kind != ActionKind::Handover) return false;
            const Item& it = sc.items[a.item];
            if (it.kind == ItemKind::Gem) return sc.slotOf[a.item] != goal_.gem;
            return !(lockedColors >> static_cast<int>(it.color) & 1u);
        };
        out.erase(std::remove_if(out.begin(), out.end(), irrelevant), out.end());
    }

private:
    ValueTable::Entry& entry(const State& s) {
        return table_.get_or_seed(s.fingerprint(), [&] { return heuristic(s); });
    }

    void backup(const State& s, const ActionList& actions) {
        double bestQ = kInfinity;
        bool bestExact = false;
        Action bestAction = Action::wait();
        for (const Action& a : actions) {
            State next = apply_unchecked(*scenario_, s, s.turn, a);
            double q = action_cost(*profile_, s.turn, a) + value(next);
            if (q < bestQ - kTieTolerance) {
                bestQ = q;
                bestAction = a;
                bestExact = is_exact(next);
            } else if (std::abs(q - bestQ) <= kTieTolerance && !bestExact && is_exact(next)) {
                bestAction = a;
                bestExact = true;
            }
        }
        auto& e = entry(s);
        if (bestQ > e.value) e.value = bestQ;
        // Every other Q is a lower bound no smaller than bestQ, so an exact
        // best successor makes s exact too.
        if (bestExact && !std::isinf(bestQ) && !e.exact) {
            e.exact = true;
            e.next = bestAction;
            e.value = bestQ;
        }
    }

    struct Node {
        State s;
        double g = 0.0;
        int parent = -1;
        Action via;
        bool closed = false;
    };
    struct OpenEntry {
        double f;
        double g;
        std::uint32_t seq;
        int node;
        bool operator<(const OpenEntry& o) const {
            if (f != o.f) return f > o.f;
            if (g != o.g) return g < o.g;
            return seq > o.seq;
        }
    };

    void search_from(const State& root,
                     const PlannerConfig& cfg,
                     const std::optional<std::chrono::steady_clock::time_point>& deadline) {
        ++stats_.searches;
        if (is_exact(root)) {
            ++stats_.reuseHits;
            return;
        }
        nodes_.clear();
        index_.clear();
        std::priority_queue<OpenEntry> open;
        std::uint32_t seq = 0;

        nodes_.push_back(Node{root, 0.0, -1, Action::wait(), false});
        index_.emplace(root.fingerprint(), 0);
        open.push({value(root), 0.0, seq++, 0});

        ActionList actions;
        std::size_t expansions = 0;
        int frontier = -1;
        bool reached = false;
        while (!open.empty()) {
            OpenEntry top = open.top();
            Node& node = nodes_[top.node];
            if (node.closed || top.g > node.g) {
                open.pop();
                continue;
            }
            if (is_goal(node.s, goal_)) {
                frontier = top.node;
                reached = true;
                ++stats_.goalHits;
                break;
            }
            if (const auto* e = table_.find(node.s.fingerprint()); e && e->exact) {
                frontier = top.node;
                reached = !std::isinf(e->value);
                ++stats_.reuseHits;
                break;
            }
            if (expansions >= cfg.nodeBudget ||
                (deadline && (expansions & 255u) == 0 && std::chrono::steady_clock::now() >= *deadline)) {
                frontier = top.node;
                ++stats_.budgetStops;
                break;
            }
            open.pop();
            node.closed = true;
            ++expansions;
            const State cur = node.s;
            const double g = node.g;
            const int curIdx = top.node;
            search_actions(cur, actions, cfg.pruneIrrelevant);
            for (const Action& a : actions) {
                State child = apply_unchecked(*scenario_, cur, cur.turn, a);
                child.t = 0;
                const double cg = g + action_cost(*profile_, cur.turn, a);
                const double h = value(child);
                if (std::isinf(h)) continue;
                auto [it, inserted] = index_.try_emplace(child.fingerprint(), static_cast<int>(nodes_.size()));
                if (inserted) {
                    nodes_.push_back(Node{child, cg, curIdx, a, false});
                } else {
                    Node& existing = nodes_[it->second];
                    if (cg >= existing.g - 1e-12) continue;
                    existing.g = cg;
                    existing.parent = curIdx;
                    existing.via = a;
                    existing.closed = false;
                }
                open.push({cg + h, cg, seq++, it->second});
            }
        }
        stats_.expansions += expansions;

        if (frontier < 0) {
            // Search space exhausted without reaching the goal.
            ++stats_.deadEnds;
            for (const Node& n : nodes_) {
                if (!n.closed) continue;
                auto& e = entry(n.s);
                e.value = kInfinity;
                e.exact = true;
            }
            return;
        }

        const Node& f = nodes_[frontier];
        const double fValue = f.g + value(f.s);
        for (const Node& n : nodes_) {
            if (!n.closed) continue;
            auto& e = entry(n.s);
            const double candidate = fValue - n.g;
            if (candidate > e.value) e.value = candidate;
        }
        if (!reached) return;
        // Cost-minimal path reuse: every state on the root -> frontier path
        // now has an exact cost-to-go.
        for (int i = frontier; nodes_[i].parent >= 0; i = nodes_[i].parent) {
            const Node& child = nodes_[i];
            auto& e = entry(nodes_[child.parent].s);
            e.value = std::max(e.value, fValue - nodes_[child.parent].g);
            e.exact = true;
            e.next = child.via;
        }
    }

    std::shared_ptr<const Scenario> scenario_;
    GoalSpec goal_;
    PlannerConfig config_;
    const CostProfile* profile_;
    ValueTable table_;
    PlannerStats stats_;
    std::vector<Node> nodes_;
    std::unordered_map<std::uint64_t, int> index_;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

inline void rths_policy_update(PolicyHandle& h, const State& s) { h.update(s); }

/// Q̂(s, aH, aR): cost of the acting agent's action plus V̂ of the successor.
inline double q_value(PolicyHandle& h, const State& s, const Action& aH, const Action& aR) {
    const State next = transition(h.scenario(), s, aH, aR);
    const Action& acting = s.turn == Agent::Human ? aH : aR;
    return action_cost(h.profile(), s.turn, acting) + h.value(next);
}

/// exp(-beta * q) normalized with max-subtraction; infinite entries get 0,
/// all-infinite input gives the uniform vector.
inline std::vector<double> boltzmann_probs(const std::vector<double>& q, double beta) {
    std::vector<double> p(q.size());
    const double qMin = q.empty() ? kInfinity : *std::min_element(q.begin(), q.end());
    if (std::isinf(qMin)) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(q.size()));
        return p;
    }
    double z = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        p[i] = std::isinf(q[i]) ? 0.0 : std::exp(-beta * (q[i] - qMin));
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

/// Boltzmann distribution over the acting agent's legal actions,
/// P(a) ∝ exp(-beta * Q̂(s, a)). All-infinite Q̂ falls back to uniform.
inline ActionDistribution boltzmann_dist(PolicyHandle& h, const State& s, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("boltzmann_dist: beta must be positive");
    ActionDistribution d;
    ActionList actions;
    legal_actions(h.scenario(), s, s.turn, actions);
    d.actions.assign(actions.begin(), actions.end());
    d.q.reserve(actions.size());
    for (const Action& a : actions) d.q.push_back(h.q_value(s, a));
    d.probs = boltzmann_probs(d.q, beta);
    return d;
}

/// Index of the minimum of `values`, ties (within kTieTolerance) resolved to
/// the earliest entry. Returns npos if every value is infinite.
inline std::size_t stable_argmin(const std::vector<double>& values) {
    std::size_t best = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isinf(values[i])) continue;
        if (best == static_cast<std::size_t>(-1) || values[i] < values[best] - kTieTolerance) best = i;
    }
    return best;
}

/// Greedy action of the acting agent at s after refreshing the policy there.
inline Action greedy_action(PolicyHandle& h, const State& s, const PlannerConfig* cfg = nullptr) {
    if (cfg) h.update(s, *cfg);
    else h.update(s);
    ActionList actions;
    legal_actions(h.scenario(), s, s.turn, actions);
    std::vector<double> q;
    q.reserve(actions.size());
    for (const Action& a : actions) q.push_back(h.q_value(s, a));
    const std::size_t i = stable_argmin(q);
    return i == static_cast<std::size_t>(-1) ? Action::wait() : actions[i];
}

/// Deterministic greedy rollout of the joint policy for up to `horizon`
/// steps, refreshing the policy at every visited state.
inline std::vector<AgentAction> rollout_policy(PolicyHandle& h, const State& s, int horizon) {
    if (horizon < 1) throw std::invalid_argument("rollout_policy: horizon must be >= 1");
    std::vector<AgentAction> out;
    State cur = s;
    for (int i = 0; i < horizon && !is_goal(cur, h.goal()); ++i) {
        const Action a = greedy_action(h, cur);
        out.push_back({cur.turn, a});
        cur = apply_unchecked(h.scenario(), cur, cur.turn, a);
    }
    return out;
}

}  // namespace clips
