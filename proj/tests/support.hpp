#pragma once
// Shared test fixtures and brute-force oracles. Oracles only use the
// environment rules (legal_actions/apply) and never the planner.

#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "clips/core.hpp"
#include "clips/scenario_io.hpp"

namespace clips::test {

inline std::shared_ptr<const Scenario> share(Scenario sc) { return std::make_shared<const Scenario>(std::move(sc)); }

using StateKey = std::tuple<int, int, int, unsigned, unsigned, unsigned>;

inline StateKey key_of(const State& s) {
    return {s.human, s.robot, static_cast<int>(s.turn), s.lockedDoors, s.keyBits, s.gems};
}

/// Exact cost-to-go V* for every state reachable from `start`, by exhaustive
/// forward enumeration and a backward Dijkstra from the goal states.
class ExactValues {
public:
    ExactValues(const Scenario& sc, const State& start, const GoalSpec& g) {
        const CostProfile& cp = cost_profile(g.profile);
        std::vector<State> states;
        std::map<StateKey, int> index;
        std::vector<std::vector<std::pair<int, double>>> preds;
        auto intern = [&](const State& s) {
            auto [it, fresh] = index.emplace(key_of(s), static_cast<int>(states.size()));
            if (fresh) {
                states.push_back(s);
                preds.emplace_back();
            }
            return it->second;
        };
        intern(start);
        for (std::size_t i = 0; i < states.size(); ++i) {
            const State s = states[i];
            if (is_goal(s, g)) continue;
            for (const Action& a : legal_actions(sc, s, s.turn)) {
                int j = intern(apply_unchecked(sc, s, s.turn, a));
                preds[j].push_back({static_cast<int>(i), action_cost(cp, s.turn, a)});
            }
        }
        std::vector<double> v(states.size(), std::numeric_limits<double>::infinity());
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (is_goal(states[i], g)) {
                v[i] = 0.0;
                pq.push({0.0, static_cast<int>(i)});
            }
        }
        while (!pq.empty()) {
            auto [d, i] = pq.top();
            pq.pop();
            if (d > v[i]) continue;
            for (auto [p, c] : preds[i]) {
                if (d + c < v[p]) {
                    v[p] = d + c;
                    pq.push({v[p], p});
                }
            }
        }
        for (std::size_t i = 0; i < states.size(); ++i) values_[key_of(states[i])] = v[i];
    }

    double operator()(const State& s) const { return values_.at(key_of(s)); }
    bool contains(const State& s) const { return values_.count(key_of(s)) > 0; }
    std::size_t size() const { return values_.size(); }

private:
    std::map<StateKey, double> values_;
};

/// Random walled map of at most 7x7 with up to two doors (each with a key of
/// its colour) and one or two goal gems.
inline Scenario random_map(std::mt19937& rng, int maxDoors = 2) {
    std::uniform_int_distribution<int> dim(4, 7);
    const int w = dim(rng), h = dim(rng);
    std::vector<std::string> rows(h, std::string(w, '.'));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1) rows[y][x] = '#';
        }
    }
    std::bernoulli_distribution wall(0.18);
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            if (wall(rng)) rows[y][x] = '#';
        }
    }
    std::vector<std::pair<int, int>> free;
    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            if (rows[y][x] == '.') free.push_back({x, y});
        }
    }
    std::shuffle(free.begin(), free.end(), rng);
    // Prefer chokepoints for doors so that they actually gate parts of the map.
    auto components = [&](std::pair<int, int> removed) {
        std::set<std::pair<int, int>> open(free.begin(), free.end());
        open.erase(removed);
        int count = 0;
        while (!open.empty()) {
            ++count;
            std::vector<std::pair<int, int>> stack{*open.begin()};
            open.erase(open.begin());
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                for (auto n : {std::pair{x + 1, y}, std::pair{x - 1, y}, std::pair{x, y + 1}, std::pair{x, y - 1}}) {
                    if (open.erase(n)) stack.push_back(n);
                }
            }
        }
        return count;
    };
    std::stable_partition(free.begin(), free.end(), [&](auto c) { return components(c) > 1; });
    std::uniform_int_distribution<int> doorCount(0, maxDoors);
    const int nDoors = std::min(doorCount(rng), static_cast<int>(free.size()) / 2 - 2);
    std::uniform_int_distribution<int> gemCount(1, 2);
    const int nGems = gemCount(rng);
    if (static_cast<int>(free.size()) < 2 + 2 * std::max(nDoors, 0) + nGems) return random_map(rng, maxDoors);

    json j;
    j["name"] = "random";
    std::size_t next = 0;
    json items = json::object(), legend = json::object();
    auto place = [&](const std::string& id, const char* kind, const char* color) {
        legend[id] = {{"kind", kind}, {"color", color}};
        items[id] = {free[next].first, free[next].second};
        ++next;
    };
    const char* colors[] = {"red", "blue"};
    for (int d = 0; d < std::max(nDoors, 0); ++d) place("d" + std::to_string(d + 1), "door", colors[d]);
    j["human"] = {free[next].first, free[next].second};
    ++next;
    j["robot"] = {free[next].first, free[next].second};
    ++next;
    for (int d = 0; d < std::max(nDoors, 0); ++d) place("k" + std::to_string(d + 1), "key", colors[d]);
    std::vector<std::string> goals;
    for (int g = 0; g < nGems; ++g) {
        place("g" + std::to_string(g + 1), "gem", "yellow");
        goals.push_back("g" + std::to_string(g + 1));
    }
    j["grid"] = rows;
    j["legend"] = legend;
    j["items"] = items;
    j["goals"] = goals;
    j["true_goal"] = goals.front();
    return scenario_from_json(j);
}

}  // namespace clips::test
