#pragma once
//
// Episode trace records (one JSON object per line, "v": 1). The same
// objects are the service's wire messages.
//

#include <string>
#include <vector>

#include "clips/inference.hpp"
#include "clips/scenario_io.hpp"

namespace clips {

inline constexpr int kTraceVersion = 1;

inline json cell_json(const Scenario& sc, int cell) {
    const Cell c = sc.cell_at(cell);
    return json::array({c.x, c.y});
}

inline json state_event(const Scenario& sc, const State& s) {
    json doors = json::object(), keys = json::object(), gems = json::array();
    for (std::size_t d = 0; d < sc.doorSlots.size(); ++d)
        doors[sc.door_item(static_cast<int>(d)).id] = s.door_locked(static_cast<int>(d)) ? "locked" : "unlocked";
    for (std::size_t k = 0; k < sc.keySlots.size(); ++k)
        keys[sc.key_item(static_cast<int>(k)).id] = std::string(to_string(s.key(static_cast<int>(k))));
    for (std::size_t g = 0; g < sc.gemSlots.size(); ++g) {
        if (s.has_gem(static_cast<int>(g))) gems.push_back(sc.gem_item(static_cast<int>(g)).id);
    }
    return {{"v", kTraceVersion}, {"type", "state"},  {"t", s.t},       {"turn", std::string(to_string(s.turn))},
            {"human", cell_json(sc, s.human)},       {"robot", cell_json(sc, s.robot)},
            {"doors", doors},                        {"keys", keys},     {"gems", gems}};
}

inline json action_event(const Scenario& sc, Agent agent, int t, const Action& a) {
    return {{"v", kTraceVersion},
            {"type", agent == Agent::Human ? "human_action" : "robot_action"},
            {"t", t},
            {"action", std::string(to_string(a.kind))},
            {"args", action_args(sc, a)}};
}

inline json utterance_event(int t, const std::string& text) {
    return {{"v", kTraceVersion}, {"type", "utterance"}, {"t", t}, {"text", text}};
}

inline json belief_event(const Belief& b, int t) {
    const Scenario& sc = *b.scenario;
    json goals = json::object();
    const auto post = goal_posterior(b);
    for (std::size_t k = 0; k < sc.goals.size(); ++k) goals[sc.goals[k]] = post[k];
    json hyps = json::array();
    for (const auto& h : b.hypotheses) {
        hyps.push_back({{"goal", sc.gem_item(h.goal.gem).id}, {"profile", h.goal.profile}, {"w", h.weight},
                        {"beta_mean", b.beta_mean(h)}});
    }
    return {{"v", kTraceVersion}, {"type", "belief"}, {"t", t}, {"goals", goals}, {"hypotheses", hyps}};
}

inline json metric_event(const std::string& name, const json& value) {
    return {{"v", kTraceVersion}, {"type", "metric"}, {"name", name}, {"value", value}};
}

inline std::string to_jsonl(const std::vector<json>& events) {
    std::string out;
    for (const auto& e : events) out += e.dump() + "\n";
    return out;
}

inline std::vector<json> parse_jsonl(const std::string& text) {
    std::vector<json> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        if (end > pos) out.push_back(json::parse(text.substr(pos, end - pos)));
        pos = end + 1;
    }
    return out;
}

}  // namespace clips
