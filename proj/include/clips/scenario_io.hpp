#pragma once
//
// Scenario file format: a JSON object with a token grid, an item legend,
// goal list and an optional scripted prefix. Item tokens may be written
// directly into grid rows (longest-match tokenization against the legend)
// or placed through an "items" coordinate map.
//

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "clips/core.hpp"

namespace clips {

using json = nlohmann::json;

enum class GridEncoding { Tokens, ItemsMap };

namespace detail {

inline std::string line_col(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline bool valid_id(std::string_view id) {
    if (id.empty() || id == "h" || id == "r") return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

inline Cell cell_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ScenarioError(what + ": expected [x, y]");
    return Cell{j[0].get<int>(), j[1].get<int>()};
}

}  // namespace detail

/// Resolves a wire/script action name and argument ids for `agent`.
inline Action parse_action(const Scenario& sc, Agent agent, std::string_view name,
                           const std::vector<std::string>& args) {
    auto kind = action_kind_from_string(name);
    if (!kind) throw ScenarioError("unknown action '" + std::string(name) + "'");
    auto item = [&](std::size_t i, std::optional<ItemKind> want) {
        if (i >= args.size()) throw ScenarioError(std::string(name) + ": missing argument " + std::to_string(i + 1));
        auto idx = sc.find_item(args[i]);
        if (!idx) throw ScenarioError(std::string(name) + ": unknown item '" + args[i] + "'");
        if (want && sc.items[*idx].kind != *want)
            throw ScenarioError(std::string(name) + ": '" + args[i] + "' is not a " + std::string(to_string(*want)));
        return *idx;
    };
    switch (*kind) {
        case ActionKind::PickUp: {
            int idx = item(0, std::nullopt);
            if (sc.items[idx].kind == ItemKind::Door) throw ScenarioError("pickup: '" + args[0] + "' is a door");
            return Action::pickup(idx);
        }
        case ActionKind::Unlock: return Action::unlock(item(0, ItemKind::Door), item(1, ItemKind::Key));
        case ActionKind::Handover: {
            if (args.size() == 3) {
                auto from = agent_from_string(args[0]);
                auto to = agent_from_string(args[1]);
                if (!from || !to) throw ScenarioError("handover: expected [from, to, key]");
                return Action::handover(*from, *to, item(2, ItemKind::Key));
            }
            return Action::handover(agent, other(agent), item(0, ItemKind::Key));
        }
        default: return Action{*kind};
    }
}

inline std::vector<std::string> action_args(const Scenario& sc, const Action& a) {
    switch (a.kind) {
        case ActionKind::PickUp: return {sc.items[a.item].id};
        case ActionKind::Unlock: return {sc.items[a.item].id, sc.items[a.key].id};
        case ActionKind::Handover:
            return {std::string(to_string(a.from)), std::string(to_string(a.to)), sc.items[a.item].id};
        default: return {};
    }
}

inline Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw ScenarioError("scenario must be a JSON object");
    Scenario sc;
    sc.name = j.value("name", std::string{});
    if (!j.contains("grid") || !j["grid"].is_array() || j["grid"].empty())
        throw ScenarioError("missing or empty \"grid\"");

    std::map<std::string, std::pair<ItemKind, Color>> legend;
    if (j.contains("legend")) {
        for (const auto& [token, def] : j["legend"].items()) {
            if (!detail::valid_id(token)) throw ScenarioError("invalid legend token '" + token + "'");
            auto kind = kind_from_string(def.value("kind", std::string{}));
            auto color = color_from_string(def.value("color", std::string{}));
            if (!kind) throw ScenarioError("legend '" + token + "': unknown kind");
            if (!color) throw ScenarioError("legend '" + token + "': unknown color");
            legend[token] = {*kind, *color};
        }
    }

    std::map<std::string, Cell> placed;
    std::optional<Cell> human, robot;
    std::vector<std::vector<bool>> wallRows;
    int row = 0;
    for (const auto& line : j["grid"]) {
        if (!line.is_string()) throw ScenarioError("grid row " + std::to_string(row + 1) + " is not a string");
        const std::string text = line.get<std::string>();
        std::vector<bool> cells;
        std::size_t pos = 0;
        while (pos < text.size()) {
            const int col = static_cast<int>(cells.size());
            std::string best;
            for (const auto& [token, _] : legend) {
                if (token.size() > best.size() && text.compare(pos, token.size(), token) == 0) best = token;
            }
            auto where = "grid line " + std::to_string(row + 1) + ", column " + std::to_string(pos + 1);
            if (!best.empty()) {
                if (placed.count(best)) throw ScenarioError(where + ": item '" + best + "' placed twice");
                placed[best] = Cell{col, row};
                cells.push_back(false);
                pos += best.size();
                continue;
            }
            char c = text[pos];
            if (c == '#') {
                cells.push_back(true);
            } else if (c == '.') {
                cells.push_back(false);
            } else if (c == 'h' || c == 'r') {
                auto& slot = c == 'h' ? human : robot;
                if (slot) throw ScenarioError(where + ": duplicate '" + std::string(1, c) + "'");
                slot = Cell{col, row};
                cells.push_back(false);
            } else {
                throw ScenarioError(where + ": unknown legend token '" + std::string(1, c) + "'");
            }
            ++pos;
        }
        if (!wallRows.empty() && cells.size() != wallRows.front().size())
            throw ScenarioError("grid line " + std::to_string(row + 1) + ": row has " + std::to_string(cells.size()) +
                                " cells, expected " + std::to_string(wallRows.front().size()));
        wallRows.push_back(std::move(cells));
        ++row;
    }
    sc.height = static_cast<int>(wallRows.size());
    sc.width = static_cast<int>(wallRows.front().size());
    sc.walls.reserve(static_cast<std::size_t>(sc.width) * sc.height);
    for (const auto& r : wallRows) {
        for (bool w : r) sc.walls.push_back(w ? 1 : 0);
    }

    if (j.contains("items")) {
        for (const auto& [id, where] : j["items"].items()) {
            if (!legend.count(id)) throw ScenarioError("items: '" + id + "' has no legend entry");
            if (placed.count(id)) throw ScenarioError("items: '" + id + "' is also placed in the grid");
            placed[id] = detail::cell_from_json(where, "items." + id);
        }
    }
    if (j.contains("human")) human = detail::cell_from_json(j["human"], "human");
    if (j.contains("robot")) robot = detail::cell_from_json(j["robot"], "robot");
    if (!human) throw ScenarioError("grid has no human start 'h'");
    if (!robot) throw ScenarioError("grid has no robot start 'r'");
    sc.humanStart = *human;
    sc.robotStart = *robot;

    for (const auto& [id, def] : legend) {
        auto it = placed.find(id);
        if (it == placed.end()) throw ScenarioError("legend item '" + id + "' is never placed");
        sc.items.push_back(Item{id, def.first, def.second, it->second});
    }

    if (!j.contains("goals") || !j["goals"].is_array()) throw ScenarioError("missing \"goals\" list");
    sc.goals = j["goals"].get<std::vector<std::string>>();
    sc.trueGoal = j.value("true_goal", std::string{});
    if (sc.trueGoal.empty()) throw ScenarioError("missing \"true_goal\"");
    if (j.contains("cost_profiles")) sc.costProfiles = j["cost_profiles"].get<std::vector<int>>();
    sc.trueProfile = j.value("true_profile", 0);
    sc.maxSteps = j.value("max_steps", 100);

    if (j.contains("script")) {
        for (const auto& ev : j["script"]) {
            ScriptEvent e;
            e.t = ev.value("t", 0);
            auto agent = agent_from_string(ev.value("agent", std::string("human")));
            if (!agent) throw ScenarioError("script event at t=" + std::to_string(e.t) + ": unknown agent");
            e.agent = *agent;
            if (ev.contains("action")) e.action = ev["action"].get<std::string>();
            if (ev.contains("args")) e.args = ev["args"].get<std::vector<std::string>>();
            if (ev.contains("utterance")) e.utterance = ev["utterance"].get<std::string>();
            if (ev.contains("literal")) e.literal = ev["literal"].get<std::string>();
            if (!e.action && !e.utterance)
                throw ScenarioError("script event at t=" + std::to_string(e.t) + " has neither action nor utterance");
            sc.script.push_back(std::move(e));
        }
    }

    sc.finalize();
    for (const auto& e : sc.script) {
        if (e.action) parse_action(sc, e.agent, *e.action, e.args);
    }
    return sc;
}

/// Parses scenario-file contents. Errors carry a line/column or grid location.
inline Scenario parse_scenario(std::string_view text) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ScenarioError("malformed scenario (" + detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1) +
                            "): " + e.what());
    }
    try {
        return scenario_from_json(j);
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("malformed scenario: ") + e.what());
    }
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

inline json scenario_to_json(const Scenario& sc, GridEncoding enc = GridEncoding::Tokens) {
    json j;
    j["name"] = sc.name;
    const int n = sc.cell_count();
    std::vector<std::vector<int>> itemsAt(n);
    for (std::size_t i = 0; i < sc.items.size(); ++i) itemsAt[sc.item_cell(static_cast<int>(i))].push_back(static_cast<int>(i));
    const int hc = sc.cell_index(sc.humanStart);
    const int rc = sc.cell_index(sc.robotStart);

    json items = json::object();
    json grid = json::array();
    for (int y = 0; y < sc.height; ++y) {
        std::string line;
        for (int x = 0; x < sc.width; ++x) {
            int c = sc.cell_index({x, y});
            if (sc.is_wall(c)) {
                line += '#';
                continue;
            }
            const int occupants = static_cast<int>(itemsAt[c].size()) + (c == hc) + (c == rc);
            if (enc == GridEncoding::Tokens && occupants == 1 && itemsAt[c].size() == 1) {
                line += sc.items[itemsAt[c][0]].id;
                continue;
            }
            for (int i : itemsAt[c]) items[sc.items[i].id] = {x, y};
            if (c == hc) line += 'h';
            else if (c == rc) line += 'r';
            else line += '.';
            if (c == hc && c == rc) j["robot"] = {x, y};
        }
        grid.push_back(line);
    }
    j["grid"] = grid;
    json legend = json::object();
    for (const auto& it : sc.items) legend[it.id] = {{"kind", to_string(it.kind)}, {"color", to_string(it.color)}};
    j["legend"] = legend;
    if (!items.empty()) j["items"] = items;
    j["goals"] = sc.goals;
    j["true_goal"] = sc.trueGoal;
    j["true_profile"] = sc.trueProfile;
    j["cost_profiles"] = sc.costProfiles;
    j["max_steps"] = sc.maxSteps;
    json script = json::array();
    for (const auto& e : sc.script) {
        json ev{{"t", e.t}};
        if (e.agent != Agent::Human) ev["agent"] = to_string(e.agent);
        if (e.action) ev["action"] = *e.action;
        if (!e.args.empty()) ev["args"] = e.args;
        if (e.utterance) ev["utterance"] = *e.utterance;
        if (e.literal) ev["literal"] = *e.literal;
        script.push_back(ev);
    }
    if (!script.empty()) j["script"] = script;
    return j;
}

inline std::string serialize_scenario(const Scenario& sc, GridEncoding enc = GridEncoding::Tokens) {
    return scenario_to_json(sc, enc).dump(2);
}

}  // namespace clips
