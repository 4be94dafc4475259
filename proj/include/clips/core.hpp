#pragma once
//
// Multi-agent Doors, Keys & Gems: scenario geometry, compact game state,
// legal actions, deterministic turn-based transitions and action costs.
//

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace clips {

inline constexpr int kMaxKeys = 12;
inline constexpr int kMaxDoors = 8;
inline constexpr int kMaxGems = 8;
inline constexpr int kMaxCells = 1024;
inline constexpr int kUnreachable = std::numeric_limits<int>::max() / 4;

enum class Agent : std::uint8_t { Human = 0, Robot = 1 };

constexpr Agent other(Agent a) { return a == Agent::Human ? Agent::Robot : Agent::Human; }

inline std::string_view to_string(Agent a) { return a == Agent::Human ? "human" : "robot"; }

inline std::optional<Agent> agent_from_string(std::string_view s) {
    if (s == "human") return Agent::Human;
    if (s == "robot") return Agent::Robot;
    return std::nullopt;
}

enum class Color : std::uint8_t { Red, Blue, Green, Yellow };

inline std::string_view to_string(Color c) {
    switch (c) {
        case Color::Red: return "red";
        case Color::Blue: return "blue";
        case Color::Green: return "green";
        case Color::Yellow: return "yellow";
    }
    return "?";
}

inline std::optional<Color> color_from_string(std::string_view s) {
    if (s == "red") return Color::Red;
    if (s == "blue") return Color::Blue;
    if (s == "green") return Color::Green;
    if (s == "yellow") return Color::Yellow;
    return std::nullopt;
}

enum class ItemKind : std::uint8_t { Key, Door, Gem };

inline std::string_view to_string(ItemKind k) {
    switch (k) {
        case ItemKind::Key: return "key";
        case ItemKind::Door: return "door";
        case ItemKind::Gem: return "gem";
    }
    return "?";
}

inline std::optional<ItemKind> kind_from_string(std::string_view s) {
    if (s == "key") return ItemKind::Key;
    if (s == "door") return ItemKind::Door;
    if (s == "gem") return ItemKind::Gem;
    return std::nullopt;
}

struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

struct Item {
    std::string id;
    ItemKind kind = ItemKind::Key;
    Color color = Color::Red;
    Cell cell;
    bool operator==(const Item&) const = default;
};

/// One entry of a scenario's scripted prefix: a principal (or assistant)
/// action at step t, optionally accompanied by an utterance. `literal` is
/// an assistant-directed rephrasing used by the literal-listener baselines.
struct ScriptEvent {
    int t = 1;
    Agent agent = Agent::Human;
    std::optional<std::string> action;
    std::vector<std::string> args;
    std::optional<std::string> utterance;
    std::optional<std::string> literal;
    bool operator==(const ScriptEvent&) const = default;
};

class ScenarioError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Relaxed maze geometry: shortest-path distances with every door treated
/// as open, plus per-door connectivity labels with that single door blocked.
struct Maze {
    int cells = 0;
    std::vector<int> dist;                    // cells*cells, kUnreachable if disconnected
    std::vector<std::vector<int>> doorDist;   // [door slot][cell] distance to a cell adjacent to the door
    std::vector<std::vector<int>> blockedComp;  // [door slot][cell] component id with that door blocked

    int distance(int a, int b) const { return dist[static_cast<std::size_t>(a) * cells + b]; }
};

struct Scenario {
    std::string name;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> walls;  // row-major, 1 = wall
    Cell humanStart;
    Cell robotStart;
    std::vector<Item> items;  // sorted by id after finalize()
    std::vector<std::string> goals;
    std::string trueGoal;
    std::vector<int> costProfiles{0, 1, 2, 3};
    int trueProfile = 0;
    int maxSteps = 100;
    std::vector<ScriptEvent> script;

    // Derived tables, rebuilt by finalize().
    std::vector<int> keySlots, doorSlots, gemSlots;  // slot -> item index
    std::vector<int> slotOf;                         // item index -> slot within its kind
    std::vector<int> doorAt, gemAt;                  // cell -> slot or -1
    std::vector<std::vector<int>> keysAt;            // cell -> key slots
    std::vector<std::array<int, 4>> neighbors;       // cell -> Up/Down/Left/Right cell or -1
    std::vector<std::uint8_t> goalGem;               // gem slot -> member of goals
    Maze maze;

    int cell_count() const { return width * height; }
    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
    int cell_index(Cell c) const { return c.y * width + c.x; }
    Cell cell_at(int idx) const { return Cell{idx % width, idx / width}; }
    bool is_wall(int idx) const { return walls[static_cast<std::size_t>(idx)] != 0; }
    bool is_wall(Cell c) const { return is_wall(cell_index(c)); }

    std::optional<int> find_item(std::string_view id) const {
        auto it = std::lower_bound(items.begin(), items.end(), id,
                                   [](const Item& item, std::string_view v) { return item.id < v; });
        if (it == items.end() || it->id != id) return std::nullopt;
        return static_cast<int>(it - items.begin());
    }

    const Item& key_item(int slot) const { return items[keySlots[slot]]; }
    const Item& door_item(int slot) const { return items[doorSlots[slot]]; }
    const Item& gem_item(int slot) const { return items[gemSlots[slot]]; }
    int item_cell(int item) const { return cell_index(items[item].cell); }

    std::optional<int> gem_slot(std::string_view id) const {
        auto idx = find_item(id);
        if (!idx || items[*idx].kind != ItemKind::Gem) return std::nullopt;
        return slotOf[*idx];
    }

    /// Validates invariants and rebuilds every derived table. Throws ScenarioError.
    void finalize();
};

enum class KeyLocation : std::uint8_t { Floor = 0, Human = 1, Robot = 2, Consumed = 3 };

inline std::string_view to_string(KeyLocation k) {
    switch (k) {
        case KeyLocation::Floor: return "floor";
        case KeyLocation::Human: return "human";
        case KeyLocation::Robot: return "robot";
        case KeyLocation::Consumed: return "consumed";
    }
    return "?";
}

constexpr KeyLocation held_by(Agent a) { return a == Agent::Human ? KeyLocation::Human : KeyLocation::Robot; }

/// Full game configuration at one step. Cells are row-major indices into the
/// scenario grid; doors, keys and gems are addressed by per-kind slot.
struct State {
    int t = 1;
    std::int16_t human = 0;
    std::int16_t robot = 0;
    std::uint8_t lockedDoors = 0;
    std::uint32_t keyBits = 0;  // 2 bits per key slot
    std::uint8_t gems = 0;      // collected gem slots
    Agent turn = Agent::Human;

    KeyLocation key(int slot) const { return static_cast<KeyLocation>((keyBits >> (2 * slot)) & 3u); }
    void set_key(int slot, KeyLocation loc) {
        keyBits = (keyBits & ~(3u << (2 * slot))) | (static_cast<std::uint32_t>(loc) << (2 * slot));
    }
    bool door_locked(int slot) const { return (lockedDoors >> slot) & 1u; }
    bool has_gem(int slot) const { return (gems >> slot) & 1u; }
    int pos(Agent a) const { return a == Agent::Human ? human : robot; }
    void set_pos(Agent a, int cell) {
        (a == Agent::Human ? human : robot) = static_cast<std::int16_t>(cell);
    }

    /// Canonical packing of every field except t.
    std::uint64_t fingerprint() const {
        return static_cast<std::uint64_t>(static_cast<std::uint16_t>(human)) |
               (static_cast<std::uint64_t>(static_cast<std::uint16_t>(robot)) << 10) |
               (static_cast<std::uint64_t>(turn) << 20) |
               (static_cast<std::uint64_t>(lockedDoors) << 21) |
               (static_cast<std::uint64_t>(gems) << 29) |
               (static_cast<std::uint64_t>(keyBits) << 37);
    }

    bool operator==(const State&) const = default;
};

enum class ActionKind : std::uint8_t { Up, Down, Left, Right, PickUp, Unlock, Handover, Wait };

inline std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::Up: return "up";
        case ActionKind::Down: return "down";
        case ActionKind::Left: return "left";
        case ActionKind::Right: return "right";
        case ActionKind::PickUp: return "pickup";
        case ActionKind::Unlock: return "unlock";
        case ActionKind::Handover: return "handover";
        case ActionKind::Wait: return "wait";
    }
    return "?";
}

inline std::optional<ActionKind> action_kind_from_string(std::string_view s) {
    for (int k = 0; k <= static_cast<int>(ActionKind::Wait); ++k) {
        if (to_string(static_cast<ActionKind>(k)) == s) return static_cast<ActionKind>(k);
    }
    return std::nullopt;
}

constexpr bool is_move(ActionKind k) { return k <= ActionKind::Right; }

/// Item arguments are item indices into Scenario::items, which is sorted by
/// id, so the derived ordering is the stable action ordering
/// Up < Down < Left < Right < PickUp < Unlock < Handover < Wait, then by id.
struct Action {
    ActionKind kind = ActionKind::Wait;
    std::int16_t item = -1;  // PickUp target, Unlock door, Handover key
    std::int16_t key = -1;   // Unlock key
    Agent from = Agent::Human;
    Agent to = Agent::Human;

    static Action move(ActionKind dir) { return Action{dir}; }
    static Action wait() { return Action{}; }
    static Action pickup(int item) { return Action{ActionKind::PickUp, static_cast<std::int16_t>(item)}; }
    static Action unlock(int door, int key) {
        return Action{ActionKind::Unlock, static_cast<std::int16_t>(door), static_cast<std::int16_t>(key)};
    }
    static Action handover(Agent from, Agent to, int key) {
        return Action{ActionKind::Handover, static_cast<std::int16_t>(key), -1, from, to};
    }

    auto operator<=>(const Action& o) const {
        if (auto c = kind <=> o.kind; c != 0) return c;
        if (auto c = item <=> o.item; c != 0) return c;
        return key <=> o.key;
    }
    bool operator==(const Action& o) const {
        return kind == o.kind && item == o.item && key == o.key &&
               (kind != ActionKind::Handover || (from == o.from && to == o.to));
    }
};

using ActionList = boost::container::small_vector<Action, 12>;

struct AgentAction {
    Agent agent = Agent::Human;
    Action action;
    bool operator==(const AgentAction&) const = default;
};

class IllegalAction : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class CostClass : std::uint8_t { Move, PickUp, Unlock, Handover, Wait };

constexpr CostClass cost_class(ActionKind k) {
    if (is_move(k)) return CostClass::Move;
    switch (k) {
        case ActionKind::PickUp: return CostClass::PickUp;
        case ActionKind::Unlock: return CostClass::Unlock;
        case ActionKind::Handover: return CostClass::Handover;
        default: return CostClass::Wait;
    }
}

struct CostProfile {
    int id = 0;
    std::array<std::array<double, 5>, 2> costs{};  // [agent][cost class]

    double cost(Agent a, CostClass c) const {
        return costs[static_cast<int>(a)][static_cast<int>(c)];
    }
    double min_over_agents(CostClass c) const {
        return std::min(cost(Agent::Human, c), cost(Agent::Robot, c));
    }
};

inline constexpr int kProfileCount = 4;

/// The four bundled cost profiles. Profiles 1 and 3 double the human's
/// non-pickup, non-wait costs; profiles 2 and 3 make robot unlocks expensive.
inline const CostProfile& cost_profile(int id) {
    static const std::array<CostProfile, kProfileCount> profiles = [] {
        std::array<CostProfile, kProfileCount> ps{};
        for (int id = 0; id < kProfileCount; ++id) {
            CostProfile& p = ps[id];
            p.id = id;
            const double humanOther = (id == 1 || id == 3) ? 2.0 : 1.0;
            auto& h = p.costs[static_cast<int>(Agent::Human)];
            auto& r = p.costs[static_cast<int>(Agent::Robot)];
            h = {humanOther, 5.0, humanOther, humanOther, 0.6};
            r = {1.0, 1.0, (id >= 2) ? 5.0 : 1.0, 1.0, 0.6};
        }
        return ps;
    }();
    if (id < 0 || id >= kProfileCount) throw std::out_of_range("unknown cost profile " + std::to_string(id));
    return profiles[id];
}

inline double action_cost(const CostProfile& profile, Agent agent, const Action& a) {
    return profile.cost(agent, cost_class(a.kind));
}

struct GoalSpec {
    int gem = 0;      // gem slot
    int profile = 0;  // cost profile id
    bool operator==(const GoalSpec&) const = default;
};

inline bool is_goal(const State& s, const GoalSpec& g) { return s.has_gem(g.gem); }

// ---------------------------------------------------------------------------
// Scenario derived tables
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<int> bfs(const Scenario& sc, int from, int blockedCell) {
    std::vector<int> d(static_cast<std::size_t>(sc.cell_count()), kUnreachable);
    if (sc.is_wall(from) || from == blockedCell) return d;
    std::deque<int> q{from};
    d[from] = 0;
    while (!q.empty()) {
        int c = q.front();
        q.pop_front();
        for (int n : sc.neighbors[c]) {
            if (n < 0 || n == blockedCell || d[n] != kUnreachable) continue;
            d[n] = d[c] + 1;
            q.push_back(n);
        }
    }
    return d;
}

}  // namespace detail

inline void Scenario::finalize() {
    if (width <= 0 || height <= 0) throw ScenarioError("grid must be non-empty");
    if (width * height > kMaxCells) throw ScenarioError("grid exceeds " + std::to_string(kMaxCells) + " cells");
    if (static_cast<int>(walls.size()) != width * height) throw ScenarioError("wall mask size mismatch");
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < items.size(); ++i) {
        if (items[i].id == items[i - 1].id) throw ScenarioError("duplicate item id '" + items[i].id + "'");
    }
    auto checkCell = [&](Cell c, const std::string& what) {
        if (!in_bounds(c)) throw ScenarioError(what + " lies outside the grid");
        if (is_wall(c)) throw ScenarioError(what + " lies on a wall");
    };
    checkCell(humanStart, "human start");
    checkCell(robotStart, "robot start");

    keySlots.clear();
    doorSlots.clear();
    gemSlots.clear();
    slotOf.assign(items.size(), -1);
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Item& it = items[i];
        if (it.id.empty()) throw ScenarioError("item with empty id");
        checkCell(it.cell, "item '" + it.id + "'");
        auto& slots = it.kind == ItemKind::Key ? keySlots : it.kind == ItemKind::Door ? doorSlots : gemSlots;
        slotOf[i] = static_cast<int>(slots.size());
        slots.push_back(static_cast<int>(i));
    }
    if (keySlots.size() > kMaxKeys) throw ScenarioError("too many keys (max " + std::to_string(kMaxKeys) + ")");
    if (doorSlots.size() > kMaxDoors) throw ScenarioError("too many doors (max " + std::to_string(kMaxDoors) + ")");
    if (gemSlots.size() > kMaxGems) throw ScenarioError("too many gems (max " + std::to_string(kMaxGems) + ")");

    const int n = cell_count();
    doorAt.assign(n, -1);
    gemAt.assign(n, -1);
    keysAt.assign(n, {});
    for (std::size_t d = 0; d < doorSlots.size(); ++d) {
        const Item& door = items[doorSlots[d]];
        int c = cell_index(door.cell);
        if (doorAt[c] >= 0) throw ScenarioError("two doors share cell of '" + door.id + "'");
        if (door.cell == humanStart || door.cell == robotStart)
            throw ScenarioError("door '" + door.id + "' occupies an agent start cell");
        doorAt[c] = static_cast<int>(d);
    }
    for (std::size_t g = 0; g < gemSlots.size(); ++g) {
        const Item& gem = items[gemSlots[g]];
        int c = cell_index(gem.cell);
        if (gemAt[c] >= 0) throw ScenarioError("two gems share cell of '" + gem.id + "'");
        if (doorAt[c] >= 0) throw ScenarioError("gem '" + gem.id + "' placed on a door");
        gemAt[c] = static_cast<int>(g);
    }
    for (std::size_t k = 0; k < keySlots.size(); ++k) {
        int c = item_cell(keySlots[k]);
        if (doorAt[c] >= 0) throw ScenarioError("key '" + items[keySlots[k]].id + "' placed on a door");
        keysAt[c].push_back(static_cast<int>(k));
    }

    if (goals.empty()) throw ScenarioError("goal set is empty");
    goalGem.assign(gemSlots.size(), 0);
    for (const auto& g : goals) {
        auto slot = gem_slot(g);
        if (!slot) throw ScenarioError("goal '" + g + "' is not a gem of this scenario");
        goalGem[*slot] = 1;
    }
    if (std::find(goals.begin(), goals.end(), trueGoal) == goals.end())
        throw ScenarioError("true goal '" + trueGoal + "' is not in the goal set");
    if (maxSteps < 1) throw ScenarioError("max_steps must be >= 1");
    if (costProfiles.empty()) throw ScenarioError("cost profile list is empty");
    for (int p : costProfiles) {
        if (p < 0 || p >= kProfileCount) throw ScenarioError("unknown cost profile " + std::to_string(p));
    }
    if (trueProfile < 0 || trueProfile >= kProfileCount)
        throw ScenarioError("unknown true cost profile " + std::to_string(trueProfile));

    neighbors.assign(n, {-1, -1, -1, -1});
    constexpr std::array<std::array<int, 2>, 4> dirs{{{0, -1}, {0, 1}, {-1, 0}, {1, 0}}};
    for (int c = 0; c < n; ++c) {
        if (is_wall(c)) continue;
        Cell cc = cell_at(c);
        for (int d = 0; d < 4; ++d) {
            Cell nc{cc.x + dirs[d][0], cc.y + dirs[d][1]};
            if (in_bounds(nc) && !is_wall(nc)) neighbors[c][d] = cell_index(nc);
        }
    }

    maze.cells = n;
    maze.dist.assign(static_cast<std::size_t>(n) * n, kUnreachable);
    for (int c = 0; c < n; ++c) {
        if (is_wall(c)) continue;
        auto d = detail::bfs(*this, c, -1);
        std::copy(d.begin(), d.end(), maze.dist.begin() + static_cast<std::ptrdiff_t>(c) * n);
    }
    maze.doorDist.assign(doorSlots.size(), std::vector<int>(n, kUnreachable));
    maze.blockedComp.assign(doorSlots.size(), std::vector<int>(n, -1));
    for (std::size_t d = 0; d < doorSlots.size(); ++d) {
        int dc = item_cell(doorSlots[d]);
        for (int c = 0; c < n; ++c) {
            if (is_wall(c)) continue;
            int best = kUnreachable;
            for (int nb : neighbors[dc]) {
                if (nb >= 0) best = std::min(best, maze.distance(c, nb));
            }
            maze.doorDist[d][c] = best;
        }
        auto& comp = maze.blockedComp[d];
        int label = 0;
        for (int c = 0; c < n; ++c) {
            if (is_wall(c) || c == dc || comp[c] >= 0) continue;
            auto reach = detail::bfs(*this, c, dc);
            for (int x = 0; x < n; ++x) {
                if (reach[x] != kUnreachable) comp[x] = label;
            }
            ++label;
        }
    }

    for (auto& ev : script) {
        if (ev.t < 1) throw ScenarioError("script event with t < 1");
    }
}

// ---------------------------------------------------------------------------
// State, legality, transitions
// ---------------------------------------------------------------------------

inline State initial_state(const Scenario& sc) {
    State s;
    s.t = 1;
    s.human = static_cast<std::int16_t>(sc.cell_index(sc.humanStart));
    s.robot = static_cast<std::int16_t>(sc.cell_index(sc.robotStart));
    s.lockedDoors = static_cast<std::uint8_t>((1u << sc.doorSlots.size()) - 1u);
    s.turn = Agent::Human;
    return s;
}

inline bool adjacent_or_same(const Scenario& sc, int a, int b) {
    if (a == b) return true;
    for (int n : sc.neighbors[a]) {
        if (n == b) return true;
    }
    return false;
}

inline bool is_passable(const Scenario& sc, const State& s, int cell) {
    if (cell < 0) return false;
    int d = sc.doorAt[cell];
    return d < 0 || !s.door_locked(d);
}

/// Appends every legal action of `agent` in stable order.
inline void legal_actions(const Scenario& sc, const State& s, Agent agent, ActionList& out) {
    out.clear();
    const int pos = s.pos(agent);
    for (int d = 0; d < 4; ++d) {
        if (is_passable(sc, s, sc.neighbors[pos][d])) out.push_back(Action::move(static_cast<ActionKind>(d)));
    }
    // Pickups: keys on the floor here, and (human only) an uncollected goal gem.
    // Items are id-sorted, so merge keys and gem by item index.
    boost::container::small_vector<int, 4> pickups;
    for (int k : sc.keysAt[pos]) {
        if (s.key(k) == KeyLocation::Floor) pickups.push_back(sc.keySlots[k]);
    }
    if (agent == Agent::Human) {
        int g = sc.gemAt[pos];
        if (g >= 0 && sc.goalGem[g] && !s.has_gem(g)) pickups.push_back(sc.gemSlots[g]);
    }
    std::sort(pickups.begin(), pickups.end());
    for (int item : pickups) out.push_back(Action::pickup(item));

    const KeyLocation mine = held_by(agent);
    for (std::size_t d = 0; d < sc.doorSlots.size(); ++d) {
        if (!s.door_locked(static_cast<int>(d))) continue;
        const Item& door = sc.items[sc.doorSlots[d]];
        int dc = sc.cell_index(door.cell);
        bool adjacent = false;
        for (int n : sc.neighbors[dc]) adjacent |= (n == pos);
        if (!adjacent) continue;
        for (std::size_t k = 0; k < sc.keySlots.size(); ++k) {
            if (s.key(static_cast<int>(k)) == mine && sc.items[sc.keySlots[k]].color == door.color)
                out.push_back(Action::unlock(sc.doorSlots[d], sc.keySlots[k]));
        }
    }
    if (adjacent_or_same(sc, s.human, s.robot)) {
        for (std::size_t k = 0; k < sc.keySlots.size(); ++k) {
            if (s.key(static_cast<int>(k)) == mine)
                out.push_back(Action::handover(agent, other(agent), sc.keySlots[k]));
        }
    }
    out.push_back(Action::wait());
}

inline ActionList legal_actions(const Scenario& sc, const State& s, Agent agent) {
    ActionList out;
    legal_actions(sc, s, agent, out);
    return out;
}

/// Applies `a` for `agent` without legality checks; callers guarantee legality.
inline State apply_unchecked(const Scenario& sc, const State& s, Agent agent, const Action& a) {
    State n = s;
    n.t = s.t + 1;
    n.turn = other(s.turn);
    switch (a.kind) {
        case ActionKind::Up:
        case ActionKind::Down:
        case ActionKind::Left:
        case ActionKind::Right:
            n.set_pos(agent, sc.neighbors[s.pos(agent)][static_cast<int>(a.kind)]);
            break;
        case ActionKind::PickUp: {
            const Item& it = sc.items[a.item];
            if (it.kind == ItemKind::Key) n.set_key(sc.slotOf[a.item], held_by(agent));
            else n.gems = static_cast<std::uint8_t>(n.gems | (1u << sc.slotOf[a.item]));
            break;
        }
        case ActionKind::Unlock:
            n.lockedDoors = static_cast<std::uint8_t>(n.lockedDoors & ~(1u << sc.slotOf[a.item]));
            n.set_key(sc.slotOf[a.key], KeyLocation::Consumed);
            break;
        case ActionKind::Handover:
            n.set_key(sc.slotOf[a.item], held_by(a.to));
            break;
        case ActionKind::Wait:
            break;
    }
    return n;
}

inline std::string describe(const Scenario& sc, const Action& a) {
    std::string out(to_string(a.kind));
    auto id = [&](int item) { return (item >= 0 && item < static_cast<int>(sc.items.size())) ? sc.items[item].id : std::string("?"); };
    switch (a.kind) {
        case ActionKind::PickUp: out += "(" + id(a.item) + ")"; break;
        case ActionKind::Unlock: out += "(" + id(a.item) + "," + id(a.key) + ")"; break;
        case ActionKind::Handover:
            out += "(" + std::string(to_string(a.from)) + "," + std::string(to_string(a.to)) + "," + id(a.item) + ")";
            break;
        default: break;
    }
    return out;
}

/// Explains why `a` is illegal for `agent` in `s`, or returns an empty string.
inline std::string illegality(const Scenario& sc, const State& s, Agent agent, const Action& a) {
    const int pos = s.pos(agent);
    const int nItems = static_cast<int>(sc.items.size());
    switch (a.kind) {
        case ActionKind::Up:
        case ActionKind::Down:
        case ActionKind::Left:
        case ActionKind::Right: {
            int dest = sc.neighbors[pos][static_cast<int>(a.kind)];
            if (dest < 0) return "move blocked by wall or grid edge";
            if (!is_passable(sc, s, dest)) return "move blocked by locked door";
            return {};
        }
        case ActionKind::PickUp: {
            if (a.item < 0 || a.item >= nItems) return "pickup of unknown item";
            const Item& it = sc.items[a.item];
            if (it.kind == ItemKind::Door) return "doors cannot be picked up";
            if (sc.item_cell(a.item) != pos) return "agent is not on the cell of '" + it.id + "'";
            if (it.kind == ItemKind::Key) {
                if (s.key(sc.slotOf[a.item]) != KeyLocation::Floor) return "key '" + it.id + "' is not on the floor";
                return {};
            }
            if (agent != Agent::Human) return "only the human can pick up gems";
            if (!sc.goalGem[sc.slotOf[a.item]]) return "gem '" + it.id + "' is not a goal gem";
            if (s.has_gem(sc.slotOf[a.item])) return "gem '" + it.id + "' already collected";
            return {};
        }
        case ActionKind::Unlock: {
            if (a.item < 0 || a.item >= nItems || sc.items[a.item].kind != ItemKind::Door) return "unlock target is not a door";
            if (a.key < 0 || a.key >= nItems || sc.items[a.key].kind != ItemKind::Key) return "unlock requires a key";
            const Item& door = sc.items[a.item];
            const Item& key = sc.items[a.key];
            if (!s.door_locked(sc.slotOf[a.item])) return "door '" + door.id + "' is already unlocked";
            if (s.key(sc.slotOf[a.key]) != held_by(agent)) return "agent does not hold key '" + key.id + "'";
            if (door.color != key.color) return "key '" + key.id + "' does not match the color of '" + door.id + "'";
            bool adjacent = false;
            for (int n : sc.neighbors[sc.item_cell(a.item)]) adjacent |= (n == pos);
            if (!adjacent) return "agent is not adjacent to door '" + door.id + "'";
            return {};
        }
        case ActionKind::Handover: {
            if (a.item < 0 || a.item >= nItems || sc.items[a.item].kind != ItemKind::Key) return "handover requires a key";
            if (a.from != agent || a.to != other(agent)) return "handover must go from the acting agent to the other agent";
            if (s.key(sc.slotOf[a.item]) != held_by(agent)) return "giver does not hold key '" + sc.items[a.item].id + "'";
            if (!adjacent_or_same(sc, s.human, s.robot)) return "agents are not next to each other";
            return {};
        }
        case ActionKind::Wait: return {};
    }
    return "unknown action";
}

/// Deterministic joint transition. The agent whose turn it is performs its
/// action; the idle agent's action must be Wait.
inline State transition(const Scenario& sc, const State& s, const Action& aH, const Action& aR) {
    const Agent actor = s.turn;
    const Action& acting = actor == Agent::Human ? aH : aR;
    const Action& idle = actor == Agent::Human ? aR : aH;
    if (idle.kind != ActionKind::Wait)
        throw IllegalAction(std::string(to_string(other(actor))) + " must wait: it is the " +
                            std::string(to_string(actor)) + "'s turn");
    if (auto why = illegality(sc, s, actor, acting); !why.empty())
        throw IllegalAction(std::string(to_string(actor)) + " " + describe(sc, acting) + ": " + why);
    return apply_unchecked(sc, s, actor, acting);
}

/// Single-agent convenience wrapper around transition().
inline State step(const Scenario& sc, const State& s, const Action& a) {
    return s.turn == Agent::Human ? transition(sc, s, a, Action::wait()) : transition(sc, s, Action::wait(), a);
}

inline bool state_valid(const Scenario& sc, const State& s) {
    for (Agent a : {Agent::Human, Agent::Robot}) {
        int p = s.pos(a);
        if (p < 0 || p >= sc.cell_count() || sc.is_wall(p) || !is_passable(sc, s, p)) return false;
    }
    return true;
}

}  // namespace clips
