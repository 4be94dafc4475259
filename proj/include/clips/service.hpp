#pragma once
//
// Live sessions over HTTP. Each session owns its scenario, state, belief
// and event log; requests on one session are serialized by its mutex.
//
//   POST /sessions                 {"scenario": name | "scenario_json": {...},
//                                   "mode": "multimodal", "assist": "qmdp-online", "seed": 0}
//   POST /sessions/{id}/turn       {"action": "up", "args": [], "utterance": "...", "t": 3}
//   GET  /sessions/{id}/belief
//   GET  /sessions/{id}/events     ?from=k (last seen index) &follow=0|1, server-sent events
//

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <mutex>

#include "clips/assistance.hpp"
#include "clips/trace.hpp"

namespace clips {

/// Error with an HTTP status attached.
struct ServiceError : std::runtime_error {
    int status;
    json body;
    ServiceError(int status, const std::string& msg, json extra = json::object())
        : std::runtime_error(msg), status(status), body(std::move(extra)) {
        body["error"] = msg;
    }
};

struct SessionConfig {
    InferenceConfig inference;
    AssistConfig assist;
};

class Session {
public:
    Session(std::string id, std::shared_ptr<const Scenario> sc, SessionConfig cfg, UtteranceScorer& scorer)
        : id_(std::move(id)),
          scenario_(std::move(sc)),
          cfg_(std::move(cfg)),
          scorer_(scorer),
          pool_(scenario_, cfg_.inference.planner),
          belief_(belief_init(pool_, cfg_.inference)),
          state_(initial_state(*scenario_)),
          rng_(cfg_.assist.seed) {
        if (is_literal(cfg_.assist.mode)) throw ServiceError(400, "literal listeners are batch-only; use qmdp-*/pibar");
        log_.push_back(state_event(*scenario_, state_));
        log_.push_back(belief_event(belief_, state_.t));
    }

    const std::string& id() const { return id_; }
    const Scenario& scenario() const { return *scenario_; }

    bool game_over() const {
        return any_gem(state_) || state_.t > scenario_->maxSteps;
    }

    /// Human action (+ utterance), belief update, assistant reply.
    json post_turn(const json& req) {
        std::unique_lock lock(mu_);
        if (game_over()) throw ServiceError(409, "game over");
        if (req.contains("t") && req["t"].get<int>() != state_.t)
            throw ServiceError(409, "out of turn: expected t=" + std::to_string(state_.t), {{"t", state_.t}});
        if (!req.contains("action") || !req["action"].is_string()) throw ServiceError(400, "missing \"action\"");
        std::vector<std::string> args;
        if (req.contains("args")) args = req["args"].get<std::vector<std::string>>();
        std::optional<std::string> utterance;
        if (req.contains("utterance") && req["utterance"].is_string() && !req["utterance"].get<std::string>().empty())
            utterance = req["utterance"].get<std::string>();

        const Scenario& sc = *scenario_;
        Action a;
        try {
            a = parse_action(sc, Agent::Human, req["action"].get<std::string>(), args);
        } catch (const ScenarioError& e) {
            throw ServiceError(422, e.what(), {{"legal", legal_json(Agent::Human)}});
        }
        if (auto why = illegality(sc, state_, Agent::Human, a); !why.empty())
            throw ServiceError(422, why, {{"legal", legal_json(Agent::Human)}});

        const std::size_t first = log_.size();
        if (utterance) log_.push_back(utterance_event(state_.t, *utterance));
        json reply;
        reply["human_action"] = action_event(sc, Agent::Human, state_.t, a);
        apply(a, utterance);
        reply["human_state"] = state_event(sc, state_);
        if (!game_over()) {
            const auto start = std::chrono::steady_clock::now();
            const AssistChoice choice = cfg_.assist.mode == AssistMode::Pibar
                                            ? pibar_action(belief_, state_, cfg_.assist, pibar_, rng_)
                                            : qmdp_action(belief_, state_, cfg_.assist);
            const double planner = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            apply(choice.action, std::nullopt);
            reply["robot_action"] = action_event(sc, Agent::Robot, state_.t - 1, choice.action);
            reply["planner_seconds"] = planner;
        }
        reply["state"] = state_event(sc, state_);
        reply["belief"] = belief_event(belief_, state_.t);
        reply["game_over"] = game_over();
        reply["degenerate"] = degenerate_;
        reply["events"] = {first, log_.size()};
        lock.unlock();
        cv_.notify_all();
        return reply;
    }

    json belief() const {
        std::lock_guard lock(mu_);
        return belief_event(belief_, state_.t);
    }

    json summary() const {
        std::lock_guard lock(mu_);
        return {{"id", id_},
                {"scenario", scenario_->name},
                {"state", state_event(*scenario_, state_)},
                {"belief", belief_event(belief_, state_.t)},
                {"game_over", game_over()}};
    }

    /// Events with index > from; blocks up to `wait` for new ones when none.
    std::vector<std::pair<std::size_t, json>> events_after(long from, std::chrono::milliseconds wait = {}) const {
        std::unique_lock lock(mu_);
        auto ready = [&] { return static_cast<long>(log_.size()) - 1 > from || closed_; };
        if (wait.count() > 0) cv_.wait_for(lock, wait, ready);
        std::vector<std::pair<std::size_t, json>> out;
        for (std::size_t i = static_cast<std::size_t>(std::max(from + 1, 0L)); i < log_.size(); ++i) out.push_back({i, log_[i]});
        return out;
    }

    std::vector<json> log() const {
        std::lock_guard lock(mu_);
        return log_;
    }

    State state() const {
        std::lock_guard lock(mu_);
        return state_;
    }

    /// Closed, or over with nothing left to stream past `from`.
    bool finished(long from) const {
        std::lock_guard lock(mu_);
        return (closed_ || game_over()) && static_cast<long>(log_.size()) - 1 <= from;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    const SessionConfig& config() const { return cfg_; }

private:
    static bool any_gem(const State& s) {
        for (int g = 0; g < kMaxGems; ++g) {
            if (s.has_gem(g)) return true;
        }
        return false;
    }

    json legal_json(Agent agent) const {
        json out = json::array();
        for (const Action& a : legal_actions(*scenario_, state_, agent))
            out.push_back({{"action", std::string(to_string(a.kind))}, {"args", action_args(*scenario_, a)}});
        return out;
    }

    void apply(const Action& a, std::optional<std::string> utterance) {
        const Observation o = make_observation(*scenario_, state_, a, std::move(utterance));
        log_.push_back(action_event(*scenario_, state_.turn, state_.t, a));
        if (!degenerate_) {
            try {
                belief_ = belief_update(belief_, o, cfg_.inference, scorer_);
            } catch (const DegenerateBelief&) {
                degenerate_ = true;
                log_.push_back(metric_event("degenerate_belief", o.t));
            }
        }
        state_ = o.stateNext;
        log_.push_back(state_event(*scenario_, state_));
        log_.push_back(belief_event(belief_, state_.t));
    }

    std::string id_;
    std::shared_ptr<const Scenario> scenario_;
    SessionConfig cfg_;
    UtteranceScorer& scorer_;
    PlannerPool pool_;
    Belief belief_;
    State state_;
    std::mt19937_64 rng_;
    PibarState pibar_;
    bool degenerate_ = false;
    bool closed_ = false;
    std::vector<json> log_;
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
};

/// Human turns (action + utterance) recorded in an event log, in order.
inline std::vector<json> human_turns(const std::vector<json>& log) {
    std::vector<json> turns;
    std::optional<std::string> pending;
    for (const auto& e : log) {
        const std::string type = e.value("type", "");
        if (type == "utterance") pending = e["text"].get<std::string>();
        if (type == "human_action") {
            json t = {{"action", e["action"]}, {"args", e["args"]}};
            if (pending) t["utterance"] = *pending;
            pending.reset();
            turns.push_back(std::move(t));
        }
    }
    return turns;
}

class SessionManager {
public:
    explicit SessionManager(std::unique_ptr<UtteranceScorer> scorer, std::string scenarioDir = {})
        : scorer_(std::move(scorer)), scenarioDir_(std::move(scenarioDir)) {}

    std::shared_ptr<Session> create(const json& req) {
        if (!req.is_object()) throw ServiceError(400, "request body must be a JSON object");
        std::shared_ptr<const Scenario> sc;
        try {
            if (req.contains("scenario_json")) {
                sc = std::make_shared<const Scenario>(scenario_from_json(req["scenario_json"]));
            } else if (req.contains("scenario_text")) {
                sc = std::make_shared<const Scenario>(parse_scenario(req["scenario_text"].get<std::string>()));
            } else if (req.contains("scenario")) {
                sc = std::make_shared<const Scenario>(load_scenario(resolve(req["scenario"].get<std::string>())));
            } else {
                throw ServiceError(400, "need \"scenario\", \"scenario_json\" or \"scenario_text\"");
            }
        } catch (const ScenarioError& e) {
            throw ServiceError(400, e.what());
        } catch (const json::exception& e) {
            throw ServiceError(400, e.what());
        }
        SessionConfig cfg;
        cfg.assist.mode = AssistMode::QmdpOnline;
        if (req.contains("mode")) {
            auto m = inference_mode_from_string(req["mode"].get<std::string>());
            if (!m) throw ServiceError(400, "unknown mode");
            cfg.inference.mode = *m;
        }
        if (req.contains("assist")) {
            auto m = assist_mode_from_string(req["assist"].get<std::string>());
            if (!m) throw ServiceError(400, "unknown assist mode");
            cfg.assist.mode = *m;
        }
        cfg.assist.seed = req.value("seed", std::uint64_t{0});
        std::string id;
        {
            std::lock_guard lock(mu_);
            id = "s" + std::to_string(++counter_);
        }
        auto s = std::make_shared<Session>(id, sc, cfg, *scorer_);
        std::lock_guard lock(mu_);
        sessions_[id] = s;
        return s;
    }

    std::shared_ptr<Session> get(const std::string& id) const {
        std::lock_guard lock(mu_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
        return it->second;
    }

    /// A fresh session fed the human turns of `log`; used to check replay
    /// determinism.
    std::shared_ptr<Session> replay(const Session& s) {
        auto copy = std::make_shared<Session>(s.id() + "-replay", std::make_shared<const Scenario>(s.scenario()),
                                              s.config(), *scorer_);
        for (const auto& t : human_turns(s.log())) copy->post_turn(t);
        return copy;
    }

    void close_all() {
        std::lock_guard lock(mu_);
        for (auto& [_, s] : sessions_) s->close();
    }

    UtteranceScorer& scorer() { return *scorer_; }

private:
    std::string resolve(const std::string& name) const {
        namespace fs = std::filesystem;
        if (fs::exists(name)) return name;
        if (!scenarioDir_.empty()) {
            for (const auto& cand : {fs::path(scenarioDir_) / name, fs::path(scenarioDir_) / (name + ".json")}) {
                if (fs::exists(cand)) return cand.string();
            }
        }
        throw ServiceError(404, "unknown scenario '" + name + "'");
    }

    std::unique_ptr<UtteranceScorer> scorer_;
    std::string scenarioDir_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t counter_ = 0;
    mutable std::mutex mu_;
};

inline void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const ServiceError& e) {
        send_json(res, e.status, e.body);
    } catch (const json::exception& e) {
        send_json(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
        send_json(res, 500, {{"error", e.what()}});
    }
}

inline std::string sse_frame(std::size_t index, const json& e) {
    return "id: " + std::to_string(index) + "\nevent: " + e.value("type", "event") + "\ndata: " + e.dump() + "\n\n";
}

inline void mount_routes(httplib::Server& server, SessionManager& sessions) {
    server.Post("/sessions", [&](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const json body = req.body.empty() ? json::object() : json::parse(req.body);
            send_json(res, 201, sessions.create(body)->summary());
        });
    });
    server.Post(R"(/sessions/([^/]+)/turn)", [&](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto s = sessions.get(req.matches[1]);
            send_json(res, 200, s->post_turn(json::parse(req.body)));
        });
    });
    server.Get(R"(/sessions/([^/]+)/belief)", [&](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, sessions.get(req.matches[1])->belief()); });
    });
    server.Get(R"(/sessions/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, sessions.get(req.matches[1])->summary()); });
    });
    server.Get(R"(/sessions/([^/]+)/events)", [&](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto s = sessions.get(req.matches[1]);
            long from = -1;
            if (req.has_param("from")) from = std::stol(req.get_param_value("from"));
            else if (req.has_header("Last-Event-ID")) from = std::stol(req.get_header_value("Last-Event-ID"));
            const bool follow = !req.has_param("follow") || req.get_param_value("follow") != "0";
            if (!follow) {
                std::string body;
                for (const auto& [i, e] : s->events_after(from)) body += sse_frame(i, e);
                res.set_content(body, "text/event-stream");
                return;
            }
            auto cursor = std::make_shared<long>(from);
            res.set_chunked_content_provider("text/event-stream", [s, cursor](std::size_t, httplib::DataSink& sink) {
                for (const auto& [i, e] : s->events_after(*cursor, std::chrono::milliseconds(500))) {
                    const std::string f = sse_frame(i, e);
                    if (!sink.write(f.data(), f.size())) return false;
                    *cursor = static_cast<long>(i);
                }
                if (s->finished(*cursor)) {
                    sink.done();
                    return true;
                }
                return sink.is_writable();
            });
        });
    });
}

}  // namespace clips
