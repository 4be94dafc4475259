#pragma once
//
// Scenario packs, metrics against a reference run, rating-file ingestion
// and Pearson correlation with bootstrap confidence intervals.
//

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "clips/episode.hpp"

namespace clips {

struct PackEntry {
    std::string file;
    std::shared_ptr<const Scenario> scenario;
    std::set<std::string> options;  // annotated optimal assistance options
    std::map<std::string, std::string> tags;
};

struct ScenarioPack {
    std::string dir;
    std::vector<PackEntry> entries;

    const PackEntry* find(const std::string& name) const {
        for (const auto& e : entries) {
            if (e.scenario->name == name) return &e;
        }
        return nullptr;
    }
};

/// Reads DIR/pack.json: {"scenarios": [{"file", "options", "tags"}]}.
inline ScenarioPack load_pack(const std::string& dir) {
    namespace fs = std::filesystem;
    ScenarioPack pack;
    pack.dir = dir;
    const fs::path manifest = fs::path(dir) / "pack.json";
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("cannot open pack manifest '" + manifest.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("pack manifest: " + std::string(e.what()));
    }
    for (const auto& s : j.value("scenarios", json::array())) {
        PackEntry e;
        e.file = s.at("file").get<std::string>();
        Scenario sc = load_scenario((fs::path(dir) / e.file).string());
        if (sc.name.empty()) sc.name = fs::path(e.file).stem().string();
        const json options = s.value("options", json::array());
        for (const auto& o : options) {
            const std::string id = o.get<std::string>();
            if (!sc.find_item(id)) throw std::runtime_error("pack: option '" + id + "' not in scenario " + e.file);
            e.options.insert(id);
        }
        const json tags = s.value("tags", json::object());
        for (const auto& [k, v] : tags.items()) e.tags[k] = v.get<std::string>();
        e.scenario = std::make_shared<const Scenario>(std::move(sc));
        pack.entries.push_back(std::move(e));
    }
    return pack;
}

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/// Empty prediction against a non-empty annotation scores precision 0; both
/// empty scores 1/1.
inline PrecisionRecall precision_recall(const std::set<std::string>& predicted, const std::set<std::string>& annotated) {
    if (predicted.empty() && annotated.empty()) return {1.0, 1.0};
    std::size_t hit = 0;
    for (const auto& p : predicted) hit += annotated.count(p);
    PrecisionRecall pr;
    pr.precision = predicted.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(predicted.size());
    pr.recall = annotated.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(annotated.size());
    return pr;
}

struct ScenarioMetrics {
    std::string scenario;
    bool hasReference = false;
    double pTrueGoal = std::numeric_limits<double>::quiet_NaN();
    double precision = 0.0;
    double recall = 0.0;
    double relPlanLength = std::numeric_limits<double>::quiet_NaN();
    double relHumanCost = std::numeric_limits<double>::quiet_NaN();
    double success = 0.0;
};

struct MeanErr {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double stderr_ = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
};

inline MeanErr mean_err(const std::vector<double>& xs) {
    MeanErr m;
    std::vector<double> v;
    for (double x : xs) {
        if (!std::isnan(x)) v.push_back(x);
    }
    m.n = v.size();
    if (v.empty()) return m;
    m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) {
        m.stderr_ = 0.0;
        return m;
    }
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    return m;
}

struct MetricsReport {
    std::vector<ScenarioMetrics> rows;
    std::vector<std::string> missingReference;
    MeanErr pTrueGoal, precision, recall, relPlanLength, relHumanCost;
    std::optional<double> pearsonGoal, pearsonAssist;
};

inline double safe_ratio(double num, double den) {
    if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

/// Per-scenario metrics of `runs` against `reference` runs of the same
/// scenarios, aggregated as mean and standard error.
inline MetricsReport compute_metrics(const std::vector<EpisodeResult>& runs, const ScenarioPack& pack,
                                     const std::vector<EpisodeResult>& reference) {
    MetricsReport rep;
    std::vector<double> p, pr, rc, rl, rh;
    for (const auto& run : runs) {
        ScenarioMetrics m;
        m.scenario = run.scenario;
        m.pTrueGoal = run.pTrueGoal;
        const PackEntry* entry = pack.find(run.scenario);
        const std::set<std::string> annotated = entry ? entry->options : std::set<std::string>{};
        for (const auto& r : run.rollouts) {
            const auto x = precision_recall(r.options, annotated);
            m.precision += r.weight * x.precision;
            m.recall += r.weight * x.recall;
            m.success += r.weight * (r.success ? 1.0 : 0.0);
        }
        auto ref = std::find_if(reference.begin(), reference.end(), [&](const EpisodeResult& e) { return e.scenario == run.scenario; });
        if (ref != reference.end()) {
            m.hasReference = true;
            m.relPlanLength = safe_ratio(run.mean_length(), ref->mean_length());
            m.relHumanCost = safe_ratio(run.mean_human_cost(), ref->mean_human_cost());
        } else {
            rep.missingReference.push_back(run.scenario);
        }
        p.push_back(m.pTrueGoal);
        pr.push_back(m.precision);
        rc.push_back(m.recall);
        rl.push_back(m.relPlanLength);
        rh.push_back(m.relHumanCost);
        rep.rows.push_back(std::move(m));
    }
    rep.pTrueGoal = mean_err(p);
    rep.precision = mean_err(pr);
    rep.recall = mean_err(rc);
    rep.relPlanLength = mean_err(rl);
    rep.relHumanCost = mean_err(rh);
    return rep;
}

// ---------------------------------------------------------------------------
// Correlation with human ratings
// ---------------------------------------------------------------------------

struct UndefinedCorrelation : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("pearson: need at least 3 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

struct Correlation {
    double r = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// r between model values and per-item rater means; the 95% interval comes
/// from resampling each item's raters with replacement. Resamples with zero
/// variance are skipped.
inline Correlation pearson_bootstrap(const std::vector<double>& model, const std::vector<std::vector<double>>& ratings,
                                     int nBoot, std::mt19937_64& rng) {
    if (model.size() != ratings.size()) throw std::invalid_argument("pearson_bootstrap: length mismatch");
    auto means = [&](const std::vector<std::vector<double>>& r) {
        std::vector<double> m;
        for (const auto& v : r) {
            if (v.empty()) throw std::invalid_argument("pearson_bootstrap: item without ratings");
            m.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
        }
        return m;
    };
    Correlation out;
    out.r = pearson(model, means(ratings));
    std::vector<double> rs;
    std::vector<std::vector<double>> sample(ratings.size());
    for (int b = 0; b < nBoot; ++b) {
        for (std::size_t i = 0; i < ratings.size(); ++i) {
            std::uniform_int_distribution<std::size_t> pick(0, ratings[i].size() - 1);
            sample[i].resize(ratings[i].size());
            for (auto& x : sample[i]) x = ratings[i][pick(rng)];
        }
        try {
            rs.push_back(pearson(model, means(sample)));
        } catch (const UndefinedCorrelation&) {
        }
    }
    if (rs.empty()) {
        out.lo = out.hi = out.r;
        return out;
    }
    std::sort(rs.begin(), rs.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(rs.size() - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double f = pos - static_cast<double>(i);
        return i + 1 < rs.size() ? rs[i] * (1 - f) + rs[i + 1] * f : rs[i];
    };
    out.lo = q(0.025);
    out.hi = q(0.975);
    return out;
}

/// Rows of `rater_id,scenario,goal_<id>...,option_<id>...` with 0/1 cells.
struct RatingRow {
    std::string rater;
    std::string scenario;
    std::map<std::string, double> goals;
    std::map<std::string, double> options;
};

inline std::vector<RatingRow> parse_ratings_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(l);
        while (std::getline(ls, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            cells.push_back(cell);
        }
        // getline drops a trailing empty cell
        std::string tail = l;
        while (!tail.empty() && (tail.back() == '\r' || tail.back() == ' ')) tail.pop_back();
        if (!tail.empty() && tail.back() == ',') cells.emplace_back();
        return cells;
    };
    if (!std::getline(in, line)) throw std::invalid_argument("ratings: empty file");
    const auto header = split(line);
    if (header.size() < 2 || header[0] != "rater_id" || header[1] != "scenario")
        throw std::invalid_argument("ratings: header must start with rater_id,scenario");
    for (std::size_t c = 2; c < header.size(); ++c) {
        if (header[c].rfind("goal_", 0) != 0 && header[c].rfind("option_", 0) != 0)
            throw std::invalid_argument("ratings: unexpected column '" + header[c] + "'");
    }
    std::vector<RatingRow> rows;
    int lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty() || line == "\r") continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw std::invalid_argument("ratings line " + std::to_string(lineNo) + ": expected " +
                                        std::to_string(header.size()) + " cells");
        RatingRow r{cells[0], cells[1], {}, {}};
        for (std::size_t c = 2; c < header.size(); ++c) {
            if (cells[c].empty()) continue;  // column not shown for this scenario
            if (cells[c] != "0" && cells[c] != "1")
                throw std::invalid_argument("ratings line " + std::to_string(lineNo) + ": cells must be 0 or 1");
            const double v = cells[c] == "1" ? 1.0 : 0.0;
            if (header[c].rfind("goal_", 0) == 0) r.goals[header[c].substr(5)] = v;
            else r.options[header[c].substr(7)] = v;
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Weighted fraction of rollouts in which the robot used each option.
inline std::map<std::string, double> option_marginals(const EpisodeResult& run) {
    std::map<std::string, double> out;
    for (const auto& r : run.rollouts) {
        for (const auto& o : r.options) out[o] += r.weight;
    }
    return out;
}

struct RatingComparison {
    std::vector<double> model;
    std::vector<std::vector<double>> human;
};

/// Pairs model goal posteriors (goals) or option marginals (options) with
/// per-rater selections, item by item. Raters' goal selections are
/// normalized to sum to one within a response.
inline RatingComparison compare_ratings(const std::vector<EpisodeResult>& runs, const std::vector<RatingRow>& rows,
                                        bool goals, const ScenarioPack& pack) {
    RatingComparison out;
    for (const auto& run : runs) {
        const PackEntry* entry = pack.find(run.scenario);
        if (!entry) continue;
        std::vector<const RatingRow*> mine;
        for (const auto& r : rows) {
            if (r.scenario == run.scenario) mine.push_back(&r);
        }
        if (mine.empty()) continue;
        if (goals) {
            if (run.goalPosterior.empty()) continue;
            for (std::size_t k = 0; k < entry->scenario->goals.size(); ++k) {
                const std::string& g = entry->scenario->goals[k];
                std::vector<double> hs;
                for (const auto* r : mine) {
                    double total = 0.0;
                    for (const auto& [_, v] : r->goals) total += v;
                    auto it = r->goals.find(g);
                    hs.push_back(total > 0.0 && it != r->goals.end() ? it->second / total : 0.0);
                }
                out.model.push_back(run.goalPosterior[k]);
                out.human.push_back(std::move(hs));
            }
        } else {
            const auto marg = option_marginals(run);
            std::set<std::string> ids;
            for (const auto* r : mine) {
                for (const auto& [id, _] : r->options) ids.insert(id);
            }
            for (const auto& id : ids) {
                std::vector<double> hs;
                for (const auto* r : mine) {
                    auto it = r->options.find(id);
                    hs.push_back(it == r->options.end() ? 0.0 : it->second);
                }
                auto m = marg.find(id);
                out.model.push_back(m == marg.end() ? 0.0 : m->second);
                out.human.push_back(std::move(hs));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pack runner
// ---------------------------------------------------------------------------

struct ModeSpec {
    std::string label;
    RunConfig config;
};

/// The standard line-up: CLIPS (multimodal Q_MDP), the unimodal inverse
/// planners and the two literal listeners.
inline std::vector<ModeSpec> standard_modes(std::uint64_t seed = 0) {
    std::vector<ModeSpec> out;
    auto add = [&](std::string label, InferenceMode im, AssistMode am) {
        RunConfig c;
        c.inference.mode = im;
        c.assist.mode = am;
        c.assist.seed = seed;
        out.push_back({std::move(label), c});
    };
    add("clips", InferenceMode::Multimodal, AssistMode::QmdpOffline);
    add("action-only", InferenceMode::ActionOnly, AssistMode::QmdpOffline);
    add("language-only", InferenceMode::LanguageOnly, AssistMode::QmdpOffline);
    add("literal-naive", InferenceMode::Multimodal, AssistMode::LiteralNaive);
    add("literal-efficient", InferenceMode::Multimodal, AssistMode::LiteralEfficient);
    return out;
}

struct PackRun {
    std::string label;
    std::vector<EpisodeResult> episodes;
    std::vector<std::pair<std::string, std::string>> failures;  // scenario, error
    MetricsReport report;
};

/// Runs every (scenario, mode) pair; the first mode is the reference for
/// relative metrics. Failures are isolated per scenario.
inline std::vector<PackRun> run_pack(const ScenarioPack& pack, const std::vector<ModeSpec>& modes, UtteranceScorer& scorer,
                                     const std::vector<RatingRow>* ratings = nullptr) {
    std::vector<PackRun> out;
    for (const auto& m : modes) {
        PackRun run;
        run.label = m.label;
        for (const auto& e : pack.entries) {
            try {
                run.episodes.push_back(run_assistant(e.scenario, m.config, scorer));
            } catch (const std::exception& ex) {
                run.failures.push_back({e.scenario->name, ex.what()});
            }
        }
        out.push_back(std::move(run));
    }
    for (auto& run : out) {
        run.report = compute_metrics(run.episodes, pack, out.front().episodes);
        if (ratings) {
            std::mt19937_64 rng(0);
            for (bool goals : {true, false}) {
                auto cmp = compare_ratings(run.episodes, *ratings, goals, pack);
                try {
                    const double r = pearson_bootstrap(cmp.model, cmp.human, 0, rng).r;
                    (goals ? run.report.pearsonGoal : run.report.pearsonAssist) = r;
                } catch (const std::invalid_argument&) {
                }
            }
        }
    }
    return out;
}

inline std::string fmt_num(double x) {
    if (std::isnan(x)) return "";
    std::ostringstream o;
    o.precision(6);
    o << x;
    return o.str();
}

/// Summary, one row per mode.
inline std::string report_csv(const std::vector<PackRun>& runs) {
    std::string out =
        "mode,p_true_goal,p_true_goal_se,precision,precision_se,recall,recall_se,rel_plan_length,rel_plan_length_se,"
        "rel_human_cost,rel_human_cost_se,pearson_goal,pearson_assist,failures\n";
    for (const auto& r : runs) {
        const auto& m = r.report;
        auto me = [](const MeanErr& x) { return fmt_num(x.mean) + "," + fmt_num(x.stderr_); };
        out += r.label + "," + me(m.pTrueGoal) + "," + me(m.precision) + "," + me(m.recall) + "," + me(m.relPlanLength) +
               "," + me(m.relHumanCost) + "," + (m.pearsonGoal ? fmt_num(*m.pearsonGoal) : "") + "," +
               (m.pearsonAssist ? fmt_num(*m.pearsonAssist) : "") + "," + std::to_string(r.failures.size()) + "\n";
    }
    return out;
}

/// Per-scenario detail rows.
inline std::string detail_csv(const std::vector<PackRun>& runs) {
    std::string out = "mode,scenario,p_true_goal,precision,recall,rel_plan_length,rel_human_cost,success,error\n";
    for (const auto& r : runs) {
        for (const auto& s : r.report.rows) {
            out += r.label + "," + s.scenario + "," + fmt_num(s.pTrueGoal) + "," + fmt_num(s.precision) + "," +
                   fmt_num(s.recall) + "," + fmt_num(s.relPlanLength) + "," + fmt_num(s.relHumanCost) + "," +
                   fmt_num(s.success) + ",\n";
        }
        for (const auto& [sc, err] : r.failures) {
            std::string clean = err;
            std::replace(clean.begin(), clean.end(), ',', ';');
            std::replace(clean.begin(), clean.end(), '\n', ' ');
            out += r.label + "," + sc + ",,,,,,," + clean + "\n";
        }
    }
    return out;
}

}  // namespace clips
