#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "clips/evaluation.hpp"
#include "clips/llm.hpp"
#include "clips/service.hpp"

namespace {

std::unique_ptr<clips::UtteranceScorer> make_scorer(const std::string& name, const std::string& examplesPath) {
    if (name == "template") return std::make_unique<clips::TemplateScorer>();
    if (name == "llm") {
        auto cfg = clips::LlmConfig::from_env();
        if (cfg.baseUrl.empty()) throw std::runtime_error("--scorer llm needs CLIPS_LLM_BASE_URL");
        return std::make_unique<clips::LlmScorer>(cfg, clips::load_examples(examplesPath));
    }
    throw std::runtime_error("unknown scorer '" + name + "' (template|llm)");
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"goal assistance with language-guided inverse planning"};
    app.require_subcommand(1);

    std::string scorerName = "template";
    std::string examples = std::string(CLIPS_DATA_DIR) + "/fewshot.txt";

    auto* run = app.add_subcommand("run", "run one scenario and write its trace");
    std::string scenarioPath, mode = "multimodal", assist = "qmdp-offline", out;
    std::uint64_t seed = 0;
    run->add_option("--scenario", scenarioPath, "scenario file")->required();
    run->add_option("--mode", mode, "multimodal|action-only|language-only");
    run->add_option("--assist", assist, "qmdp-offline|qmdp-online|pibar|literal-naive|literal-efficient");
    run->add_option("--scorer", scorerName, "template|llm");
    run->add_option("--examples", examples, "few-shot file for the llm scorer");
    run->add_option("--seed", seed);
    run->add_option("--out", out, "trace file (JSON lines); stdout if omitted");

    auto* eval = app.add_subcommand("eval", "run a scenario pack under every mode");
    std::string packDir = std::string(CLIPS_DATA_DIR) + "/pack", report = "report.csv", detail, ratingsPath, traceDir;
    eval->add_option("--pack", packDir, "pack directory");
    eval->add_option("--report", report, "summary CSV");
    eval->add_option("--detail", detail, "per-scenario CSV (default: <report>_detail.csv)");
    eval->add_option("--ratings", ratingsPath, "human ratings CSV");
    eval->add_option("--traces", traceDir, "directory for per-run traces");
    eval->add_option("--scorer", scorerName, "template|llm");
    eval->add_option("--examples", examples, "few-shot file for the llm scorer");
    eval->add_option("--seed", seed);

    auto* serve = app.add_subcommand("serve", "serve live sessions over HTTP");
    int port = 8080;
    std::string host = "127.0.0.1";
    serve->add_option("--port", port);
    serve->add_option("--host", host);
    serve->add_option("--scorer", scorerName, "template|llm");
    serve->add_option("--examples", examples, "few-shot file for the llm scorer");
    serve->add_option("--scenarios", packDir, "directory searched for scenario names");

    CLI11_PARSE(app, argc, argv);

    try {
        auto scorer = make_scorer(scorerName, examples);
        if (*run) {
            clips::RunConfig cfg;
            auto im = clips::inference_mode_from_string(mode);
            if (!im) throw std::runtime_error("unknown --mode '" + mode + "'");
            auto am = clips::assist_mode_from_string(assist);
            if (!am) throw std::runtime_error("unknown --assist '" + assist + "'");
            cfg.inference.mode = *im;
            cfg.assist.mode = *am;
            cfg.assist.seed = seed;
            auto sc = std::make_shared<const clips::Scenario>(clips::load_scenario(scenarioPath));
            const auto res = clips::run_assistant(sc, cfg, *scorer);
            const std::string text = clips::to_jsonl(res.events);
            if (out.empty()) std::cout << text;
            else write_file(out, text);
            return 0;
        }
        if (*eval) {
            const auto pack = clips::load_pack(packDir);
            std::vector<clips::RatingRow> ratings;
            if (!ratingsPath.empty()) {
                std::ifstream in(ratingsPath);
                if (!in) throw std::runtime_error("cannot open ratings '" + ratingsPath + "'");
                std::stringstream ss;
                ss << in.rdbuf();
                ratings = clips::parse_ratings_csv(ss.str());
            }
            const auto runs =
                clips::run_pack(pack, clips::standard_modes(seed), *scorer, ratingsPath.empty() ? nullptr : &ratings);
            write_file(report, clips::report_csv(runs));
            if (detail.empty()) {
                std::filesystem::path p(report);
                detail = (p.parent_path() / (p.stem().string() + "_detail.csv")).string();
            }
            write_file(detail, clips::detail_csv(runs));
            if (!traceDir.empty()) {
                std::filesystem::create_directories(traceDir);
                for (const auto& r : runs) {
                    for (const auto& e : r.episodes)
                        write_file((std::filesystem::path(traceDir) / (e.scenario + "." + r.label + ".jsonl")).string(),
                                   clips::to_jsonl(e.events));
                }
            }
            std::cout << clips::report_csv(runs);
            for (const auto& r : runs) {
                for (const auto& [sc, err] : r.failures) std::cerr << r.label << " " << sc << ": " << err << "\n";
            }
            return 0;
        }
        if (*serve) {
            clips::SessionManager sessions(std::move(scorer), packDir);
            httplib::Server server;
            clips::mount_routes(server, sessions);
            std::cerr << "listening on " << host << ":" << port << "\n";
            if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
