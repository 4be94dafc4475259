#pragma once
//
// Utterance scorer backed by an OpenAI-style /v1/completions endpoint: the
// prompt is the few-shot block plus the command, the utterance is echoed as
// a continuation and its token logprobs are summed.
//

#include <atomic>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

#include <httplib.h>

#include "clips/scenario_io.hpp"
#include "clips/utterance.hpp"

namespace clips {

/// Connection failure, timeout, 429 or 5xx. Worth retrying later.
struct RetriableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The endpoint answered but the body is not what we asked for.
struct MalformedResponse : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LlmConfig {
    std::string baseUrl;  // scheme://host[:port], optional path prefix
    std::string apiKey;
    std::string model = "davinci-002";
    int batchSize = 16;
    double timeoutSeconds = 30.0;
    bool fallbackToTemplate = false;

    /// CLIPS_LLM_BASE_URL, CLIPS_LLM_API_KEY, CLIPS_LLM_MODEL.
    static LlmConfig from_env() {
        LlmConfig c;
        if (const char* v = std::getenv("CLIPS_LLM_BASE_URL")) c.baseUrl = v;
        if (const char* v = std::getenv("CLIPS_LLM_API_KEY")) c.apiKey = v;
        if (const char* v = std::getenv("CLIPS_LLM_MODEL")) c.model = v;
        return c;
    }
};

/// Few-shot block in Command:/Utterance: form, ending with the command and
/// an open "Utterance:" slot.
inline std::string llm_prompt(const std::vector<FewShotExample>& examples, const Command& c) {
    std::string p;
    for (const auto& e : examples) p += "Command: " + e.command + "\nUtterance: " + e.utterance + "\n\n";
    p += "Command: " + to_string(c) + "\nUtterance:";
    return p;
}

namespace detail {

struct SplitUrl {
    std::string host;  // scheme://host[:port]
    std::string prefix;
};

inline SplitUrl split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (slash == std::string::npos) return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, slash), prefix};
}

/// Sum of logprobs of tokens starting at or after `from` characters.
inline double continuation_logprob(const json& choice, std::size_t from) {
    const json* lp = choice.contains("logprobs") ? &choice["logprobs"] : nullptr;
    if (!lp || !lp->is_object()) throw MalformedResponse("choice without logprobs");
    const auto& offsets = lp->value("text_offset", json::array());
    const auto& values = lp->value("token_logprobs", json::array());
    if (!offsets.is_array() || !values.is_array() || offsets.size() != values.size())
        throw MalformedResponse("logprobs arrays missing or of unequal length");
    double total = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        if (!offsets[i].is_number_integer()) throw MalformedResponse("non-integer text_offset");
        if (offsets[i].get<std::size_t>() < from) continue;
        if (!values[i].is_number()) throw MalformedResponse("null logprob inside the continuation");
        total += values[i].get<double>();
        any = true;
    }
    if (!any) throw MalformedResponse("no continuation tokens in echo");
    return total;
}

}  // namespace detail

class LlmScorer : public UtteranceScorer {
public:
    LlmScorer(LlmConfig cfg, std::vector<FewShotExample> examples)
        : cfg_(std::move(cfg)), examples_(std::move(examples)) {
        if (cfg_.baseUrl.empty()) throw std::invalid_argument("LLM scorer needs a base URL (CLIPS_LLM_BASE_URL)");
        if (cfg_.batchSize < 1) throw std::invalid_argument("batchSize must be >= 1");
    }

    std::vector<double> score(const std::string& u, const std::vector<Command>& commands) override {
        try {
            return score_uncached_misses(u, commands);
        } catch (const RetriableError&) {
            if (!cfg_.fallbackToTemplate) throw;
            return fallback_.score(u, commands);
        }
    }

    std::string name() const override { return "llm"; }

    std::size_t requests() const { return requests_; }
    std::size_t cache_size() const {
        std::lock_guard lock(mu_);
        return cache_.size();
    }

private:
    std::vector<double> score_uncached_misses(const std::string& u, const std::vector<Command>& commands) {
        std::vector<double> out(commands.size());
        std::vector<std::string> prompts(commands.size());
        std::vector<std::string> keys(commands.size());
        std::vector<std::size_t> misses;
        {
            std::lock_guard lock(mu_);
            for (std::size_t i = 0; i < commands.size(); ++i) {
                prompts[i] = llm_prompt(examples_, commands[i]);
                keys[i] = std::to_string(std::hash<std::string>{}(prompts[i])) + '\x1f' + u;
                if (auto it = cache_.find(keys[i]); it != cache_.end()) {
                    out[i] = it->second;
                } else if (std::find_if(misses.begin(), misses.end(), [&](std::size_t j) { return keys[j] == keys[i]; }) ==
                           misses.end()) {
                    misses.push_back(i);
                }
            }
        }
        for (std::size_t b = 0; b < misses.size(); b += static_cast<std::size_t>(cfg_.batchSize)) {
            const std::size_t e = std::min(misses.size(), b + static_cast<std::size_t>(cfg_.batchSize));
            std::vector<std::string> batch;
            for (std::size_t k = b; k < e; ++k) batch.push_back(prompts[misses[k]]);
            const auto scores = request(batch, u);
            std::lock_guard lock(mu_);
            for (std::size_t k = b; k < e; ++k) cache_[keys[misses[k]]] = scores[k - b];
        }
        std::lock_guard lock(mu_);
        for (std::size_t i = 0; i < commands.size(); ++i) out[i] = cache_.at(keys[i]);
        return out;
    }

    std::vector<double> request(const std::vector<std::string>& prompts, const std::string& u) {
        const auto url = detail::split_url(cfg_.baseUrl);
        httplib::Client cli(url.host);
        const auto secs = static_cast<time_t>(cfg_.timeoutSeconds);
        const auto usecs = static_cast<time_t>((cfg_.timeoutSeconds - static_cast<double>(secs)) * 1e6);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        if (!cfg_.apiKey.empty()) cli.set_bearer_token_auth(cfg_.apiKey);

        json body;
        body["model"] = cfg_.model;
        body["prompt"] = json::array();
        for (const auto& p : prompts) body["prompt"].push_back(p + " " + u);
        body["max_tokens"] = 0;
        body["echo"] = true;
        body["logprobs"] = 1;
        body["temperature"] = 0;

        ++requests_;
        auto res = cli.Post(url.prefix + "/v1/completions", body.dump(), "application/json");
        if (!res) throw RetriableError("LLM endpoint unreachable: " + httplib::to_string(res.error()));
        if (res->status == 429 || res->status >= 500)
            throw RetriableError("LLM endpoint returned HTTP " + std::to_string(res->status));
        if (res->status != 200) throw MalformedResponse("LLM endpoint returned HTTP " + std::to_string(res->status));

        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw MalformedResponse(std::string("LLM response is not JSON: ") + e.what());
        }
        if (!parsed.contains("choices") || !parsed["choices"].is_array())
            throw MalformedResponse("LLM response without choices");
        const auto& choices = parsed["choices"];
        if (choices.size() != prompts.size()) throw MalformedResponse("LLM response has wrong number of choices");

        std::vector<double> out(prompts.size());
        std::vector<bool> seen(prompts.size(), false);
        for (std::size_t k = 0; k < choices.size(); ++k) {
            const auto& ch = choices[k];
            std::size_t idx = k;
            if (ch.contains("index")) {
                if (!ch["index"].is_number_integer()) throw MalformedResponse("non-integer choice index");
                idx = ch["index"].get<std::size_t>();
            }
            if (idx >= prompts.size() || seen[idx]) throw MalformedResponse("choice index out of range or repeated");
            seen[idx] = true;
            out[idx] = detail::continuation_logprob(ch, prompts[idx].size());
        }
        return out;
    }

    LlmConfig cfg_;
    std::vector<FewShotExample> examples_;
    TemplateScorer fallback_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, double> cache_;
    std::atomic<std::size_t> requests_{0};
};

}  // namespace clips
