#pragma once
// Text-generation and embedding backends.
//
// Every module talks to a Provider; nothing else builds network traffic.
// Requests carry a task tag so scripted mocks and logs can tell the
// different prompt families apart.

#include "inner_thoughts/core.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

namespace inner_thoughts {

namespace tasks {
inline constexpr const char* interpret = "interpret";
inline constexpr const char* system1 = "form_system1";
inline constexpr const char* system2 = "form_system2";
inline constexpr const char* evaluate = "evaluate";
inline constexpr const char* rate = "rate";
inline constexpr const char* classify_turn = "classify_turn";
inline constexpr const char* articulate = "articulate";
inline constexpr const char* restyle = "restyle";
inline constexpr const char* acknowledge = "acknowledge";
inline constexpr const char* next_speaker = "next_speaker";
inline constexpr const char* persona_reply = "persona_reply";
}  // namespace tasks

/// Only the top five first-token alternatives are ever consumed.
inline constexpr int kMaxTopLogprobs = 5;

struct CompletionRequest {
    std::string task;
    std::string system_prompt;
    std::string user_prompt;
    int want_top_logprobs = 0;
    int max_tokens = 256;
    double temperature = 0.7;
};

struct TokenAlternative {
    std::string token;
    double logprob = 0.0;
};

struct CompletionResponse {
    std::string text;
    /// Sorted by descending logprob, at most kMaxTopLogprobs entries.
    std::vector<TokenAlternative> first_token_alternatives;
};

inline void to_json(json& j, const TokenAlternative& a) { j = json{{"token", a.token}, {"logprob", a.logprob}}; }
inline void from_json(const json& j, TokenAlternative& a) {
    j.at("token").get_to(a.token);
    j.at("logprob").get_to(a.logprob);
}

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim() const noexcept { return values.size(); }
};

enum class ProviderErrorKind { transport, refusal, timeout, script_miss, bad_response };

class ProviderError : public std::runtime_error {
public:
    ProviderError(ProviderErrorKind kind, const std::string& what, bool retryable)
        : std::runtime_error(what), kind_(kind), retryable_(retryable) {}
    ProviderErrorKind kind() const noexcept { return kind_; }
    bool retryable() const noexcept { return retryable_; }

private:
    ProviderErrorKind kind_;
    bool retryable_;
};

class DegenerateVector : public std::domain_error {
public:
    DegenerateVector() : std::domain_error("zero-norm or mismatched embedding") {}
};

/// Cosine similarity in [-1, 1].
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim() || a.dim() == 0) throw DegenerateVector();
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) throw DegenerateVector();
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Backend interface. Implementations must be safe to call from several
/// threads at once.
class Provider {
public:
    virtual ~Provider() = default;

    CompletionResponse complete(const CompletionRequest& req) {
        if (req.system_prompt.empty() && req.user_prompt.empty())
            throw std::invalid_argument("completion request has empty prompts");
        if (req.want_top_logprobs < 0 || req.want_top_logprobs > kMaxTopLogprobs)
            throw std::invalid_argument("want_top_logprobs must be in [0,5]");
        CompletionResponse resp = do_complete(req);
        auto& alts = resp.first_token_alternatives;
        std::stable_sort(alts.begin(), alts.end(),
                         [](const TokenAlternative& x, const TokenAlternative& y) { return x.logprob > y.logprob; });
        if (alts.size() > static_cast<std::size_t>(req.want_top_logprobs)) alts.resize(req.want_top_logprobs);
        for (auto& a : alts) a.logprob = std::min(a.logprob, 0.0);
        return resp;
    }

    EmbeddingVector embed(std::string_view text) {
        if (text.empty()) throw std::invalid_argument("embed: empty text");
        return do_embed(text);
    }

    virtual std::string name() const = 0;

protected:
    virtual CompletionResponse do_complete(const CompletionRequest& req) = 0;
    virtual EmbeddingVector do_embed(std::string_view text) = 0;
};

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds initial_backoff{250};
};

/// Runs fn, retrying retryable ProviderErrors with exponential backoff.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
    auto backoff = policy.initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const ProviderError& e) {
            if (!e.retryable() || attempt >= policy.max_retries) throw;
            if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

}  // namespace inner_thoughts
