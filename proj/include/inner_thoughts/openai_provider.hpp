#pragma once
// Provider backed by an OpenAI-compatible HTTP API
// (/chat/completions with logprobs, /embeddings).
//
// Define CPPHTTPLIB_OPENSSL_SUPPORT before including (and link OpenSSL) to
// reach https endpoints.

#include "inner_thoughts/provider.hpp"

#include <httplib.h>

#include <cstdlib>

namespace inner_thoughts {

struct OpenAIConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string chat_model = "gpt-4o";
    std::string embedding_model = "text-embedding-3-small";
    std::string api_key_env = "OPENAI_API_KEY";
    std::chrono::seconds timeout{60};
    RetryPolicy retry;
};

inline void from_json(const json& j, OpenAIConfig& c) {
    c.base_url = j.value("base_url", c.base_url);
    c.chat_model = j.value("chat_model", c.chat_model);
    c.embedding_model = j.value("embedding_model", c.embedding_model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.timeout = std::chrono::seconds(j.value("timeout_seconds", static_cast<long>(c.timeout.count())));
    c.retry.max_retries = j.value("max_retries", c.retry.max_retries);
}

class OpenAIProvider final : public Provider {
public:
    explicit OpenAIProvider(OpenAIConfig config) : config_(std::move(config)) {
        const auto scheme = config_.base_url.find("://");
        if (scheme == std::string::npos) throw std::invalid_argument("base_url needs a scheme: " + config_.base_url);
        const auto slash = config_.base_url.find('/', scheme + 3);
        origin_ = config_.base_url.substr(0, slash);
        prefix_ = slash == std::string::npos ? "" : config_.base_url.substr(slash);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }

    std::string name() const override { return "openai:" + config_.chat_model; }

    /// Builds the JSON body for a chat completion request.
    json chat_body(const CompletionRequest& req) const {
        json body{{"model", config_.chat_model},
                  {"messages", json::array({{{"role", "system"}, {"content", req.system_prompt}},
                                            {{"role", "user"}, {"content", req.user_prompt}}})},
                  {"max_tokens", req.max_tokens},
                  {"temperature", req.temperature}};
        if (req.want_top_logprobs > 0) {
            body["logprobs"] = true;
            body["top_logprobs"] = req.want_top_logprobs;
        }
        return body;
    }

    /// Extracts text and first-token alternatives from a chat completion.
    static CompletionResponse parse_chat(const json& j) {
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw ProviderError(ProviderErrorKind::bad_response, "completion has no choices", false);
        const json& choice = j["choices"][0];
        const json& message = choice.value("message", json::object());
        if (message.contains("refusal") && message["refusal"].is_string())
            throw ProviderError(ProviderErrorKind::refusal, "model refused: " + message["refusal"].get<std::string>(),
                                false);
        if (choice.value("finish_reason", std::string()) == "content_filter")
            throw ProviderError(ProviderErrorKind::refusal, "completion blocked by content filter", false);
        CompletionResponse out;
        if (message.contains("content") && message["content"].is_string()) out.text = message["content"];
        if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
            const json& content = lp->value("content", json::array());
            if (content.is_array() && !content.empty())
                for (const auto& alt : content[0].value("top_logprobs", json::array()))
                    out.first_token_alternatives.push_back(
                        {alt.at("token").get<std::string>(), alt.at("logprob").get<double>()});
        }
        return out;
    }

protected:
    CompletionResponse do_complete(const CompletionRequest& req) override {
        const json body = chat_body(req);
        return with_retries(config_.retry, [&] { return parse_chat(post("/chat/completions", body)); });
    }

    EmbeddingVector do_embed(std::string_view text) override {
        const json body{{"model", config_.embedding_model}, {"input", std::string(text)}};
        return with_retries(config_.retry, [&] {
            const json j = post("/embeddings", body);
            try {
                return EmbeddingVector{j.at("data").at(0).at("embedding").get<std::vector<double>>()};
            } catch (const json::exception& e) {
                throw ProviderError(ProviderErrorKind::bad_response, std::string("bad embedding response: ") + e.what(),
                                    false);
            }
        });
    }

private:
    json post(const std::string& path, const json& body) {
        httplib::Client client(origin_);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto res = client.Post(prefix_ + path, headers, body.dump(), "application/json");
        if (!res) {
            const auto err = res.error();
            const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
            throw ProviderError(timed_out ? ProviderErrorKind::timeout : ProviderErrorKind::transport,
                                "request to " + origin_ + prefix_ + path + " failed: " + httplib::to_string(err),
                                true);
        }
        if (res->status == 429 || res->status >= 500)
            throw ProviderError(ProviderErrorKind::transport,
                                "backend returned " + std::to_string(res->status) + ": " + res->body, true);
        if (res->status >= 400)
            throw ProviderError(ProviderErrorKind::refusal,
                                "backend rejected request (" + std::to_string(res->status) + "): " + res->body, false);
        json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded())
            throw ProviderError(ProviderErrorKind::bad_response, "backend returned malformed JSON", false);
        return j;
    }

    OpenAIConfig config_;
    std::string origin_;
    std::string prefix_;
    std::string api_key_;
};

}  // namespace inner_thoughts
