#pragma once
// Deterministic in-process provider for tests, simulations and demos.
//
// Completions come from, in order: injected failures, scripted rules, and
// (when enabled) a synthetic responder that derives plausible answers from
// the labeled prompt lines. Embeddings are hashed bag-of-words unit vectors
// with an override table for tests that need exact similarities.

#include "inner_thoughts/prompts.hpp"
#include "inner_thoughts/provider.hpp"

#include <cctype>
#include <deque>
#include <map>
#include <mutex>
#include <regex>
#include <set>

namespace inner_thoughts {

/// A response with a first-token distribution over rating digits.
inline CompletionResponse rating_response(std::string text,
                                          std::vector<std::pair<std::string, double>> probs) {
    CompletionResponse r;
    r.text = std::move(text);
    for (auto& [tok, p] : probs) r.first_token_alternatives.push_back({tok, std::log(p)});
    return r;
}

class MockProvider final : public Provider {
public:
    static constexpr std::size_t kDefaultDim = 256;

    explicit MockProvider(std::uint64_t seed = 0, std::size_t dim = kDefaultDim) : seed_(seed), dim_(dim) {}

    std::string name() const override { return "mock"; }

    // -- scripting ---------------------------------------------------------

    /// Queue a response for requests whose task matches (empty = any) and whose
    /// prompts contain `contains` (empty = any). Consumed once.
    MockProvider& script(std::string task, std::string contains, CompletionResponse response) {
        std::lock_guard lock(mu_);
        rules_.push_back({std::move(task), std::move(contains), {std::move(response)}, false});
        return *this;
    }
    MockProvider& script(std::string task, std::string contains, std::string text) {
        return script(std::move(task), std::move(contains), CompletionResponse{std::move(text), {}});
    }
    /// Like script(), but the response is returned for every matching call.
    MockProvider& always(std::string task, std::string contains, CompletionResponse response) {
        std::lock_guard lock(mu_);
        rules_.push_back({std::move(task), std::move(contains), {std::move(response)}, true});
        return *this;
    }
    MockProvider& always(std::string task, std::string contains, std::string text) {
        return always(std::move(task), std::move(contains), CompletionResponse{std::move(text), {}});
    }

    /// Make matching calls throw. times < 0 means forever.
    MockProvider& fail(std::string task, ProviderErrorKind kind = ProviderErrorKind::transport,
                       bool retryable = true, int times = -1) {
        std::lock_guard lock(mu_);
        failures_.push_back({std::move(task), kind, retryable, times});
        return *this;
    }

    /// Every completion and embedding call fails with a retryable transport error.
    void set_offline(bool offline) {
        std::lock_guard lock(mu_);
        offline_ = offline;
    }

    /// Fall back to synthetic answers instead of ScriptMiss.
    MockProvider& enable_synthetic(bool on = true) {
        std::lock_guard lock(mu_);
        synthetic_ = on;
        return *this;
    }

    /// Pin the embedding of an exact text. Shorter vectors are zero-padded.
    MockProvider& set_embedding(std::string text, std::vector<double> values) {
        if (values.size() > dim_) throw std::invalid_argument("override longer than embedding dimension");
        values.resize(dim_, 0.0);
        std::lock_guard lock(mu_);
        overrides_[std::move(text)] = std::move(values);
        return *this;
    }

    // -- inspection --------------------------------------------------------

    std::vector<CompletionRequest> calls() const {
        std::lock_guard lock(mu_);
        return calls_;
    }
    std::size_t call_count(std::string_view task = {}) const {
        std::lock_guard lock(mu_);
        if (task.empty()) return calls_.size();
        return static_cast<std::size_t>(
            std::count_if(calls_.begin(), calls_.end(), [&](const CompletionRequest& r) { return r.task == task; }));
    }
    std::size_t embed_count() const {
        std::lock_guard lock(mu_);
        return embed_calls_;
    }
    std::size_t dim() const noexcept { return dim_; }

protected:
    CompletionResponse do_complete(const CompletionRequest& req) override {
        std::unique_lock lock(mu_);
        calls_.push_back(req);
        if (offline_) throw ProviderError(ProviderErrorKind::transport, "mock offline", true);
        for (auto& f : failures_) {
            if (f.times == 0 || !(f.task.empty() || f.task == req.task)) continue;
            if (f.times > 0) --f.times;
            throw ProviderError(f.kind, "injected failure for " + req.task, f.retryable);
        }
        for (auto& rule : rules_) {
            if (rule.responses.empty()) continue;
            if (!rule.task.empty() && rule.task != req.task) continue;
            if (!rule.contains.empty() && req.user_prompt.find(rule.contains) == std::string::npos &&
                req.system_prompt.find(rule.contains) == std::string::npos)
                continue;
            CompletionResponse r = rule.responses.front();
            if (!rule.sticky) rule.responses.pop_front();
            return r;
        }
        if (!synthetic_)
            throw ProviderError(ProviderErrorKind::script_miss, "no scripted response for task " + req.task, false);
        lock.unlock();
        return synthesize(req);
    }

    EmbeddingVector do_embed(std::string_view text) override {
        std::lock_guard lock(mu_);
        ++embed_calls_;
        if (offline_) throw ProviderError(ProviderErrorKind::transport, "mock offline", true);
        if (auto it = overrides_.find(std::string(text)); it != overrides_.end()) return {it->second};
        return hashed_embedding(text);
    }

private:
    struct Rule {
        std::string task;
        std::string contains;
        std::deque<CompletionResponse> responses;
        bool sticky;
    };
    struct Failure {
        std::string task;
        ProviderErrorKind kind;
        bool retryable;
        int times;
    };

    static std::vector<std::string> tokens(std::string_view text) {
        static const std::set<std::string> stop = {
            "a",    "an",   "the",  "i",    "you",  "to",   "of",  "and",  "is",   "it",   "that", "in",
            "my",   "me",   "we",   "be",   "do",   "so",   "for", "on",   "with", "what", "about", "was",
            "are",  "have", "just", "this", "too",  "at",   "or",  "but",  "if",   "i'm",  "im",   "should",
            "would", "could", "maybe", "they", "their", "its", "it's", "there"};
        std::vector<std::string> out;
        std::string cur;
        auto flush = [&] {
            if (!cur.empty() && !stop.count(cur)) out.push_back(cur);
            cur.clear();
        };
        for (char c : text) {
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'')
                cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            else
                flush();
        }
        flush();
        return out;
    }

    EmbeddingVector hashed_embedding(std::string_view text) const {
        std::vector<double> v(dim_, 0.0);
        auto toks = tokens(text);
        if (toks.empty()) toks.emplace_back(text);
        for (const auto& t : toks) {
            const std::uint64_t h = stable_hash(t, seed_);
            v[h % dim_] += (h >> 63) ? 1.0 : -1.0;
        }
        // faint whole-text component keeps distinct texts distinct
        const std::uint64_t h = stable_hash(text, seed_ + 1);
        v[h % dim_] += 0.05;
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return {std::move(v)};
    }

    // -- synthetic responder ------------------------------------------------

    std::uint64_t h(const CompletionRequest& req, std::string_view salt = {}) const {
        return stable_hash(std::string(salt) + req.task + "\x1f" + req.user_prompt, seed_);
    }

    static std::vector<std::string> split_names(std::string csv) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : csv) {
            if (c == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else if (!(c == ' ' && cur.empty())) {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    }

    struct Latest {
        std::string id, speaker, text;
    };
    static Latest parse_latest(const std::string& prompt) {
        static const std::regex re(R"(^\[([^\]]+)\]\s*([^:]*):\s?(.*)$)");
        Latest l;
        std::smatch m;
        const std::string line = prompts::find_labeled(prompt, prompts::kLatest);
        if (std::regex_match(line, m, re)) {
            l.id = m[1];
            l.speaker = m[2];
            l.text = m[3];
        } else {
            l.text = line;
        }
        return l;
    }

    /// First n distinct content words, skipping the responder's own phrasing
    /// so topics don't drift into "mention mention".
    static std::string topic_words(const std::string& text, std::size_t n) {
        static const std::set<std::string> filler = {
            "mention", "wonder",  "everyone", "thinks", "relates", "ask",   "follow", "up",      "share",
            "experience", "can",  "oh",       "nice",   "like",    "hmm",   "sure",   "not",     "honestly",
            "interesting", "tell", "more",    "sounds", "fun",     "ha",    "relate", "speaking", "been",
            "lately", "hey",      "all",      "any",    "how",     "has",   "does",   "anyone",  "perhaps",
            "quiet",  "while",    "suggest",  "new",    "topic",   "good",  "question", "let",   "think",
            "second", "am",       "some",     "really", "one",     "did",   "kind",   "doing",   "today"};
        std::vector<std::string> picked;
        for (const auto& t : tokens(text)) {
            if (picked.size() >= n) break;
            if (filler.count(t) || std::find(picked.begin(), picked.end(), t) != picked.end()) continue;
            picked.push_back(t);
        }
        std::string out;
        for (std::size_t i = 0; i < picked.size(); ++i) out += (i ? " " : "") + picked[i];
        return out.empty() ? "that" : out;
    }

    static bool mentions(const std::string& text, const std::string& name) {
        for (std::size_t pos = text.find(name); pos != std::string::npos; pos = text.find(name, pos + 1)) {
            const bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]));
            const std::size_t end = pos + name.size();
            const bool right = end >= text.size() || !std::isalnum(static_cast<unsigned char>(text[end]));
            if (left && right) return true;
        }
        return false;
    }

    CompletionResponse synthesize(const CompletionRequest& req) const {
        const std::string& p = req.user_prompt;
        const Latest latest = parse_latest(p);
        const std::string about = topic_words(latest.text, 3);

        if (req.task == tasks::interpret) {
            return {latest.speaker + " is sharing something about " + about + ".", {}};
        }
        if (req.task == tasks::system1) {
            static const char* reactions[] = {"That sounds fun!", "Interesting, tell me more.",
                                              "Ha, I can relate to that.", "Oh nice, I like that.",
                                              "Hmm, I am not sure about that."};
            std::string text = latest.id.empty() || latest.id[0] == 'p' || latest.id.find(".p") != std::string::npos
                                   ? "It has been quiet for a while, perhaps I should suggest a new topic."
                                   : reactions[h(req) % 5];
            json arr = json::array({{{"text", text}, {"stimuli", json::array({latest.id})}}});
            return {arr.dump(), {}};
        }
        if (req.task == tasks::system2) {
            const int n = std::max(0, std::atoi(prompts::find_labeled(p, prompts::kCount).c_str()));
            const auto stimuli = prompts::find_block(p, prompts::kStimuli);
            json arr = json::array();
            for (int i = 0; i < n; ++i) {
                const std::uint64_t k = h(req, std::to_string(i));
                if (!stimuli.empty() && (k % 4) != 0) {
                    const std::string& s = stimuli[k % stimuli.size()];
                    const std::size_t close = s.find(']');
                    const std::string sid = s.substr(1, close - 1);
                    const std::string body = close + 2 <= s.size() ? s.substr(close + 2) : s;
                    arr.push_back({{"text", "I should mention that " + topic_words(body, 5) + " relates to " + about},
                                   {"stimuli", json::array({sid, latest.id})}});
                } else {
                    static const char* openers[] = {"I wonder what everyone thinks about ",
                                                    "I could ask a follow-up about ",
                                                    "Maybe I can share my experience with "};
                    arr.push_back({{"text", openers[k % 3] + about}, {"stimuli", json::array({latest.id})}});
                }
            }
            return {arr.dump(2), {}};
        }
        if (req.task == tasks::evaluate) {
            static const int ratings[] = {1, 2, 3, 3, 4, 4, 4, 5, 5, 2};
            static const char* crit[] = {"Relevance", "Information Gap", "Expected Impact", "Urgency",
                                         "Coherence", "Originality",     "Balance",         "Dynamics"};
            const std::uint64_t k = h(req);
            const int r = ratings[k % 10];
            std::ostringstream out;
            out << "Positive factors:\n"
                << "1. " << crit[k % 8] << ": it builds on what was just said.\n"
                << "2. " << crit[(k / 8 + 1) % 8] << ": it would move the conversation along.\n"
                << "Negative factors:\n"
                << "1. " << crit[(k / 64 + 2) % 8] << ": others may want to speak first.\n"
                << "2. " << crit[(k / 512 + 3) % 8] << ": it may not add much right now.\n"
                << "Rating: " << r << "\n";
            return {out.str(), {}};
        }
        if (req.task == tasks::rate) {
            int r = 3;
            static const std::regex rating_re(R"(Rating:\s*([1-5]))");
            for (std::sregex_iterator it(p.begin(), p.end(), rating_re), end; it != end; ++it)
                r = std::stoi((*it)[1]);
            const int up = r < 5 ? r + 1 : r - 1;
            const int down = r > 1 ? r - 1 : r + 1;
            CompletionResponse resp;
            resp.text = std::to_string(r);
            resp.first_token_alternatives = {{std::to_string(r), std::log(0.6)},
                                             {std::to_string(up), std::log(0.25)},
                                             {std::to_string(down), std::log(0.1)},
                                             {"The", std::log(0.05)}};
            return resp;
        }
        if (req.task == tasks::classify_turn) {
            if (latest.text.find('?') != std::string::npos) {
                for (const auto& name : split_names(prompts::find_labeled(p, prompts::kParticipants)))
                    if (name != latest.speaker && mentions(latest.text, name)) return {name, {}};
            }
            return {"anyone", {}};
        }
        if (req.task == tasks::articulate) {
            return {prompts::find_labeled(p, prompts::kThought), {}};
        }
        if (req.task == tasks::restyle) {
            return {"Honestly, " + prompts::find_labeled(p, prompts::kThought), {}};
        }
        if (req.task == tasks::acknowledge) {
            return {"Good question, let me think about that for a second.", {}};
        }
        if (req.task == tasks::next_speaker) {
            auto names = split_names(prompts::find_labeled(p, prompts::kParticipants));
            std::erase(names, latest.speaker);
            if (names.empty()) return {latest.speaker, {}};
            return {names[h(req) % names.size()], {}};
        }
        if (req.task == tasks::persona_reply) {
            const auto persona = prompts::find_block(p, prompts::kPersona);
            std::string line = persona.empty() ? "I am not sure what to add" : persona[h(req) % persona.size()];
            return {"Speaking of " + about + ", " + line, {}};
        }
        throw ProviderError(ProviderErrorKind::script_miss, "synthetic responder has no rule for " + req.task, false);
    }

    mutable std::mutex mu_;
    std::uint64_t seed_;
    std::size_t dim_;
    bool synthetic_ = false;
    bool offline_ = false;
    std::vector<Rule> rules_;
    std::vector<Failure> failures_;
    std::map<std::string, std::vector<double>> overrides_;
    std::vector<CompletionRequest> calls_;
    std::size_t embed_calls_ = 0;
};

}  // namespace inner_thoughts
