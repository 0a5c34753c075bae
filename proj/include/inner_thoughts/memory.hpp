#pragma once
// Long-term memory and saliency-based stimulus retrieval.
//
//   saliency(x, u) = max(sim(x, u_interp), sim(x, u)) * w_x * d_x
//   d_x            = decay^(t - tau_x)
//
// where tau_x is the timestep at which x was last selected as a stimulus.

#include "inner_thoughts/prompts.hpp"
#include "inner_thoughts/provider.hpp"

#include <cmath>
#include <set>
#include <span>

namespace inner_thoughts {

enum class MemoryKind { objective, knowledge, interest, thought_ref };

NLOHMANN_JSON_SERIALIZE_ENUM(MemoryKind, {{MemoryKind::objective, "objective"},
                                          {MemoryKind::knowledge, "knowledge"},
                                          {MemoryKind::interest, "interest"},
                                          {MemoryKind::thought_ref, "thought-ref"}})

struct MemoryItem {
    std::string id;
    MemoryKind kind = MemoryKind::knowledge;
    std::string text;
    double weight = 1.0;
    Timestep last_accessed = 0;
    EmbeddingVector embedding;
};

inline void to_json(json& j, const MemoryItem& m) {
    j = json{{"id", m.id},
             {"kind", m.kind},
             {"text", m.text},
             {"weight", m.weight},
             {"last_accessed", m.last_accessed}};
}

struct RetrievalHit {
    MemoryItem item;
    double saliency = 0.0;
    double sim_raw = kNegInf;
    double sim_interp = kNegInf;  // -inf when the utterance has no interpretation
    double decay = 1.0;
};

inline void to_json(json& j, const RetrievalHit& h) {
    auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    j = json{{"id", h.item.id},
             {"kind", h.item.kind},
             {"text", h.item.text},
             {"saliency", h.saliency},
             {"sim_raw", finite(h.sim_raw)},
             {"sim_interp", finite(h.sim_interp)},
             {"decay", h.decay}};
}

/// Embeddings of the latest utterance and, when available, its interpretation.
struct UtteranceEmbeddings {
    EmbeddingVector raw;
    std::optional<EmbeddingVector> interp;
};

inline double decay_factor(double rate, Timestep t, Timestep last_accessed) {
    return std::pow(rate, static_cast<double>(std::max<Timestep>(0, t - last_accessed)));
}

/// Saliency of one item against the latest utterance. Negative similarities
/// are floored at zero so saliency stays non-negative.
inline RetrievalHit compute_saliency(const MemoryItem& item, const UtteranceEmbeddings& u, Timestep t,
                                     const ProactivityConfig& cfg) {
    auto sim = [&](const EmbeddingVector& v) {
        try {
            return cosine_similarity(item.embedding, v);
        } catch (const DegenerateVector&) {
            return kNegInf;
        }
    };
    RetrievalHit hit;
    hit.item = item;
    hit.sim_raw = sim(u.raw);
    hit.sim_interp = u.interp ? sim(*u.interp) : kNegInf;
    hit.decay = decay_factor(cfg.saliency_decay, t, item.last_accessed);
    const double best = std::max({hit.sim_interp, hit.sim_raw, 0.0});
    hit.saliency = best * item.weight * hit.decay;
    return hit;
}

/// Items with saliency strictly above cfg.saliency_threshold, most salient
/// first. Selected candidates get last_accessed = t. With an rng and a
/// nonzero creativity_prob, one random below-threshold item may be appended.
inline std::vector<RetrievalHit> retrieve_stimuli(std::span<MemoryItem> candidates, const UtteranceEmbeddings& u,
                                                  Timestep t, const ProactivityConfig& cfg, Rng* rng = nullptr) {
    std::vector<RetrievalHit> hits;
    std::vector<std::size_t> below;
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        RetrievalHit hit = compute_saliency(candidates[i], u, t, cfg);
        if (hit.saliency > cfg.saliency_threshold) {
            hits.push_back(std::move(hit));
            selected.push_back(i);
        } else {
            below.push_back(i);
        }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        return a.saliency > b.saliency;
    });
    if (rng && cfg.creativity_prob > 0.0 && !below.empty() && rng->uniform() < cfg.creativity_prob) {
        const std::size_t pick = below[rng->below(below.size())];
        hits.push_back(compute_saliency(candidates[pick], u, t, cfg));
        selected.push_back(pick);
    }
    for (std::size_t i : selected) candidates[i].last_accessed = t;
    return hits;
}

/// Interpretation of an utterance, computed once and cached on the state.
/// Returns an empty string (and caches nothing) when the provider fails.
inline std::string interpret_utterance(ConversationState& state, std::string_view utterance_id, Provider& provider) {
    const Utterance* u = state.find_utterance(utterance_id);
    if (!u) throw std::out_of_range("unknown utterance: " + std::string(utterance_id));
    if (u->interpretation) return *u->interpretation;

    const std::string name = prompts::speaker_name(state, u->speaker);
    CompletionRequest req;
    req.task = tasks::interpret;
    req.system_prompt = "You are an attentive listener in a group conversation.";
    req.user_prompt = "Conversation so far:\n" + prompts::render_window(state, 12) + prompts::kLatest +
                      prompts::render_utterance(state, *u) + "\n\n" + "Interpret what " + name +
                      " just said in the context of the conversation and what " + name +
                      " might be thinking. Be as succinct as possible and use a single sentence.";
    req.max_tokens = 80;
    req.temperature = 0.3;
    try {
        std::string text = provider.complete(req).text;
        while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
        if (text.empty()) return {};
        state.set_interpretation(utterance_id, text);
        return text;
    } catch (const ProviderError& e) {
        log_warn(std::string("interpretation failed: ") + e.what());
        return {};
    }
}

/// One agent's long-term memory.
class MemoryStore {
public:
    const std::vector<MemoryItem>& items() const noexcept { return items_; }
    std::vector<MemoryItem>& items() noexcept { return items_; }

    MemoryItem* find(std::string_view id) {
        auto it = std::find_if(items_.begin(), items_.end(), [&](const MemoryItem& m) { return m.id == id; });
        return it == items_.end() ? nullptr : &*it;
    }

    /// Adds an item whose id and embedding are already set.
    const MemoryItem& add(MemoryItem item) {
        if (item.id.empty()) item.id = "m" + std::to_string(++counter_);
        if (find(item.id)) throw std::invalid_argument("duplicate memory id: " + item.id);
        if (!(item.weight > 0.0)) throw std::invalid_argument("memory weight must be > 0");
        items_.push_back(std::move(item));
        return items_.back();
    }

    /// Embeds the text and adds the item.
    const MemoryItem& add(MemoryKind kind, std::string text, double weight, Provider& provider, Timestep t = 0,
                          std::string id = {}) {
        MemoryItem m;
        m.id = std::move(id);
        m.kind = kind;
        m.embedding = provider.embed(text);
        m.text = std::move(text);
        m.weight = weight;
        m.last_accessed = t;
        return add(std::move(m));
    }

    bool remove(std::string_view id) {
        return std::erase_if(items_, [&](const MemoryItem& m) { return m.id == id; }) > 0;
    }

    /// Plain {kind, text, weight} array.
    json export_json() const {
        json arr = json::array();
        for (const auto& m : items_) arr.push_back({{"kind", m.kind}, {"text", m.text}, {"weight", m.weight}});
        return arr;
    }

private:
    std::vector<MemoryItem> items_;
    std::size_t counter_ = 0;
};

/// Parses one {kind, text, weight} entry; kind defaults to knowledge, weight to 1.
inline MemoryItem memory_item_from_json(const json& j) {
    MemoryItem m;
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string() || j["text"].get<std::string>().empty())
        throw std::invalid_argument("memory entry needs a nonempty text");
    m.text = j["text"].get<std::string>();
    if (auto k = j.find("kind"); k != j.end()) {
        static const std::set<std::string> known = {"objective", "knowledge", "interest", "thought-ref"};
        if (!k->is_string() || !known.count(k->get<std::string>()))
            throw std::invalid_argument("unknown memory kind");
        m.kind = k->get<MemoryKind>();
    }
    m.weight = j.value("weight", 1.0);
    if (!(m.weight > 0.0)) throw std::invalid_argument("memory weight must be > 0");
    return m;
}

}  // namespace inner_thoughts
