#pragma once
// Thoughts, their motivation scores, and the per-agent thought reservoir.

#include "inner_thoughts/provider.hpp"

#include <array>
#include <numeric>

namespace inner_thoughts {

/// Probability mass over ratings 1..5.
struct RatingDistribution {
    std::array<double, 5> mass{};  // mass[s - 1] = p(s)

    double p(int rating) const { return mass.at(static_cast<std::size_t>(rating - 1)); }
    double total() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }
    /// Probability-weighted mean rating.
    double expected() const {
        double s = 0.0;
        for (int r = 1; r <= 5; ++r) s += mass[r - 1] * r;
        return s;
    }
    static RatingDistribution point(int rating) {
        RatingDistribution d;
        d.mass.at(static_cast<std::size_t>(rating - 1)) = 1.0;
        return d;
    }
};

inline void to_json(json& j, const RatingDistribution& d) {
    j = json::object();
    for (int r = 1; r <= 5; ++r)
        if (d.mass[r - 1] > 0.0) j[std::to_string(r)] = d.mass[r - 1];
}

struct Factor {
    std::string criterion;
    std::string reason;
    bool operator==(const Factor&) const = default;
};

inline void to_json(json& j, const Factor& f) { j = json{{"criterion", f.criterion}, {"reason", f.reason}}; }

struct MotivationScore {
    double raw = 0.0;             // in [1, 5]
    double silence_factor = 1.0;  // growth^(t - tau_p)
    double final = 0.0;           // raw * silence_factor, uncapped
    RatingDistribution distribution;
    std::vector<Factor> positive_factors;  // at most two
    std::vector<Factor> negative_factors;  // at most two
    Timestep evaluated_at = 0;
};

inline void to_json(json& j, const MotivationScore& s) {
    j = json{{"raw", s.raw},
             {"silence_factor", s.silence_factor},
             {"final", s.final},
             {"distribution", s.distribution},
             {"positive_factors", s.positive_factors},
             {"negative_factors", s.negative_factors},
             {"evaluated_at", s.evaluated_at}};
}

struct StimulusRef {
    enum class Kind { utterance, memory, thought, pause };
    Kind kind = Kind::utterance;
    std::string id;
    bool operator==(const StimulusRef&) const = default;
};

NLOHMANN_JSON_SERIALIZE_ENUM(StimulusRef::Kind, {{StimulusRef::Kind::utterance, "utterance"},
                                                 {StimulusRef::Kind::memory, "memory"},
                                                 {StimulusRef::Kind::thought, "thought"},
                                                 {StimulusRef::Kind::pause, "pause"}})

inline void to_json(json& j, const StimulusRef& s) { j = json{{"kind", s.kind}, {"id", s.id}}; }

enum class ThoughtState { fresh, retained, expressed, discarded };

NLOHMANN_JSON_SERIALIZE_ENUM(ThoughtState, {{ThoughtState::fresh, "fresh"},
                                            {ThoughtState::retained, "retained"},
                                            {ThoughtState::expressed, "expressed"},
                                            {ThoughtState::discarded, "discarded"}})

struct Thought {
    std::string id;
    std::string owner;
    std::string text;
    int system = 2;
    std::vector<StimulusRef> stimuli;
    Timestep created_at = 0;
    std::uint64_t batch = 0;  // sequence number of the trigger that formed it
    double saliency_at_creation = 0.0;
    std::optional<MotivationScore> evaluation;
    ThoughtState state = ThoughtState::fresh;
    std::optional<Timestep> expressed_at;

    // retrieval bookkeeping: thoughts compete with memories as stimuli
    EmbeddingVector embedding;
    Timestep last_accessed = 0;

    bool live() const noexcept { return state == ThoughtState::fresh || state == ThoughtState::retained; }
    double score() const noexcept { return evaluation ? evaluation->final : kNegInf; }
    /// Score if it was evaluated at timestep t, otherwise -inf.
    double score_at(Timestep t) const noexcept {
        return evaluation && evaluation->evaluated_at == t ? evaluation->final : kNegInf;
    }
};

inline void to_json(json& j, const Thought& t) {
    j = json{{"id", t.id},
             {"owner", t.owner},
             {"text", t.text},
             {"system", t.system},
             {"stimuli", t.stimuli},
             {"created_at", t.created_at},
             {"batch", t.batch},
             {"saliency_at_creation", t.saliency_at_creation},
             {"state", t.state},
             {"evaluation", t.evaluation ? json(*t.evaluation) : json(nullptr)},
             {"expressed_at", t.expressed_at ? json(*t.expressed_at) : json(nullptr)}};
}

class ThoughtReservoir {
public:
    std::string owner;

    ThoughtReservoir() = default;
    explicit ThoughtReservoir(std::string owner_id) : owner(std::move(owner_id)) {}

    const std::vector<Thought>& thoughts() const noexcept { return thoughts_; }
    std::vector<Thought>& thoughts() noexcept { return thoughts_; }

    Thought* find(std::string_view id) {
        auto it = std::find_if(thoughts_.begin(), thoughts_.end(), [&](const Thought& t) { return t.id == id; });
        return it == thoughts_.end() ? nullptr : &*it;
    }
    const Thought* find(std::string_view id) const { return const_cast<ThoughtReservoir*>(this)->find(id); }

    Thought& add(Thought t) {
        t.owner = owner;
        thoughts_.push_back(std::move(t));
        return thoughts_.back();
    }

    std::size_t live_count() const {
        return static_cast<std::size_t>(std::count_if(thoughts_.begin(), thoughts_.end(), [](const Thought& t) { return t.live(); }));
    }

    /// Marks a live thought expressed. At most one expression per cycle.
    void mark_expressed(std::string_view id, Timestep t, std::uint64_t cycle) {
        Thought* th = find(id);
        if (!th) throw std::out_of_range("unknown thought: " + std::string(id));
        if (!th->live()) throw std::logic_error("thought is not live: " + std::string(id));
        if (last_expressed_cycle_ && *last_expressed_cycle_ == cycle)
            throw std::logic_error("agent already expressed a thought this cycle");
        th->state = ThoughtState::expressed;
        th->expressed_at = t;
        last_expressed_cycle_ = cycle;
    }

    /// End of cycle: surviving fresh thoughts become retained.
    void retain_fresh() {
        for (auto& t : thoughts_)
            if (t.state == ThoughtState::fresh) t.state = ThoughtState::retained;
    }

private:
    std::vector<Thought> thoughts_;
    std::optional<std::uint64_t> last_expressed_cycle_;
};

/// Discards the lowest-scored live thoughts (older first on ties) until at
/// most max_live remain. Expressed thoughts are kept for provenance.
/// Returns the ids discarded, in discard order.
inline std::vector<std::string> prune_reservoir(ThoughtReservoir& reservoir, std::size_t max_live = 24) {
    if (max_live < 1) throw std::invalid_argument("max_live must be >= 1");
    auto& all = reservoir.thoughts();
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i].live()) live.push_back(i);
    if (live.size() <= max_live) return {};
    std::stable_sort(live.begin(), live.end(), [&](std::size_t a, std::size_t b) {
        if (all[a].score() != all[b].score()) return all[a].score() < all[b].score();
        return all[a].created_at < all[b].created_at;
    });
    std::vector<std::string> discarded;
    for (std::size_t k = 0; k < live.size() - max_live; ++k) {
        all[live[k]].state = ThoughtState::discarded;
        discarded.push_back(all[live[k]].id);
    }
    return discarded;
}

}  // namespace inner_thoughts
