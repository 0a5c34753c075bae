#pragma once
// Core domain types: participants, utterances, the append-only conversation
// state, proactivity settings, clocks and the deterministic RNG.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace inner_thoughts {

using json = nlohmann::json;

/// Conversation clock, counted in utterances. 0 means "before the first message".
using Timestep = std::int64_t;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors

class UnknownParticipant : public std::runtime_error {
public:
    explicit UnknownParticipant(const std::string& id)
        : std::runtime_error("unknown participant: " + id), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class InvalidConfig : public std::runtime_error {
public:
    explicit InvalidConfig(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string out = "invalid config";
        for (const auto& s : p) out += "; " + s;
        return out;
    }
    std::vector<std::string> problems_;
};

// ---------------------------------------------------------------------------
// Logging. Warnings go to stderr unless a sink is installed (tests capture them).

using LogSink = std::function<void(std::string_view level, std::string_view message)>;

inline LogSink& log_sink() {
    static LogSink sink;
    return sink;
}

inline std::mutex& log_mutex() {
    static std::mutex mu;
    return mu;
}

inline void log_message(std::string_view level, std::string_view message) {
    std::lock_guard lock(log_mutex());
    if (auto& sink = log_sink()) {
        sink(level, message);
        return;
    }
    std::clog << "[inner_thoughts] " << level << ": " << message << '\n';
}

inline void log_warn(std::string_view message) { log_message("warn", message); }

// ---------------------------------------------------------------------------
// Deterministic hashing and random numbers

/// FNV-1a; stable across platforms and runs.
inline std::uint64_t stable_hash(std::string_view text, std::uint64_t seed = 0) {
    std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a + 0x9E3779B97F4A7C15ULL + (b << 6) + (b >> 2);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seeded generator whose outputs are identical on every standard library
/// (std::mt19937_64 is fully specified; the distributions are not, so we
/// derive doubles and bounded ints ourselves).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    std::size_t below(std::size_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below(0)");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    double operator()() { return uniform(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Clocks. Wall time is seconds as a double.

class Clock {
public:
    virtual ~Clock() = default;
    virtual double now() const = 0;
};

class SystemClock final : public Clock {
public:
    double now() const override {
        using namespace std::chrono;
        return duration<double>(system_clock::now().time_since_epoch()).count();
    }
};

/// Manually advanced clock for simulations and tests.
class VirtualClock final : public Clock {
public:
    explicit VirtualClock(double start = 0.0) : now_(start) {}
    double now() const override { return now_.load(); }
    void advance(double seconds) { now_.store(now_.load() + seconds); }
    void set(double t) { now_.store(t); }

private:
    std::atomic<double> now_;
};

// ---------------------------------------------------------------------------
// Proactivity

struct ProactivityConfig {
    double system1Prob = 0.1;         // overt proactivity
    double imThreshold = 3.95;        // covert proactivity
    double interruptThreshold = 4.8;
    bool proactiveTone = false;       // tonal proactivity
    int num_system1_thoughts = 1;
    int num_system2_thoughts = 2;
    double saliency_threshold = 0.3;
    double saliency_decay = 0.95;     // lambda in d_x
    double motivation_growth = 1.02;  // lambda in d_p
    double pause_trigger_seconds = 10.0;

    // plumbing knobs
    double creativity_prob = 0.0;     // chance of one random below-threshold stimulus
    int reevaluate_retained = 3;      // K retained thoughts re-scored per cycle
    int max_live_thoughts = 24;
    int eval_window = 12;

    /// Empty when valid.
    std::vector<std::string> problems() const {
        std::vector<std::string> p;
        auto in = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
        if (!in(system1Prob, 0.0, 1.0)) p.emplace_back("system1Prob must be in [0,1]");
        if (!in(imThreshold, 1.0, 5.0)) p.emplace_back("imThreshold must be in [1,5]");
        if (!in(interruptThreshold, 1.0, 5.0)) p.emplace_back("interruptThreshold must be in [1,5]");
        if (imThreshold > interruptThreshold)
            p.emplace_back("imThreshold must not exceed interruptThreshold");
        if (num_system1_thoughts < 0) p.emplace_back("num_system1_thoughts must be >= 0");
        if (num_system2_thoughts < 0) p.emplace_back("num_system2_thoughts must be >= 0");
        if (!std::isfinite(saliency_threshold)) p.emplace_back("saliency_threshold must be finite");
        if (!(saliency_decay > 0.0 && saliency_decay <= 1.0)) p.emplace_back("saliency_decay must be in (0,1]");
        if (!(motivation_growth >= 1.0) || !std::isfinite(motivation_growth))
            p.emplace_back("motivation_growth must be >= 1");
        if (!(pause_trigger_seconds > 0.0)) p.emplace_back("pause_trigger_seconds must be > 0");
        if (!in(creativity_prob, 0.0, 1.0)) p.emplace_back("creativity_prob must be in [0,1]");
        if (reevaluate_retained < 0) p.emplace_back("reevaluate_retained must be >= 0");
        if (max_live_thoughts < 1) p.emplace_back("max_live_thoughts must be >= 1");
        if (eval_window < 1) p.emplace_back("eval_window must be >= 1");
        return p;
    }

    void validate() const {
        if (auto p = problems(); !p.empty()) throw InvalidConfig(std::move(p));
    }
};

inline void to_json(json& j, const ProactivityConfig& c) {
    j = json{{"system1Prob", c.system1Prob},
             {"imThreshold", c.imThreshold},
             {"interruptThreshold", c.interruptThreshold},
             {"proactiveTone", c.proactiveTone},
             {"num_system1_thoughts", c.num_system1_thoughts},
             {"num_system2_thoughts", c.num_system2_thoughts},
             {"saliency_threshold", c.saliency_threshold},
             {"saliency_decay", c.saliency_decay},
             {"motivation_growth", c.motivation_growth},
             {"pause_trigger_seconds", c.pause_trigger_seconds},
             {"creativity_prob", c.creativity_prob},
             {"reevaluate_retained", c.reevaluate_retained},
             {"max_live_thoughts", c.max_live_thoughts},
             {"eval_window", c.eval_window}};
}

/// Partial objects overlay the current values, so a settings PUT may carry
/// just the fields being changed.
inline void from_json(const json& j, ProactivityConfig& c) {
    auto get = [&](const char* key, auto& field) {
        if (auto it = j.find(key); it != j.end() && !it->is_null()) it->get_to(field);
    };
    get("system1Prob", c.system1Prob);
    get("imThreshold", c.imThreshold);
    get("interruptThreshold", c.interruptThreshold);
    get("proactiveTone", c.proactiveTone);
    get("num_system1_thoughts", c.num_system1_thoughts);
    get("num_system2_thoughts", c.num_system2_thoughts);
    get("saliency_threshold", c.saliency_threshold);
    get("saliency_decay", c.saliency_decay);
    get("motivation_growth", c.motivation_growth);
    get("pause_trigger_seconds", c.pause_trigger_seconds);
    get("creativity_prob", c.creativity_prob);
    get("reevaluate_retained", c.reevaluate_retained);
    get("max_live_thoughts", c.max_live_thoughts);
    get("eval_window", c.eval_window);
}

// ---------------------------------------------------------------------------
// Conversation

struct Utterance {
    std::string id;
    std::string speaker;
    std::string text;
    Timestep timestep = 0;
    double wall_time = 0.0;
    std::optional<std::string> interpretation;
};

inline void to_json(json& j, const Utterance& u) {
    j = json{{"id", u.id},
             {"speaker", u.speaker},
             {"text", u.text},
             {"timestep", u.timestep},
             {"wall_time", u.wall_time},
             {"interpretation", u.interpretation ? json(*u.interpretation) : json(nullptr)}};
}

enum class ParticipantKind { human, agent };

NLOHMANN_JSON_SERIALIZE_ENUM(ParticipantKind, {{ParticipantKind::human, "human"},
                                               {ParticipantKind::agent, "agent"}})

struct Participant {
    std::string id;
    std::string display_name;
    ParticipantKind kind = ParticipantKind::agent;
    std::vector<std::string> persona;
    std::optional<ProactivityConfig> proactivity;  // agents only
    Timestep last_spoke_at = 0;

    bool is_agent() const noexcept { return kind == ParticipantKind::agent; }
    const std::string& name() const noexcept { return display_name.empty() ? id : display_name; }
};

inline void to_json(json& j, const Participant& p) {
    j = json{{"id", p.id},
             {"display_name", p.display_name},
             {"kind", p.kind},
             {"persona", p.persona},
             {"last_spoke_at", p.last_spoke_at}};
    if (p.proactivity) j["proactivity"] = *p.proactivity;
}

class ConversationState {
public:
    std::string id;
    std::vector<Participant> participants;
    std::uint64_t rng_seed = 0;
    /// Prepended to generated utterance ids so several conversations can share a namespace.
    std::string id_prefix;

    const std::vector<Utterance>& transcript() const noexcept { return transcript_; }
    Timestep current_timestep() const noexcept {
        return transcript_.empty() ? 0 : transcript_.back().timestep;
    }

    void add_participant(Participant p) {
        if (find_participant(p.id)) throw std::invalid_argument("duplicate participant id: " + p.id);
        if (p.kind == ParticipantKind::human) p.proactivity.reset();
        participants.push_back(std::move(p));
    }

    Participant* find_participant(std::string_view pid) {
        auto it = std::find_if(participants.begin(), participants.end(),
                               [&](const Participant& p) { return p.id == pid; });
        return it == participants.end() ? nullptr : &*it;
    }
    const Participant* find_participant(std::string_view pid) const {
        return const_cast<ConversationState*>(this)->find_participant(pid);
    }
    const Participant& participant(std::string_view pid) const {
        if (auto* p = find_participant(pid)) return *p;
        throw UnknownParticipant(std::string(pid));
    }

    const Utterance* find_utterance(std::string_view uid) const {
        auto it = std::find_if(transcript_.begin(), transcript_.end(),
                               [&](const Utterance& u) { return u.id == uid; });
        return it == transcript_.end() ? nullptr : &*it;
    }

    /// Last n utterances, oldest first.
    std::span<const Utterance> window(std::size_t n) const {
        const std::size_t k = std::min(n, transcript_.size());
        return std::span<const Utterance>(transcript_).subspan(transcript_.size() - k, k);
    }

    /// Appends the next utterance. The only way the transcript grows.
    const Utterance& append_utterance(std::string_view speaker, std::string text, double wall_time = 0.0) {
        Participant* p = find_participant(speaker);
        if (!p) throw UnknownParticipant(std::string(speaker));
        Utterance u;
        u.timestep = current_timestep() + 1;
        u.id = id_prefix + "u" + std::to_string(u.timestep);
        u.speaker = p->id;
        u.text = std::move(text);
        u.wall_time = wall_time;
        p->last_spoke_at = u.timestep;
        transcript_.push_back(std::move(u));
        return transcript_.back();
    }

    /// Fills an utterance's interpretation. Returns false if it was already set.
    bool set_interpretation(std::string_view uid, std::string text) {
        auto it = std::find_if(transcript_.begin(), transcript_.end(),
                               [&](const Utterance& u) { return u.id == uid; });
        if (it == transcript_.end()) throw std::out_of_range("unknown utterance: " + std::string(uid));
        if (it->interpretation) return false;
        it->interpretation = std::move(text);
        return true;
    }

private:
    std::vector<Utterance> transcript_;
};

inline void to_json(json& j, const ConversationState& s) {
    j = json{{"id", s.id},
             {"participants", s.participants},
             {"transcript", s.transcript()},
             {"current_timestep", s.current_timestep()},
             {"rng_seed", s.rng_seed}};
}

/// Free-function form used by callers that hold the state by reference.
inline const Utterance& append_utterance(ConversationState& state, std::string_view speaker,
                                         std::string text, double wall_time = 0.0) {
    return state.append_utterance(speaker, std::move(text), wall_time);
}

}  // namespace inner_thoughts
