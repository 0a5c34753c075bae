#pragma once
// Turn-taking classification and the reservoir decision process.

#include "inner_thoughts/prompts.hpp"
#include "inner_thoughts/thought.hpp"

#include <concepts>

namespace inner_thoughts {

struct TurnPrediction {
    enum class Kind { open_to_anyone, allocated };
    Kind kind = Kind::open_to_anyone;
    std::string addressee;  // participant id; set iff allocated

    static TurnPrediction open() { return {}; }
    static TurnPrediction to(std::string pid) { return {Kind::allocated, std::move(pid)}; }
    bool is_open() const noexcept { return kind == Kind::open_to_anyone; }
    bool operator==(const TurnPrediction&) const = default;
};

inline void to_json(json& j, const TurnPrediction& p) {
    j = p.is_open() ? json{{"kind", "open_to_anyone"}}
                    : json{{"kind", "allocated"}, {"addressee", p.addressee}};
}

enum class DecisionReason {
    open_motivated,
    open_system1,
    allocated_to_me,
    interrupt,
    none_motivated,
    allocated_elsewhere,
    queue_busy,
    outvoted,     // wanted to speak but another agent won arbitration
    agent_error,  // this agent's cycle failed
};

NLOHMANN_JSON_SERIALIZE_ENUM(DecisionReason, {{DecisionReason::open_motivated, "open_motivated"},
                                              {DecisionReason::open_system1, "open_system1"},
                                              {DecisionReason::allocated_to_me, "allocated_to_me"},
                                              {DecisionReason::interrupt, "interrupt"},
                                              {DecisionReason::none_motivated, "none_motivated"},
                                              {DecisionReason::allocated_elsewhere, "allocated_elsewhere"},
                                              {DecisionReason::queue_busy, "queue_busy"},
                                              {DecisionReason::outvoted, "outvoted"},
                                              {DecisionReason::agent_error, "agent_error"}})

struct Decision {
    enum class Action { speak, silent };
    std::string agent;
    Action action = Action::silent;
    std::optional<std::string> thought;
    std::optional<std::string> articulated_text;
    DecisionReason reason = DecisionReason::none_motivated;
    double score = kNegInf;  // final score of the chosen thought

    bool speaks() const noexcept { return action == Action::speak; }
};

inline void to_json(json& j, const Decision& d) {
    j = json{{"agent", d.agent},
             {"action", d.speaks() ? "speak" : "silent"},
             {"thought", d.thought ? json(*d.thought) : json(nullptr)},
             {"articulated_text", d.articulated_text ? json(*d.articulated_text) : json(nullptr)},
             {"reason", d.reason},
             {"score", std::isfinite(d.score) ? json(d.score) : json(nullptr)}};
}

/// Classifies the next turn as open to anyone or allocated to a named
/// participant, from the last five utterances. Fails open.
inline TurnPrediction classify_turn(const ConversationState& state, Provider& provider) {
    if (state.transcript().empty()) return TurnPrediction::open();
    CompletionRequest req;
    req.task = tasks::classify_turn;
    req.system_prompt = "You predict turn-taking in multi-party conversations.";
    req.user_prompt = "There are " + std::to_string(state.participants.size()) + " speakers in this conversation.\n" +
                      prompts::render_participants(state) + "Last utterances:\n" + prompts::render_window(state, 5) +
                      prompts::kLatest + prompts::render_utterance(state, state.transcript().back()) + "\n\n" +
                      "If the last speaker selected who should speak next (for example by addressing them), answer "
                      "with that speaker's name. If anyone could take the next turn, answer \"anyone\". Answer "
                      "with the name or \"anyone\" only.";
    req.max_tokens = 8;
    req.temperature = 0.0;

    std::string answer;
    try {
        answer = provider.complete(req).text;
    } catch (const ProviderError& e) {
        log_warn(std::string("turn classification failed, treating turn as open: ") + e.what());
        return TurnPrediction::open();
    }
    std::string cleaned;
    for (char c : answer)
        if (!std::ispunct(static_cast<unsigned char>(c)) || c == '-' || c == '_') cleaned.push_back(c);
    while (!cleaned.empty() && std::isspace(static_cast<unsigned char>(cleaned.front()))) cleaned.erase(0, 1);
    while (!cleaned.empty() && std::isspace(static_cast<unsigned char>(cleaned.back()))) cleaned.pop_back();
    auto lower = [](std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    const std::string key = lower(cleaned);
    if (key == "anyone") return TurnPrediction::open();
    for (const auto& p : state.participants)
        if (key == lower(p.name()) || key == lower(p.id)) return TurnPrediction::to(p.id);
    log_warn("turn classifier answered unknown name '" + answer + "', treating turn as open");
    return TurnPrediction::open();
}

/// Uniform draws in [0, 1).
template <typename G>
concept UniformDraw = requires(G g) {
    { g() } -> std::convertible_to<double>;
};

/// One agent's participation decision for the current cycle.
///
/// Candidates are live thoughts scored at timestep t; ties on score go to the
/// most recently created thought. The system-1 fallback only considers
/// thoughts formed in this cycle's batch. A speak decision without a thought
/// (allocated turn, empty reservoir) asks the caller for an acknowledgment.
template <UniformDraw Draw>
Decision decide(const std::string& agent_id, const ProactivityConfig& cfg, const ThoughtReservoir& reservoir,
                const TurnPrediction& prediction, Timestep t, std::uint64_t batch, Draw&& draw) {
    auto better = [](const Thought* a, const Thought* b, double sa, double sb) {
        if (!b) return true;
        if (sa != sb) return sa > sb;
        if (a->created_at != b->created_at) return a->created_at > b->created_at;
        return true;  // later in the reservoir = more recent
    };
    const Thought* best = nullptr;
    double best_score = kNegInf;
    const Thought* best_s1 = nullptr;
    double best_s1_score = kNegInf;
    for (const auto& th : reservoir.thoughts()) {
        if (!th.live()) continue;
        const double s = th.score_at(t);
        if (std::isfinite(s) && better(&th, best, s, best_score)) {
            best = &th;
            best_score = s;
        }
        if (th.system == 1 && th.batch == batch && better(&th, best_s1, s, best_s1_score)) {
            best_s1 = &th;
            best_s1_score = s;
        }
    }

    Decision d;
    d.agent = agent_id;
    auto speak = [&](const Thought* th, double score, DecisionReason why) {
        d.action = Decision::Action::speak;
        if (th) d.thought = th->id;
        d.score = score;
        d.reason = why;
        return d;
    };

    if (prediction.is_open()) {
        if (best && best_score >= cfg.imThreshold) return speak(best, best_score, DecisionReason::open_motivated);
        if (best_s1 && draw() < cfg.system1Prob) return speak(best_s1, best_s1_score, DecisionReason::open_system1);
        d.reason = DecisionReason::none_motivated;
        return d;
    }
    if (prediction.addressee == agent_id) return speak(best, best_score, DecisionReason::allocated_to_me);
    if (best && best_score >= cfg.interruptThreshold) return speak(best, best_score, DecisionReason::interrupt);
    d.reason = DecisionReason::allocated_elsewhere;
    return d;
}

/// Turns a covert thought into an overt message, restyled to sound more
/// forward when proactive_tone is on. Falls back to the thought text.
inline std::string articulate(const Participant& agent, const Thought& thought, const ConversationState& state,
                              bool proactive_tone, Provider& provider) {
    CompletionRequest req;
    req.task = tasks::articulate;
    req.system_prompt = "You are " + agent.name() + ", chatting casually with a group.";
    req.user_prompt = std::string(prompts::kYouAre) + agent.name() + "\n" + prompts::render_persona(agent) +
                      "Conversation so far:\n" + prompts::render_window(state, 12) + prompts::kThought + thought.text +
                      "\n\nYou have decided to say this thought out loud. Write the message you would send to the "
                      "group, in your own voice, as one or two short sentences. Output only the message.";
    req.max_tokens = 120;
    std::string message;
    try {
        message = provider.complete(req).text;
    } catch (const ProviderError& e) {
        log_warn(std::string("articulation failed, sending the raw thought: ") + e.what());
        return thought.text;
    }
    if (message.empty()) message = thought.text;
    if (!proactive_tone) return message;

    CompletionRequest restyle;
    restyle.task = tasks::restyle;
    restyle.system_prompt = req.system_prompt;
    restyle.user_prompt = std::string(prompts::kThought) + message +
                          "\n\nRewrite this message so it sounds more assertive and forward, as someone keen to "
                          "take the floor. Keep the meaning and the length. Output only the message.";
    restyle.max_tokens = 120;
    try {
        std::string styled = provider.complete(restyle).text;
        return styled.empty() ? message : styled;
    } catch (const ProviderError& e) {
        log_warn(std::string("restyle failed: ") + e.what());
        return message;
    }
}

/// Minimal reply when a turn is handed to an agent with nothing in mind.
inline std::string acknowledge(const Participant& agent, const ConversationState& state, Provider& provider) {
    CompletionRequest req;
    req.task = tasks::acknowledge;
    req.system_prompt = "You are " + agent.name() + ", chatting casually with a group.";
    std::string latest;
    if (!state.transcript().empty())
        latest = std::string(prompts::kLatest) + prompts::render_utterance(state, state.transcript().back()) + "\n";
    req.user_prompt = "Conversation so far:\n" + prompts::render_window(state, 5) + latest +
                      "\nYou were just addressed but have nothing particular in mind. Reply with a brief, natural "
                      "acknowledgment. Output only the message.";
    req.max_tokens = 40;
    try {
        std::string text = provider.complete(req).text;
        if (!text.empty()) return text;
    } catch (const ProviderError& e) {
        log_warn(std::string("acknowledgment failed: ") + e.what());
    }
    return "Hmm, let me think about that.";
}

}  // namespace inner_thoughts
