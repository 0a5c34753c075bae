#pragma once
// Thought formation.
//
// System 1 forms quick reactions to the latest utterances; system 2 forms
// deliberate thoughts from retrieved stimuli. Both ask the model for a JSON
// array of {text, stimuli: [ids]} and attach provenance to every thought.

#include "inner_thoughts/memory.hpp"
#include "inner_thoughts/thought.hpp"

#include <regex>

namespace inner_thoughts {

/// What started the current cognition cycle, as seen by formation.
struct TriggerContext {
    bool pause = false;
    std::string utterance_id;  // the new message, or the latest utterance for a pause
    double silence_seconds = 0.0;
    Timestep timestep = 0;
    std::uint64_t batch = 0;

    StimulusRef origin() const {
        if (pause) return {StimulusRef::Kind::pause, "p" + std::to_string(timestep)};
        return {StimulusRef::Kind::utterance, utterance_id};
    }
    std::string pause_text() const {
        return "«silence for " + std::to_string(static_cast<long long>(std::lround(silence_seconds))) +
               " seconds»";
    }
};

/// Maps a cited id to the kind of item it names, or nullopt if nothing matches.
using StimulusResolver = std::function<std::optional<StimulusRef::Kind>(std::string_view id)>;
using IdGenerator = std::function<std::string()>;

struct DraftThought {
    std::string text;
    std::vector<std::string> stimuli;
};

/// Lenient parse of a formation response: strips code fences, repairs
/// trailing commas, and falls back to one thought per non-empty line.
inline std::vector<DraftThought> parse_thought_drafts(std::string_view response) {
    std::string body(response);
    static const std::regex fence(R"(```[a-zA-Z]*)");
    body = std::regex_replace(body, fence, "");

    std::vector<DraftThought> out;
    const auto open = body.find('[');
    const auto close = body.rfind(']');
    if (open != std::string::npos && close != std::string::npos && close > open) {
        static const std::regex trailing(R"(,\s*([\]\}]))");
        std::string arr = std::regex_replace(body.substr(open, close - open + 1), trailing, "$1");
        json parsed = json::parse(arr, nullptr, /*allow_exceptions=*/false);
        if (parsed.is_array()) {
            for (const auto& el : parsed) {
                DraftThought d;
                if (el.is_string()) {
                    d.text = el.get<std::string>();
                } else if (el.is_object() && el.contains("text") && el["text"].is_string()) {
                    d.text = el["text"].get<std::string>();
                    if (auto s = el.find("stimuli"); s != el.end()) {
                        if (s->is_string()) d.stimuli.push_back(s->get<std::string>());
                        if (s->is_array())
                            for (const auto& id : *s)
                                if (id.is_string()) d.stimuli.push_back(id.get<std::string>());
                    }
                }
                if (!d.text.empty()) out.push_back(std::move(d));
            }
            return out;
        }
    }

    log_warn("formation response was not a JSON array; falling back to lines");
    std::istringstream in(body);
    std::string line;
    static const std::regex bullet(R"(^\s*(?:[-*•]|\d+[.)])\s*)");
    while (std::getline(in, line)) {
        line = std::regex_replace(line, bullet, "");
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
        if (!line.empty() && line != "[" && line != "]") out.push_back({line, {}});
    }
    return out;
}

namespace detail {

inline std::string strip_id(std::string id) {
    while (!id.empty() && (id.front() == '[' || std::isspace(static_cast<unsigned char>(id.front())))) id.erase(0, 1);
    while (!id.empty() && (id.back() == ']' || std::isspace(static_cast<unsigned char>(id.back())))) id.pop_back();
    return id;
}

inline std::string agent_header(const Participant& agent, const ConversationState& state) {
    return std::string(prompts::kYouAre) + agent.name() + "\n" + prompts::render_participants(state) +
           prompts::render_persona(agent);
}

inline std::string latest_line(const ConversationState& state, const TriggerContext& trigger) {
    if (trigger.pause) return std::string(prompts::kLatest) + "[" + trigger.origin().id + "] " + trigger.pause_text() + "\n";
    if (const Utterance* u = state.find_utterance(trigger.utterance_id))
        return std::string(prompts::kLatest) + prompts::render_utterance(state, *u) + "\n";
    return {};
}

inline std::vector<DraftThought> request_drafts(Provider& provider, CompletionRequest req) {
    try {
        return parse_thought_drafts(provider.complete(req).text);
    } catch (const ProviderError& e) {
        log_warn(std::string("thought formation failed: ") + e.what());
        return {};
    }
}

inline void embed_thought(Thought& t, Provider& provider) {
    try {
        t.embedding = provider.embed(t.text);
    } catch (const ProviderError& e) {
        log_warn(std::string("thought embedding failed: ") + e.what());
    }
}

}  // namespace detail

/// Quick reactions to the latest utterance (or to a pause). Every system 1
/// thought cites exactly the trigger as its stimulus.
inline std::vector<Thought> form_system1(const Participant& agent, const ConversationState& state,
                                         const TriggerContext& trigger, int n, Provider& provider,
                                         const IdGenerator& next_id) {
    if (n <= 0) return {};
    CompletionRequest req;
    req.task = tasks::system1;
    req.system_prompt = "You are " + agent.name() +
                        ", taking part in a casual group chat. You have an inner voice that reacts to what is said.";
    req.user_prompt = detail::agent_header(agent, state) + "Conversation so far:\n" + prompts::render_window(state, 5) +
                      detail::latest_line(state, trigger) + prompts::kCount + std::to_string(n) + "\n\n" +
                      "Form " + std::to_string(n) +
                      " succinct, spontaneous thought(s) reacting to the last utterances, such as an acknowledgment "
                      "or an expression of interest" +
                      (trigger.pause ? " (nobody has spoken for a while; you might re-engage the group)" : "") +
                      ". Keep each under 15 words.\nRespond with a JSON array of objects {\"text\": string, "
                      "\"stimuli\": [\"" + trigger.origin().id + "\"]}.";
    req.max_tokens = 200;
    req.temperature = 0.9;

    std::vector<Thought> out;
    for (auto& d : detail::request_drafts(provider, req)) {
        if (static_cast<int>(out.size()) >= n) break;
        Thought t;
        t.id = next_id();
        t.owner = agent.id;
        t.text = std::move(d.text);
        t.system = 1;
        t.stimuli = {trigger.origin()};
        t.created_at = trigger.timestep;
        t.batch = trigger.batch;
        t.last_accessed = trigger.timestep;
        detail::embed_thought(t, provider);
        out.push_back(std::move(t));
    }
    return out;
}

/// Deliberate thoughts grounded in the retrieved stimuli. Citations that do
/// not resolve are dropped; a thought left without any cites the trigger.
inline std::vector<Thought> form_system2(const Participant& agent, const ConversationState& state,
                                         const TriggerContext& trigger, std::span<const RetrievalHit> stimuli, int n,
                                         Provider& provider, const StimulusResolver& resolve,
                                         const IdGenerator& next_id) {
    if (n <= 0) return {};
    std::string memory_block;
    if (!stimuli.empty()) {
        memory_block = std::string(prompts::kStimuli) + "\n";
        for (const auto& h : stimuli) memory_block += "- [" + h.item.id + "] " + h.item.text + "\n";
    }
    CompletionRequest req;
    req.task = tasks::system2;
    req.system_prompt = "You are " + agent.name() + ", taking part in a group conversation.";
    req.user_prompt =
        detail::agent_header(agent, state) + "Conversation so far:\n" + prompts::render_window(state, 12) +
        detail::latest_line(state, trigger) + memory_block + prompts::kCount + std::to_string(n) + "\n\n" +
        "You are provided contexts including the conversation history" +
        (stimuli.empty() ? std::string() : std::string(" and salient memories of yourself")) +
        ". Form " + std::to_string(n) +
        " thought(s) that you would most likely have at this point in the conversation, given the context. Make sure "
        "they are diverse, align with these contexts and are less than 15 words.\n"
        "For each thought, list the ids of the stimuli it came from (utterance ids like [u3], memory ids like [m2], "
        "or earlier thought ids like [t7]).\n"
        "Respond with a JSON array of objects {\"text\": string, \"stimuli\": [id, ...]}.";
    req.max_tokens = 400;
    req.temperature = 0.9;

    std::vector<Thought> out;
    for (auto& d : detail::request_drafts(provider, req)) {
        if (static_cast<int>(out.size()) >= n) break;
        Thought t;
        t.id = next_id();
        t.owner = agent.id;
        t.text = std::move(d.text);
        t.system = 2;
        t.created_at = trigger.timestep;
        t.batch = trigger.batch;
        t.last_accessed = trigger.timestep;
        for (auto& raw : d.stimuli) {
            std::string id = detail::strip_id(raw);
            if (id.empty()) continue;
            StimulusRef ref;
            if (id == trigger.origin().id) {
                ref = trigger.origin();
            } else if (auto kind = resolve(id)) {
                ref = {*kind, id};
            } else {
                continue;
            }
            if (std::find(t.stimuli.begin(), t.stimuli.end(), ref) == t.stimuli.end()) t.stimuli.push_back(ref);
        }
        if (t.stimuli.empty()) {
            log_warn("thought '" + t.text + "' cited no known stimulus; attributing it to the trigger");
            t.stimuli.push_back(trigger.origin());
        }
        for (const auto& h : stimuli)
            for (const auto& s : t.stimuli)
                if (s.id == h.item.id) t.saliency_at_creation = std::max(t.saliency_at_creation, h.saliency);
        detail::embed_thought(t, provider);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace inner_thoughts
