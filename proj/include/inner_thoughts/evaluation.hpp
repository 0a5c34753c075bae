#pragma once
// Intrinsic-motivation scoring.
//
// Each thought is rated 1-5 by the model after it argues two reasons for
// and two against voicing it. The rating's first-token alternatives give a
// distribution; the score is its mean, grown by how long the agent has
// been silent:
//
//   final = sum_i p(s_i) * s_i * growth^(t - tau_p)

#include "inner_thoughts/prompts.hpp"
#include "inner_thoughts/thought.hpp"

#include <cctype>
#include <future>
#include <regex>

namespace inner_thoughts {

struct Heuristic {
    std::string_view name;
    std::string_view definition;
};

struct MotivationLevel {
    int rating;
    std::string_view name;
    std::string_view definition;
};

/// Versioned evaluation rubric.
struct HeuristicCatalog {
    static constexpr std::string_view version = "1";

    static constexpr std::array<Heuristic, 8> criteria{{
        {"Relevance",
         "How closely the thought connects to the current topic and to the party's own knowledge, interests, "
         "experiences, long-term memories, or recent thoughts."},
        {"Information Gap",
         "Whether the thought supplies missing information, resolves confusion, or asks for clarification the "
         "group needs."},
        {"Expected Impact",
         "Whether voicing it would bring in something new, steer the conversation, or deepen it, instead of "
         "repeating what is likely to come up anyway."},
        {"Urgency",
         "Whether it is time-sensitive, for example correcting an error or a misunderstanding before the moment "
         "passes."},
        {"Coherence",
         "Whether it follows logically from the previous utterance and keeps the conversation flowing."},
        {"Originality", "Whether it adds a point that has not already been made."},
        {"Balance",
         "Whether speaking now keeps participation fair, given how much this party has spoken compared with "
         "others and whether quieter members deserve room."},
        {"Dynamics",
         "Whether the timing suits the rhythm of the conversation: filling a lull or opening a topic, versus "
         "holding back while others are in the middle of an exchange."},
    }};

    static constexpr std::array<MotivationLevel, 5> levels{{
        {1, "Very Low",
         "Unlikely to say it right now. Would stay quiet even after a long pause or a direct invitation."},
        {2, "Low", "Somewhat unlikely. Would only speak up after a long silence in which nobody else takes the turn."},
        {3, "Neutral", "Indifferent. Equally fine voicing it or letting others talk."},
        {4, "High", "Somewhat likely. Wants to speak as soon as the current speaker finishes."},
        {5, "Very High", "Very likely. Would even cut in while someone else is still speaking."},
    }};

    /// Canonical criterion name for a loosely written one, if any.
    static std::optional<std::string> canonical(std::string_view text) {
        auto lower = [](std::string_view s) {
            std::string out;
            for (char c : s)
                if (std::isalpha(static_cast<unsigned char>(c)))
                    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            return out;
        };
        const std::string key = lower(text);
        for (const auto& c : criteria) {
            const std::string name = lower(c.name);
            if (key.rfind(name, 0) == 0) return std::string(c.name);
        }
        return std::nullopt;
    }
};

class EvaluationParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ParsedRating {
    RatingDistribution distribution;
    std::vector<Factor> positive;
    std::vector<Factor> negative;
};

/// Up to two positive and two negative factors from an analysis text.
/// Criteria outside the catalog are dropped.
inline std::pair<std::vector<Factor>, std::vector<Factor>> parse_factors(std::string_view text) {
    std::vector<Factor> pos, neg;
    std::vector<Factor>* section = nullptr;
    std::istringstream in{std::string(text)};
    std::string line;
    static const std::regex item(R"(^\s*(?:[-*•]|\d+[.)])?\s*\**([A-Za-z ]+?)\**\s*[:\-–]\s*(.*)$)");
    while (std::getline(in, line)) {
        std::string lower;
        for (char c : line) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (lower.find("positive") != std::string::npos && lower.find("factor") != std::string::npos) {
            section = &pos;
            continue;
        }
        if (lower.find("negative") != std::string::npos && lower.find("factor") != std::string::npos) {
            section = &neg;
            continue;
        }
        if (lower.rfind("rating", 0) == 0) section = nullptr;
        std::smatch m;
        if (!section || section->size() >= 2 || !std::regex_match(line, m, item)) continue;
        if (auto name = HeuristicCatalog::canonical(m[1].str())) section->push_back({*name, m[2].str()});
    }
    return {pos, neg};
}

/// Rating distribution from the first-token alternatives (digits 1-5 only,
/// renormalized), falling back to a point mass on the last rating written
/// in the text.
inline ParsedRating parse_rating(const CompletionResponse& resp) {
    ParsedRating out;
    std::tie(out.positive, out.negative) = parse_factors(resp.text);

    double total = 0.0;
    for (const auto& alt : resp.first_token_alternatives) {
        std::string tok;
        for (char c : alt.token)
            if (!std::isspace(static_cast<unsigned char>(c))) tok.push_back(c);
        if (tok.size() != 1 || tok[0] < '1' || tok[0] > '5') continue;
        const double p = std::exp(alt.logprob);
        out.distribution.mass[tok[0] - '1'] += p;
        total += p;
    }
    if (total > 0.0) {
        for (double& m : out.distribution.mass) m /= total;
        return out;
    }

    static const std::regex labeled(R"([Rr]ating\D{0,3}([1-5])\b)");
    static const std::regex bare(R"((^|[^0-9.])([1-5])(?![0-9.]))");
    const std::string& text = resp.text;
    int rating = 0;
    for (std::sregex_iterator it(text.begin(), text.end(), labeled), end; it != end; ++it)
        rating = std::stoi((*it)[1]);
    if (rating == 0)
        for (std::sregex_iterator it(text.begin(), text.end(), bare), end; it != end; ++it)
            rating = std::stoi((*it)[2]);
    if (rating == 0) throw EvaluationParseError("no rating in evaluation response");
    out.distribution = RatingDistribution::point(rating);
    return out;
}

/// Pure scoring step.
inline MotivationScore score_thought(const RatingDistribution& dist, Timestep t, Timestep last_spoke_at,
                                     double growth) {
    if (t < last_spoke_at) throw std::invalid_argument("score_thought: t < tau_p");
    MotivationScore s;
    s.distribution = dist;
    s.raw = dist.expected();
    s.silence_factor = std::pow(growth, static_cast<double>(t - last_spoke_at));
    s.final = s.raw * s.silence_factor;
    s.evaluated_at = t;
    return s;
}

inline std::string render_rubric() {
    std::string out = "Criteria:\n";
    for (const auto& c : HeuristicCatalog::criteria)
        out += "- " + std::string(c.name) + ": " + std::string(c.definition) + "\n";
    out += "Motivation levels:\n";
    for (const auto& l : HeuristicCatalog::levels)
        out += std::to_string(l.rating) + " (" + std::string(l.name) + "): " + std::string(l.definition) + "\n";
    return out;
}

/// First of the two evaluation calls: analysis with factors, then a rating.
inline CompletionRequest build_eval_prompt(const Participant& agent, const ConversationState& state,
                                           const Thought& thought, int window = 12) {
    CompletionRequest req;
    req.task = tasks::evaluate;
    req.system_prompt =
        "You evaluate how strongly a participant in a group conversation wants to voice a particular thought at "
        "this moment.";
    std::string latest;
    if (!state.transcript().empty())
        latest = std::string(prompts::kLatest) + prompts::render_utterance(state, state.transcript().back()) + "\n";
    req.user_prompt =
        std::string(prompts::kYouAre) + agent.name() + "\n" + prompts::render_participants(state) +
        prompts::render_persona(agent) + render_rubric() + "\nConversation (most recent last):\n" +
        prompts::render_window(state, static_cast<std::size_t>(window)) + latest + prompts::kThought + thought.text +
        "\n\n" +
        "Step 1. Reason about why " + agent.name() +
        " may have a strong desire to express this thought now. Give the top two most relevant factors from the "
        "criteria.\n"
        "Step 2. Reason about why " + agent.name() +
        " may have a weak desire to express this thought now. Give the top two most relevant factors from the "
        "criteria.\n"
        "Step 3. Based on these, give a rating on a scale of 1-5 for the motivation to express the thought.\n\n"
        "Format:\nPositive factors:\n1. <Criterion>: <reason>\n2. <Criterion>: <reason>\nNegative factors:\n"
        "1. <Criterion>: <reason>\n2. <Criterion>: <reason>\nRating: <1-5>";
    req.want_top_logprobs = kMaxTopLogprobs;
    req.max_tokens = 300;
    req.temperature = 0.0;
    return req;
}

/// Second call: the bare rating digit as the first output token.
inline CompletionRequest build_rating_request(const CompletionRequest& eval_request, std::string_view analysis) {
    CompletionRequest req = eval_request;
    req.task = tasks::rate;
    req.user_prompt += "\n\n" + std::string(prompts::kAnalysis) + "\n" + std::string(analysis) +
                       "\n\nGiven this analysis, output only the rating as a single digit from 1 to 5.";
    req.want_top_logprobs = kMaxTopLogprobs;
    req.max_tokens = 1;
    req.temperature = 0.0;
    return req;
}

/// Both calls and the scoring step for one thought. nullopt when the
/// analysis call fails or no rating can be recovered.
inline std::optional<MotivationScore> evaluate_thought(const Participant& agent, const ConversationState& state,
                                                       const Thought& thought, Provider& provider,
                                                       const ProactivityConfig& cfg, Timestep t) {
    const CompletionRequest first = build_eval_prompt(agent, state, thought, cfg.eval_window);
    CompletionResponse analysis;
    try {
        analysis = provider.complete(first);
    } catch (const ProviderError& e) {
        log_warn("evaluation of " + thought.id + " failed: " + e.what());
        return std::nullopt;
    }
    CompletionResponse combined{analysis.text, {}};
    try {
        const CompletionResponse rating = provider.complete(build_rating_request(first, analysis.text));
        combined.text += "\nRating: " + rating.text;
        combined.first_token_alternatives = rating.first_token_alternatives;
    } catch (const ProviderError& e) {
        log_warn("rating call for " + thought.id + " failed, using the analysis text: " + e.what());
    }
    try {
        ParsedRating parsed = parse_rating(combined);
        MotivationScore s = score_thought(parsed.distribution, t, std::min(agent.last_spoke_at, t),
                                          cfg.motivation_growth);
        s.positive_factors = std::move(parsed.positive);
        s.negative_factors = std::move(parsed.negative);
        return s;
    } catch (const EvaluationParseError& e) {
        log_warn("evaluation of " + thought.id + ": " + e.what());
        return std::nullopt;
    }
}

/// Ids of the thoughts to evaluate this cycle: every fresh thought plus the
/// top-K retained thoughts by previous score (more recent first on ties).
inline std::vector<std::string> select_for_evaluation(const ThoughtReservoir& reservoir, int retained_k) {
    std::vector<std::string> ids;
    std::vector<const Thought*> retained;
    for (const auto& t : reservoir.thoughts()) {
        if (t.state == ThoughtState::fresh) ids.push_back(t.id);
        if (t.state == ThoughtState::retained) retained.push_back(&t);
    }
    std::stable_sort(retained.begin(), retained.end(), [](const Thought* a, const Thought* b) {
        if (a->score() != b->score()) return a->score() > b->score();
        return a->created_at > b->created_at;
    });
    for (std::size_t i = 0; i < retained.size() && static_cast<int>(i) < retained_k; ++i)
        ids.push_back(retained[i]->id);
    return ids;
}

struct EvaluationResult {
    std::string thought_id;
    std::optional<MotivationScore> score;
};

/// Evaluates the selected thoughts of one agent. Results keep selection order.
inline std::vector<EvaluationResult> evaluate_batch(const Participant& agent, const ConversationState& state,
                                                    const ThoughtReservoir& reservoir, Provider& provider,
                                                    const ProactivityConfig& cfg, Timestep t, bool concurrent = false) {
    std::vector<EvaluationResult> results;
    for (const auto& id : select_for_evaluation(reservoir, cfg.reevaluate_retained)) results.push_back({id, {}});
    if (!concurrent) {
        for (auto& r : results) r.score = evaluate_thought(agent, state, *reservoir.find(r.thought_id), provider, cfg, t);
        return results;
    }
    std::vector<std::future<std::optional<MotivationScore>>> pending;
    for (auto& r : results) {
        const Thought* th = reservoir.find(r.thought_id);
        pending.push_back(std::async(std::launch::async, [&, th] {
            return evaluate_thought(agent, state, *th, provider, cfg, t);
        }));
    }
    for (std::size_t i = 0; i < results.size(); ++i) results[i].score = pending[i].get();
    return results;
}

}  // namespace inner_thoughts
