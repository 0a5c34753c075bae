#pragma once
// Shared prompt fragments.
//
// Prompts tag machine-relevant lines with upper-case labels (LATEST:,
// PARTICIPANTS:, STIMULI:, THOUGHT:, ...) and cite items by bracketed ids
// ([u3], [m2], [t7]). Models see ordinary text; the synthetic mock and the
// response parsers rely on the labels.

#include "inner_thoughts/core.hpp"

#include <sstream>
#include <string>

namespace inner_thoughts::prompts {

inline constexpr const char* kYouAre = "YOU ARE: ";
inline constexpr const char* kParticipants = "PARTICIPANTS: ";
inline constexpr const char* kLatest = "LATEST: ";
inline constexpr const char* kStimuli = "STIMULI:";
inline constexpr const char* kThought = "THOUGHT: ";
inline constexpr const char* kPersona = "PERSONA:";
inline constexpr const char* kCount = "COUNT: ";
inline constexpr const char* kAnalysis = "ANALYSIS:";

inline std::string speaker_name(const ConversationState& state, const std::string& pid) {
    const Participant* p = state.find_participant(pid);
    return p ? p->name() : pid;
}

inline std::string render_utterance(const ConversationState& state, const Utterance& u) {
    return "[" + u.id + "] " + speaker_name(state, u.speaker) + ": " + u.text;
}

/// The last n utterances, one per line, oldest first.
inline std::string render_window(const ConversationState& state, std::size_t n) {
    std::string out;
    for (const auto& u : state.window(n)) out += render_utterance(state, u) + "\n";
    if (out.empty()) out = "(no messages yet)\n";
    return out;
}

inline std::string render_participants(const ConversationState& state) {
    std::string out = kParticipants;
    for (std::size_t i = 0; i < state.participants.size(); ++i) {
        if (i) out += ", ";
        out += state.participants[i].name();
    }
    return out + "\n";
}

inline std::string render_persona(const Participant& p) {
    std::string out = std::string(kPersona) + "\n";
    for (const auto& line : p.persona) out += "- " + line + "\n";
    return out;
}

/// Value of the first line starting with label, without the label.
inline std::string find_labeled(std::string_view text, std::string_view label) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (line.substr(0, label.size()) == label) return std::string(line.substr(label.size()));
        pos = end + 1;
    }
    return {};
}

/// Lines of the "- item" block following label.
inline std::vector<std::string> find_block(std::string_view text, std::string_view label) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    bool inside = false;
    while (std::getline(in, line)) {
        if (!inside) {
            inside = line.rfind(label, 0) == 0;
            continue;
        }
        if (line.rfind("- ", 0) != 0) break;
        out.push_back(line.substr(2));
    }
    return out;
}

}  // namespace inner_thoughts::prompts
