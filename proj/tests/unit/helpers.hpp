#pragma once
// Small builders shared by the unit tests.

#include "inner_thoughts/engine.hpp"
#include "inner_thoughts/mock_provider.hpp"

#include <gtest/gtest.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace it_test {

using namespace inner_thoughts;

inline Participant agent(std::string id, ProactivityConfig cfg = {}, std::vector<std::string> persona = {}) {
    Participant p;
    p.display_name = id;
    p.display_name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p.display_name[0])));
    p.id = std::move(id);
    p.kind = ParticipantKind::agent;
    p.proactivity = cfg;
    p.persona = std::move(persona);
    return p;
}

inline Participant human(std::string id) {
    Participant p;
    p.display_name = id;
    p.display_name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p.display_name[0])));
    p.id = std::move(id);
    p.kind = ParticipantKind::human;
    return p;
}

/// A thought already scored at timestep t with the given final score.
inline Thought scored(std::string id, double final_score, Timestep t, int system = 2, std::uint64_t batch = 1,
                      Timestep created_at = -1) {
    Thought th;
    th.id = std::move(id);
    th.text = "thought " + th.id;
    th.system = system;
    th.batch = batch;
    th.created_at = created_at < 0 ? t : created_at;
    MotivationScore s;
    s.raw = final_score;
    s.final = final_score;
    s.evaluated_at = t;
    th.evaluation = s;
    return th;
}

/// Draw source that replays fixed values and counts how often it was asked.
struct FixedDraws {
    std::vector<double> values;
    std::size_t used = 0;
    double operator()() { return values.at(used++); }
};

/// A scripted response for the analysis call followed by the rating call
/// with the given first-token probabilities.
inline void script_rating(MockProvider& p, const std::string& thought_text,
                          std::vector<std::pair<std::string, double>> probs) {
    const std::string top = probs.front().first;
    p.script(tasks::evaluate, thought_text,
             "Positive factors:\n1. Relevance: on topic.\n2. Coherence: follows on.\nNegative factors:\n"
             "1. Balance: others are talking.\n2. Dynamics: mid-exchange.\nRating: " +
                 probs.front().first);
    p.script(tasks::rate, thought_text, rating_response(top, std::move(probs)));
}

inline std::vector<json> of_type(const std::vector<json>& events, const std::string& type) {
    std::vector<json> out;
    for (const auto& e : events)
        if (e["type"] == type) out.push_back(e);
    return out;
}

}  // namespace it_test
