#include "helpers.hpp"

using namespace it_test;

namespace {

ConversationState chat(std::vector<std::pair<std::string, std::string>> lines) {
    ConversationState s;
    s.add_participant(agent("alice"));
    s.add_participant(agent("bob"));
    s.add_participant(human("carol"));
    for (auto& [who, text] : lines) s.append_utterance(who, text);
    return s;
}

ProactivityConfig cfg(double s1, double im, double interrupt) {
    ProactivityConfig c;
    c.system1Prob = s1;
    c.imThreshold = im;
    c.interruptThreshold = interrupt;
    return c;
}

}  // namespace

TEST(ClassifyTurn, PaperExamplesWithScriptedMock) {
    MockProvider p;
    p.script(tasks::classify_turn, "What about you, Alice?", "Alice");
    p.script(tasks::classify_turn, "Disneyland", "anyone");
    EXPECT_EQ(classify_turn(chat({{"carol", "What about you, Alice?"}}), p), TurnPrediction::to("alice"));
    EXPECT_EQ(classify_turn(chat({{"carol", "I went to Disneyland last weekend."}}), p), TurnPrediction::open());
}

TEST(ClassifyTurn, EmptyTranscriptIsOpenWithoutCalls) {
    MockProvider p;
    EXPECT_TRUE(classify_turn(chat({}), p).is_open());
    EXPECT_EQ(p.call_count(), 0u);
}

TEST(ClassifyTurn, FailsOpen) {
    MockProvider p;
    p.fail(tasks::classify_turn);
    log_sink() = [](auto, auto) {};
    EXPECT_TRUE(classify_turn(chat({{"carol", "What about you, Alice?"}}), p).is_open());
    MockProvider unknown;
    unknown.script(tasks::classify_turn, "", "Zed");
    EXPECT_TRUE(classify_turn(chat({{"carol", "hi"}}), unknown).is_open());
    log_sink() = nullptr;
}

TEST(ClassifyTurn, PromptCarriesLastFiveUtterances) {
    MockProvider p;
    p.script(tasks::classify_turn, "", " bob. ");
    auto s = chat({});
    for (int i = 1; i <= 7; ++i) s.append_utterance("carol", "m" + std::to_string(i));
    EXPECT_EQ(classify_turn(s, p), TurnPrediction::to("bob"));
    const auto prompt = p.calls()[0].user_prompt;
    EXPECT_EQ(prompt.find("m2\n"), std::string::npos);
    EXPECT_NE(prompt.find("[u3] Carol: m3"), std::string::npos);
}

// -- decide ------------------------------------------------------------------

TEST(Decide, OpenMotivated) {
    ThoughtReservoir r("alice");
    r.add(scored("a", 4.2, 3));
    r.add(scored("b", 3.0, 3));
    FixedDraws draws{{0.0}};
    auto d = decide("alice", cfg(0.2, 3.59, 4.8), r, TurnPrediction::open(), 3, 1, draws);
    EXPECT_TRUE(d.speaks());
    EXPECT_EQ(d.reason, DecisionReason::open_motivated);
    EXPECT_EQ(*d.thought, "a");
    EXPECT_EQ(draws.used, 0u);
}

TEST(Decide, OpenSystem1OnDraw) {
    ThoughtReservoir r("alice");
    r.add(scored("s2", 3.0, 3, 2));
    r.add(scored("s1", 2.5, 3, 1));
    FixedDraws draws{{0.5}};
    auto d = decide("alice", cfg(0.7, 4.49, 4.8), r, TurnPrediction::open(), 3, 1, draws);
    EXPECT_EQ(d.reason, DecisionReason::open_system1);
    EXPECT_EQ(*d.thought, "s1");
    FixedDraws high{{0.7}};
    EXPECT_EQ(decide("alice", cfg(0.7, 4.49, 4.8), r, TurnPrediction::open(), 3, 1, high).reason,
              DecisionReason::none_motivated);
}

TEST(Decide, System1FallbackOnlyUsesCurrentBatch) {
    ThoughtReservoir r("alice");
    r.add(scored("stale", 2.5, 3, 1, /*batch=*/1));
    FixedDraws draws{{0.0}};
    auto d = decide("alice", cfg(1.0, 4.49, 4.8), r, TurnPrediction::open(), 3, 2, draws);
    EXPECT_EQ(d.reason, DecisionReason::none_motivated);
    EXPECT_EQ(draws.used, 0u);
}

TEST(Decide, OpenSilent) {
    ThoughtReservoir r("alice");
    r.add(scored("a", 3.0, 3));
    FixedDraws draws{{0.0}};
    auto d = decide("alice", cfg(0.0, 3.59, 4.8), r, TurnPrediction::open(), 3, 1, draws);
    EXPECT_FALSE(d.speaks());
    EXPECT_EQ(d.reason, DecisionReason::none_motivated);
    EXPECT_FALSE(d.thought);
}

TEST(Decide, AllocatedToMeSpeaksDespiteLowScore) {
    ThoughtReservoir r("alice");
    r.add(scored("a", 2.1, 3));
    FixedDraws draws{{}};
    auto d = decide("alice", cfg(0.0, 4.09, 5.0), r, TurnPrediction::to("alice"), 3, 1, draws);
    EXPECT_TRUE(d.speaks());
    EXPECT_EQ(d.reason, DecisionReason::allocated_to_me);
    EXPECT_EQ(*d.thought, "a");
    ThoughtReservoir empty("alice");
    auto ack = decide("alice", cfg(0.0, 4.09, 5.0), empty, TurnPrediction::to("alice"), 3, 1, draws);
    EXPECT_TRUE(ack.speaks());
    EXPECT_FALSE(ack.thought);
}

TEST(Decide, AllocatedElsewhereSilentBelowInterruptThreshold) {
    ThoughtReservoir r("alice");
    r.add(scored("a", 4.5, 3));
    FixedDraws draws{{}};
    auto d = decide("alice", cfg(0.2, 3.59, 4.8), r, TurnPrediction::to("bob"), 3, 1, draws);
    EXPECT_FALSE(d.speaks());
    EXPECT_EQ(d.reason, DecisionReason::allocated_elsewhere);
}

TEST(Decide, InterruptAtThreshold) {
    ThoughtReservoir r("alice");
    r.add(scored("a", 4.8, 3));
    FixedDraws draws{{}};
    auto d = decide("alice", cfg(0.2, 3.59, 4.8), r, TurnPrediction::to("bob"), 3, 1, draws);
    EXPECT_TRUE(d.speaks());
    EXPECT_EQ(d.reason, DecisionReason::interrupt);
}

TEST(Decide, ThresholdComparisonsAreInclusive) {
    ThoughtReservoir r("alice");
    r.add(scored("a", 3.59, 3));
    FixedDraws draws{{0.99}};
    EXPECT_EQ(decide("alice", cfg(0.0, 3.59, 4.8), r, TurnPrediction::open(), 3, 1, draws).reason,
              DecisionReason::open_motivated);
}

TEST(Decide, TieGoesToMostRecentAndExpressedOrStaleExcluded) {
    ThoughtReservoir r("alice");
    r.add(scored("older", 4.0, 3, 2, 1, 1));
    r.add(scored("newer", 4.0, 3, 2, 1, 2));
    r.add(scored("gone", 5.0, 3));
    r.add(scored("stale", 5.0, 2));  // scored at an earlier timestep
    r.mark_expressed("gone", 3, 9);
    FixedDraws draws{{}};
    auto d = decide("alice", cfg(0.0, 3.59, 4.8), r, TurnPrediction::open(), 3, 1, draws);
    EXPECT_EQ(*d.thought, "newer");
}

TEST(Decide, DeterministicForSeededRng) {
    ThoughtReservoir r("alice");
    r.add(scored("s1", 2.0, 3, 1));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng a(seed), b(seed);
        EXPECT_EQ(decide("alice", cfg(0.5, 4.0, 4.8), r, TurnPrediction::open(), 3, 1, a).reason,
                  decide("alice", cfg(0.5, 4.0, 4.8), r, TurnPrediction::open(), 3, 1, b).reason);
    }
}

// -- articulation --------------------------------------------------------------

TEST(Articulate, SinglePassWithoutToneAndRestyleWithIt) {
    MockProvider p;
    p.enable_synthetic();
    auto s = chat({{"carol", "I went for a jog."}});
    Thought th = scored("t1", 4, 1);
    th.text = "I should mention my morning run";
    const auto& alice = *s.find_participant("alice");
    EXPECT_NE(articulate(alice, th, s, false, p).find("morning run"), std::string::npos);
    EXPECT_EQ(p.call_count(tasks::articulate), 1u);
    EXPECT_EQ(p.call_count(tasks::restyle), 0u);
    articulate(alice, th, s, true, p);
    EXPECT_EQ(p.call_count(tasks::restyle), 1u);
}

TEST(Articulate, ProviderDownReturnsThoughtVerbatim) {
    MockProvider p;
    p.set_offline(true);
    auto s = chat({});
    Thought th = scored("t1", 4, 1);
    th.text = "I should mention my morning run";
    log_sink() = [](auto, auto) {};
    EXPECT_EQ(articulate(*s.find_participant("alice"), th, s, true, p), th.text);
    EXPECT_FALSE(acknowledge(*s.find_participant("alice"), s, p).empty());
    log_sink() = nullptr;
}
