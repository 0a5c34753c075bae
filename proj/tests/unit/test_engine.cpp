#include "helpers.hpp"

#include "../common/scenarios.hpp"

using namespace it_test;

namespace {

struct Rig {
    std::shared_ptr<MockProvider> provider = std::make_shared<MockProvider>(3);
    std::shared_ptr<VirtualClock> clock = std::make_shared<VirtualClock>();
    std::unique_ptr<Engine> engine;

    explicit Rig(std::vector<ProactivityConfig> agents = {ProactivityConfig{}}, std::size_t max_queue = 64,
                 Arbitration arbitration = Arbitration::highest_score) {
        provider->enable_synthetic();
        EngineConfig cfg;
        cfg.seed = 9;
        cfg.max_queue = max_queue;
        cfg.arbitration = arbitration;
        const char* names[] = {"alice", "bob", "carmen", "daisy"};
        for (std::size_t i = 0; i < agents.size(); ++i)
            cfg.agents.push_back({agent(names[i], agents[i], {"I love hiking in the mountains.", "I work as a nurse."}), {}});
        cfg.humans.push_back(human("sam"));
        engine = std::make_unique<Engine>(std::move(cfg), provider, clock);
    }
    std::vector<json> events() const { return engine->log().snapshot(); }
};

ProactivityConfig eager() {
    ProactivityConfig c;
    c.imThreshold = 1.0;
    c.interruptThreshold = 1.0;
    return c;
}

ProactivityConfig mute() {
    ProactivityConfig c;
    c.imThreshold = 5.0;
    c.interruptThreshold = 5.0;
    c.system1Prob = 0.0;
    c.motivation_growth = 1.0;
    return c;
}

}  // namespace

TEST(EngineConfig, ValidationAndJson) {
    EngineConfig c;
    c.agents.push_back({agent("a"), {}});
    c.humans.push_back(human("a"));
    EXPECT_THROW(c.validate(), InvalidConfig);

    auto parsed = json{{"id", "demo"},
                       {"agents", {{{"id", "alice"}, {"preset", "active_contributor"},
                                    {"proactivity", {{"imThreshold", 3.7}}},
                                    {"memory", {{{"text", "I like tea"}, {"kind", "interest"}}}}}}},
                       {"humans", {{{"id", "you"}}}},
                       {"arbitration", "round_robin"}}
                      .get<EngineConfig>();
    EXPECT_EQ(parsed.conversation_id, "demo");
    ASSERT_EQ(parsed.agents.size(), 1u);
    EXPECT_DOUBLE_EQ(parsed.agents[0].participant.proactivity->imThreshold, 3.7);
    EXPECT_TRUE(parsed.agents[0].participant.proactivity->proactiveTone);
    EXPECT_EQ(parsed.agents[0].memory.size(), 1u);
    EXPECT_EQ(parsed.arbitration, Arbitration::round_robin);
    EXPECT_THROW((json{{"agents", {{{"id", "a"}, {"preset", "shy"}}}}}.get<EngineConfig>()), InvalidConfig);
    EXPECT_THROW((json{{"arbitration", "loudest"}}.get<EngineConfig>()), InvalidConfig);
}

TEST(Engine, PersonaLinesBecomeNamespacedMemories) {
    EXPECT_EQ(infer_memory_kind("I want to run a marathon."), MemoryKind::objective);
    EXPECT_EQ(infer_memory_kind("I love baking bread."), MemoryKind::interest);
    EXPECT_EQ(infer_memory_kind("I am a nurse."), MemoryKind::knowledge);
    Rig rig;
    auto mem = rig.engine->memory("alice");
    ASSERT_EQ(mem.size(), 2u);
    EXPECT_EQ(mem[0]["id"], "alice.m1");
    EXPECT_EQ(mem[0]["kind"], "interest");
    auto session = rig.events().at(0);
    EXPECT_EQ(session["type"], "session");
    EXPECT_EQ(session["payload"]["seed"], 9);
    EXPECT_THROW(rig.engine->memory("sam"), NotFound);
}

TEST(Engine, CycleLogsEveryStageInOrder) {
    Rig rig({mute()});
    rig.engine->post_message("sam", "I went to Disneyland last weekend.");
    EXPECT_EQ(rig.engine->queue_depth(), 1u);
    ASSERT_TRUE(rig.engine->step());
    EXPECT_FALSE(rig.engine->step());
    std::vector<std::string> types;
    for (const auto& e : rig.events()) types.push_back(e["type"]);
    const std::vector<std::string> expected = {"session",         "utterance",         "trigger",
                                               "thought_created", "thought_created",   "thought_created",
                                               "thought_evaluated", "thought_evaluated", "thought_evaluated",
                                               "decision"};
    EXPECT_EQ(types, expected);
    auto created = of_type(rig.events(), "thought_created");
    EXPECT_EQ(created[0]["payload"]["system"], 1);
    EXPECT_EQ(created[0]["payload"]["id"], "alice.t1");
    EXPECT_EQ(created[2]["payload"]["id"], "alice.t3");
    EXPECT_EQ(created[0]["payload"]["batch"], 1);
    auto decision = of_type(rig.events(), "decision")[0]["payload"];
    EXPECT_EQ(decision["reason"], "none_motivated");
    EXPECT_TRUE(rig.engine->state().find_utterance("u1")->interpretation);
    for (const auto& t : rig.engine->reservoir("alice").thoughts()) EXPECT_EQ(t.state, ThoughtState::retained);
}

TEST(Engine, RetentionScenario) {
    auto r = scenarios::retention();
    EXPECT_EQ(r.types(), scenarios::kTwoCycleSequence);
    auto first = r.nth("thought_evaluated", 0)["payload"]["evaluation"];
    EXPECT_NEAR(first["raw"].get<double>(), 3.2, 1e-12);
    EXPECT_NEAR(first["final"].get<double>(), 3.2 * 1.02, 1e-12);
    EXPECT_EQ(r.nth("decision", 0)["payload"]["reason"], "none_motivated");
    auto lifted = r.nth("thought_evaluated", 2)["payload"];
    EXPECT_EQ(lifted["thought"], "alice.t1");
    EXPECT_NEAR(lifted["evaluation"]["final"].get<double>(), 4.0 * 1.02 * 1.02, 1e-12);
    auto expressed = r.nth("thought_expressed")["payload"];
    EXPECT_EQ(expressed["thought"], "alice.t1");
    EXPECT_EQ(expressed["retained"], true);
    EXPECT_EQ(expressed["reason"], "open_motivated");
    EXPECT_EQ(expressed["created_at"], 1);
    auto said = r.nth("utterance", 2);
    EXPECT_EQ(said["payload"]["speaker"], "alice");
    EXPECT_EQ(said["payload"]["timestep"], 3);
    EXPECT_EQ(said["payload"]["thought"], "alice.t1");
    EXPECT_EQ(r.engine->queue_depth(), 1u);
}

TEST(Engine, InterruptionScenario) {
    auto r = scenarios::interruption();
    EXPECT_EQ(r.types(), scenarios::kInterruptSequence);
    auto d = r.nth("decision")["payload"];
    EXPECT_EQ(d["reason"], "interrupt");
    EXPECT_GE(d["score"].get<double>(), 4.8);

    auto below = scenarios::interruption(0.5);  // 4.5 * 1.02 < 4.8
    EXPECT_EQ(below.nth("decision")["payload"]["reason"], "allocated_elsewhere");
    EXPECT_TRUE(below.nth("thought_expressed").is_null());
}

TEST(Engine, EvolutionScenario) {
    auto r = scenarios::evolution();
    EXPECT_EQ(r.types(), scenarios::kTwoCycleSequence);
    auto created = r.nth("thought_created", 1)["payload"];
    EXPECT_EQ(created["id"], "alice.t2");
    EXPECT_EQ(created["stimuli"][0], (json{{"kind", "thought"}, {"id", "alice.t1"}}));
    EXPECT_EQ(r.nth("thought_expressed")["payload"]["thought"], "alice.t2");
    bool listed = false;
    for (const auto& call : r.provider->calls())
        if (call.task == tasks::system2 && call.user_prompt.find("- [alice.t1] " + scenarios::kCamping) != std::string::npos)
            listed = true;
    EXPECT_TRUE(listed);
}

TEST(Engine, PauseWatchdogTiming) {
    Rig rig({mute()});
    rig.clock->set(9.9);
    EXPECT_FALSE(rig.engine->pause_watchdog(rig.clock->now()));
    rig.clock->set(10.0);
    auto fired = rig.engine->pause_watchdog(rig.clock->now());
    ASSERT_TRUE(fired);
    EXPECT_TRUE(fired->is_pause());
    EXPECT_DOUBLE_EQ(fired->silence_seconds, 10.0);
    EXPECT_FALSE(rig.engine->pause_watchdog(100.0));  // one pending pause at a time
    rig.engine->step();
    EXPECT_EQ(of_type(rig.events(), "trigger")[0]["payload"]["kind"], "on_pause");
    rig.clock->set(19.9);
    EXPECT_FALSE(rig.engine->pause_watchdog(rig.clock->now()));
    EXPECT_TRUE(rig.engine->pause_watchdog(20.0));
}

TEST(Engine, BusyQueueSuppressesPause) {
    Rig rig({mute()});
    rig.clock->set(3.0);
    rig.engine->post_message("sam", "hello");
    EXPECT_FALSE(rig.engine->pause_watchdog(50.0));
    rig.engine->step();
    EXPECT_FALSE(rig.engine->pause_watchdog(12.9));
    EXPECT_TRUE(rig.engine->pause_watchdog(13.0));
}

TEST(Engine, PendingTriggersHoldAgentsBack) {
    Rig rig({eager()});
    rig.engine->post_message("sam", "first");
    rig.engine->post_message("sam", "second");
    rig.engine->step();
    auto d = rig.engine->last_decisions();
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].reason, DecisionReason::queue_busy);
    EXPECT_EQ(rig.engine->state().transcript().size(), 2u);
    rig.engine->step();
    EXPECT_TRUE(rig.engine->last_decisions()[0].speaks());
    EXPECT_EQ(rig.engine->state().transcript().size(), 3u);
}

TEST(Engine, ArbitrationLetsOneAgentSpeak) {
    Rig rig({eager(), eager(), eager()});
    rig.engine->post_message("sam", "Anyone up for a hike?");
    rig.engine->step();
    auto d = rig.engine->last_decisions();
    int speakers = 0, outvoted = 0;
    double best = kNegInf, winner = kNegInf;
    for (const auto& x : d) {
        speakers += x.speaks();
        outvoted += x.reason == DecisionReason::outvoted;
        best = std::max(best, x.score);
        if (x.speaks()) winner = x.score;
    }
    EXPECT_EQ(speakers, 1);
    EXPECT_EQ(outvoted, 2);
    EXPECT_EQ(winner, best);
    EXPECT_EQ(of_type(rig.events(), "thought_expressed").size(), 1u);
}

TEST(Engine, RoundRobinArbitrationRotates) {
    Rig rig({eager(), eager(), eager()}, 64, Arbitration::round_robin);
    rig.engine->post_message("sam", "Hello everyone");
    std::vector<std::string> speakers;
    for (int i = 0; i < 4; ++i) {
        rig.engine->step();
        speakers.push_back(rig.engine->state().transcript().back().speaker);
    }
    EXPECT_EQ(speakers, (std::vector<std::string>{"alice", "bob", "carmen", "alice"}));
}

TEST(Engine, OfflineProviderDegradesToSilence) {
    Rig rig({eager()});
    rig.provider->set_offline(true);
    log_sink() = [](auto, auto) {};
    rig.engine->post_message("sam", "hello?");
    EXPECT_NO_THROW(rig.engine->step());
    log_sink() = nullptr;
    EXPECT_EQ(rig.engine->last_decisions()[0].reason, DecisionReason::none_motivated);
}

TEST(Engine, QueueOverflowDropsPausesThenRejects) {
    Rig rig({mute()}, 2);
    rig.clock->set(20);
    ASSERT_TRUE(rig.engine->pause_watchdog(20));
    rig.engine->post_message("sam", "a");
    EXPECT_EQ(rig.engine->queue_depth(), 2u);
    rig.engine->post_message("sam", "b");  // drops the pause
    EXPECT_EQ(rig.engine->queue_depth(), 2u);
    EXPECT_THROW(rig.engine->post_message("sam", "c"), QueueFull);
    rig.engine->step();
    EXPECT_EQ(of_type(rig.events(), "trigger")[0]["payload"]["kind"], "on_new_message");
}

TEST(Engine, ForceExpressAndConflicts) {
    Rig rig({mute()});
    rig.engine->post_message("sam", "Tell me about your weekend");
    rig.engine->step();
    const std::string tid = rig.engine->reservoir("alice").thoughts().at(1).id;
    const auto u = rig.engine->force_express(tid);
    EXPECT_EQ(u.speaker, "alice");
    auto events = rig.events();
    ASSERT_GE(events.size(), 2u);
    EXPECT_EQ(events[events.size() - 2]["type"], "thought_expressed");
    EXPECT_EQ(events[events.size() - 2]["payload"]["forced"], true);
    EXPECT_EQ(events.back()["type"], "utterance");
    EXPECT_EQ(rig.engine->thought(tid)->state, ThoughtState::expressed);
    EXPECT_THROW(rig.engine->force_express(tid), Conflict);
    EXPECT_THROW(rig.engine->force_express("alice.t999"), NotFound);
    EXPECT_THROW(rig.engine->delete_thought(tid), Conflict);
    EXPECT_EQ(rig.engine->queue_depth(), 1u);
}

TEST(Engine, DeleteThoughtAndReasoning) {
    Rig rig({mute()});
    rig.engine->post_message("sam", "Tell me about your weekend");
    rig.engine->step();
    auto why = rig.engine->reasoning("alice.t1");
    EXPECT_LE(why["positive_factors"].size(), 2u);
    EXPECT_LE(why["negative_factors"].size(), 2u);
    EXPECT_TRUE(why.contains("distribution"));
    rig.engine->delete_thought("alice.t1");
    EXPECT_EQ(rig.engine->thought("alice.t1")->state, ThoughtState::discarded);
    EXPECT_EQ(rig.events().back()["type"], "thought_discarded");
    EXPECT_THROW(rig.engine->force_express("alice.t1"), Conflict);
    EXPECT_THROW(rig.engine->reasoning("nope"), NotFound);
}

TEST(Engine, MemoryCommands) {
    Rig rig;
    auto added = rig.engine->add_memory("alice", {{"text", "I visited Kyoto"}, {"weight", 2.0}});
    EXPECT_EQ(added["id"], "alice.m3");
    auto before = rig.provider->embed_count();
    auto updated = rig.engine->update_memory("alice", "alice.m3", {{"text", "I visited Osaka"}});
    EXPECT_EQ(updated["text"], "I visited Osaka");
    EXPECT_EQ(rig.provider->embed_count(), before + 1);
    rig.engine->update_memory("alice", "alice.m3", {{"weight", 0.5}});
    EXPECT_EQ(rig.engine->memory("alice")[2]["weight"], 0.5);
    EXPECT_THROW(rig.engine->update_memory("alice", "alice.m3", {{"weight", 0}}), std::invalid_argument);
    rig.engine->delete_memory("alice", "alice.m3");
    EXPECT_THROW(rig.engine->delete_memory("alice", "alice.m3"), NotFound);
}

TEST(Engine, SettingsUpdatesValidateAtomically) {
    Rig rig;
    auto s = rig.engine->update_settings("alice", {{"imThreshold", 4.2}});
    EXPECT_DOUBLE_EQ(s.imThreshold, 4.2);
    EXPECT_THROW(rig.engine->update_settings("alice", {{"imThreshold", 9}}), InvalidConfig);
    EXPECT_THROW(rig.engine->update_settings("alice", {{"imThreshold", "high"}}), InvalidConfig);
    EXPECT_DOUBLE_EQ(rig.engine->settings("alice").imThreshold, 4.2);
    EXPECT_THROW(rig.engine->settings("sam"), NotFound);
}

TEST(Engine, SameSeedSameLog) {
    auto run = [] {
        Rig rig({ProactivityConfig{}, presets::non_stop_chatter()});
        rig.engine->post_message("sam", "What is everyone doing this weekend?");
        for (int i = 0; i < 5; ++i) {
            if (!rig.engine->step()) rig.engine->pause_watchdog(rig.engine->last_activity() + 10);
            rig.clock->advance(3);
        }
        return rig.engine->log().to_jsonl();
    };
    EXPECT_EQ(run(), run());
}

TEST(Engine, PruningEmitsDiscardEvents) {
    ProactivityConfig c = mute();
    c.max_live_thoughts = 4;
    Rig rig({c});
    rig.engine->post_message("sam", "one");
    rig.engine->step();
    rig.engine->post_message("sam", "two");
    rig.engine->step();
    EXPECT_EQ(rig.engine->reservoir("alice").live_count(), 4u);
    EXPECT_EQ(of_type(rig.events(), "thought_discarded").size(), 2u);
}

TEST(Engine, ParallelAgentsMatchSequential) {
    auto run = [](bool parallel) {
        auto provider = std::make_shared<MockProvider>(5);
        provider->enable_synthetic();
        EngineConfig cfg;
        cfg.seed = 4;
        cfg.parallel_agents = parallel;
        cfg.agents.push_back({agent("alice", {}, {"I like jazz."}), {}});
        cfg.agents.push_back({agent("bob", {}, {"I like chess."}), {}});
        cfg.humans.push_back(human("sam"));
        Engine e(cfg, provider, std::make_shared<VirtualClock>());
        e.post_message("sam", "Any hobbies?");
        e.step();
        return e.log().to_jsonl();
    };
    EXPECT_EQ(run(false), run(true));
}
