#pragma once
// Multi-agent simulation harness.
//
// Runs N conversations among agents built from persona seeds, either through
// the engine (inner_thoughts) or through a next-speaker-prediction baseline.
// Paired plans run both conditions on identical personas, initiators and
// icebreakers. Everything is seeded and runs on a virtual clock, so a plan
// plus a seed fully determines the logs when the mock provider is used.

#include "inner_thoughts/engine.hpp"
#include "inner_thoughts/mock_provider.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <thread>

namespace inner_thoughts {

struct PersonaSeed {
    std::string name;
    std::vector<std::string> lines;
};

inline void from_json(const json& j, PersonaSeed& s) {
    s.name = j.at("name").get<std::string>();
    s.lines = j.at("lines").get<std::vector<std::string>>();
}
inline void to_json(json& j, const PersonaSeed& s) { j = json{{"name", s.name}, {"lines", s.lines}}; }

namespace bundled {

// Same content as data/personas.json and data/icebreakers.json.
inline std::vector<PersonaSeed> persona_seeds() {
    return {
        {"Alice", {"I work as a nurse on night shifts.", "I love baking bread on weekends.",
                   "I have two cats named Miso and Tofu.", "I want to run a marathon next year."}},
        {"Bob", {"I am a high school history teacher.", "I enjoy hiking in the mountains.",
                 "I once saw a bear up close on a trail.", "I play the guitar badly but often."}},
        {"Carmen", {"I moved here from Spain three years ago.", "I love cooking paella for friends.",
                    "I am studying to become an architect.", "I hope to design a library someday."}},
        {"Daisy", {"I write songs in my spare time.", "I work at a small coffee roastery.",
                   "I like listening to jazz records on vinyl.", "I grew up on a farm with horses."}},
        {"Ethan", {"I am a software developer at a startup.", "I enjoy playing board games with friends.",
                   "I have never left my home country.", "I plan to travel to Japan next spring."}},
        {"Farah", {"I am a veterinarian.", "I love reading mystery novels.",
                   "I volunteer at an animal shelter on Sundays.", "I am afraid of deep water."}},
        {"George", {"I am retired after forty years as an electrician.", "I enjoy fishing at the lake every morning.",
                    "I have five grandchildren.", "I collect old radios and fix them up."}},
        {"Hana", {"I am a graduate student in marine biology.", "I love scuba diving.", "I make my own pottery.",
                  "I want to start a podcast about the ocean."}},
    };
}

/// The first three are the published examples; the rest are our own.
inline std::vector<std::string> icebreakers() {
    return {"What did you do last weekend?",
            "What is your favorite thing to do?",
            "Hey!",
            "How is everyone doing today?",
            "Does anyone have plans for the holidays?",
            "What kind of music have you been listening to lately?",
            "Has anyone read a good book recently?",
            "What do you all do for work?",
            "Any good food recommendations around here?",
            "What is the best trip you have ever taken?"};
}

}  // namespace bundled

inline std::string to_lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// One agent per seed for the first pool_size seeds (after a seeded shuffle),
/// each with its own lines plus two lines borrowed from other agents' seeds.
inline std::vector<Participant> build_personas(std::vector<PersonaSeed> seeds, std::size_t pool_size, Rng& rng,
                                               const ProactivityConfig& cfg = presets::simulation()) {
    if (pool_size < 2) throw std::invalid_argument("persona pool needs at least 2 agents to share lines");
    if (pool_size > seeds.size())
        throw std::invalid_argument("persona pool of " + std::to_string(pool_size) + " needs that many seeds, got " +
                                    std::to_string(seeds.size()));
    for (const auto& s : seeds)
        if (s.lines.size() < 3) throw std::invalid_argument("persona seed '" + s.name + "' has fewer than 3 lines");
    rng.shuffle(seeds);
    seeds.resize(pool_size);

    std::vector<Participant> out;
    for (std::size_t i = 0; i < pool_size; ++i) {
        Participant p;
        p.id = to_lower(seeds[i].name);
        p.display_name = seeds[i].name;
        p.kind = ParticipantKind::agent;
        p.proactivity = cfg;
        p.persona = seeds[i].lines;

        std::vector<std::string> foreign;
        for (std::size_t j = 0; j < pool_size; ++j)
            if (j != i)
                for (const auto& line : seeds[j].lines) foreign.push_back(line);
        for (int k = 0; k < 2 && !foreign.empty(); ++k) {
            const std::size_t pick = rng.below(foreign.size());
            p.persona.push_back(foreign[pick]);
            foreign.erase(foreign.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plans

enum class Condition { inner_thoughts, baseline, paired };

NLOHMANN_JSON_SERIALIZE_ENUM(Condition, {{Condition::inner_thoughts, "inner_thoughts"},
                                         {Condition::baseline, "baseline"},
                                         {Condition::paired, "paired"}})

struct SimulationPlan {
    Condition condition = Condition::inner_thoughts;
    int num_conversations = 1;  // per condition
    int agents_per_conversation = 4;
    int turns = 15;
    std::size_t pool_size = 8;
    std::vector<std::string> icebreakers = bundled::icebreakers();
    std::vector<PersonaSeed> persona_seeds = bundled::persona_seeds();
    ProactivityConfig proactivity = presets::simulation();
    std::uint64_t rng_seed = 0;
    double seconds_per_cycle = 3.0;  // virtual time spent per processed trigger
    int max_triggers_per_turn = 20;  // stall guard
    int jobs = 1;

    std::vector<std::string> problems() const {
        std::vector<std::string> p;
        if (num_conversations < 1) p.emplace_back("num_conversations must be >= 1");
        if (agents_per_conversation < 2) p.emplace_back("agents_per_conversation must be >= 2");
        if (turns < 1) p.emplace_back("turns must be >= 1");
        if (static_cast<std::size_t>(agents_per_conversation) > pool_size)
            p.emplace_back("agents_per_conversation must be <= pool_size");
        if (pool_size > persona_seeds.size()) p.emplace_back("pool_size exceeds the number of persona seeds");
        if (icebreakers.empty()) p.emplace_back("icebreakers must be nonempty");
        if (jobs < 1) p.emplace_back("jobs must be >= 1");
        if (max_triggers_per_turn < 1) p.emplace_back("max_triggers_per_turn must be >= 1");
        for (auto& s : proactivity.problems()) p.push_back("proactivity: " + s);
        return p;
    }
    void validate() const {
        if (auto p = problems(); !p.empty()) throw InvalidConfig(std::move(p));
    }
};

/// Parses and validates a plan. Throws InvalidConfig on any problem.
inline SimulationPlan plan_from_json(const json& j) {
    SimulationPlan plan;
    try {
        if (!j.is_object()) throw InvalidConfig({"plan must be a JSON object"});
        if (auto it = j.find("condition"); it != j.end()) {
            const auto c = it->get<std::string>();
            if (c != "inner_thoughts" && c != "baseline" && c != "paired")
                throw InvalidConfig({"unknown condition: " + c});
            plan.condition = it->get<Condition>();
        }
        plan.num_conversations = j.value("num_conversations", plan.num_conversations);
        plan.agents_per_conversation = j.value("agents_per_conversation", plan.agents_per_conversation);
        plan.turns = j.value("turns", plan.turns);
        plan.pool_size = j.value("pool_size", plan.pool_size);
        plan.rng_seed = j.value("rng_seed", plan.rng_seed);
        plan.seconds_per_cycle = j.value("seconds_per_cycle", plan.seconds_per_cycle);
        plan.max_triggers_per_turn = j.value("max_triggers_per_turn", plan.max_triggers_per_turn);
        plan.jobs = j.value("jobs", plan.jobs);
        if (auto it = j.find("icebreakers"); it != j.end()) plan.icebreakers = it->get<std::vector<std::string>>();
        if (auto it = j.find("personas"); it != j.end()) plan.persona_seeds = it->get<std::vector<PersonaSeed>>();
        if (auto it = j.find("preset"); it != j.end()) {
            auto preset = presets::by_name(it->get<std::string>());
            if (!preset) throw InvalidConfig({"unknown preset: " + it->get<std::string>()});
            plan.proactivity = *preset;
        }
        if (auto it = j.find("proactivity"); it != j.end()) from_json(*it, plan.proactivity);
    } catch (const json::exception& e) {
        throw InvalidConfig({std::string("bad plan: ") + e.what()});
    }
    plan.validate();
    return plan;
}

inline json to_json_plan(const SimulationPlan& p) {
    return json{{"condition", p.condition},
                {"num_conversations", p.num_conversations},
                {"agents_per_conversation", p.agents_per_conversation},
                {"turns", p.turns},
                {"pool_size", p.pool_size},
                {"rng_seed", p.rng_seed},
                {"icebreakers", p.icebreakers},
                {"personas", p.persona_seeds},
                {"proactivity", p.proactivity}};
}

/// Everything that is shared between the two conditions of a matched pair.
struct ConversationSetup {
    int index = 0;  // 0-based
    std::uint64_t seed = 0;
    std::vector<Participant> agents;
    std::string initiator;  // participant id
    std::string icebreaker;
};

inline ConversationSetup conversation_setup(const SimulationPlan& plan, const std::vector<Participant>& pool,
                                            int index) {
    ConversationSetup s;
    s.index = index;
    s.seed = mix_seed(plan.rng_seed, static_cast<std::uint64_t>(index) + 1);
    Rng rng(s.seed);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    order.resize(static_cast<std::size_t>(plan.agents_per_conversation));
    std::sort(order.begin(), order.end());
    for (auto i : order) s.agents.push_back(pool[i]);
    s.initiator = s.agents[rng.below(s.agents.size())].id;
    s.icebreaker = plan.icebreakers[rng.below(plan.icebreakers.size())];
    return s;
}

inline std::string log_name(Condition c, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_conv%03d.jsonl", index + 1);
    return json(c).get<std::string>() + buf;
}

using ProviderFactory = std::function<std::shared_ptr<Provider>(std::uint64_t conversation_seed)>;

inline ProviderFactory mock_provider_factory() {
    return [](std::uint64_t seed) {
        auto p = std::make_shared<MockProvider>(seed);
        p->enable_synthetic();
        return p;
    };
}

// ---------------------------------------------------------------------------
// Conditions

/// Runs one conversation through the engine until `turns` utterances exist.
inline void run_inner_thoughts(const SimulationPlan& plan, const ConversationSetup& setup,
                               std::shared_ptr<Provider> provider, EventLog& log_out) {
    EngineConfig cfg;
    cfg.conversation_id = "inner_thoughts_conv" + std::to_string(setup.index + 1);
    cfg.seed = setup.seed;
    cfg.pause_seconds = plan.proactivity.pause_trigger_seconds;
    cfg.metadata = {{"condition", "inner_thoughts"},
                    {"initiator", setup.initiator},
                    {"icebreaker", setup.icebreaker}};
    for (const auto& a : setup.agents) cfg.agents.push_back({a, {}});
    auto clock = std::make_shared<VirtualClock>();
    auto log = std::shared_ptr<EventLog>(&log_out, [](EventLog*) {});
    Engine engine(std::move(cfg), std::move(provider), clock, log);

    engine.post_message(setup.initiator, setup.icebreaker);
    const long guard = static_cast<long>(plan.turns) * plan.max_triggers_per_turn;
    long triggers = 0;
    auto utterances = [&] { return static_cast<int>(engine.state().current_timestep()); };
    while (utterances() < plan.turns) {
        if (++triggers > guard)
            throw std::runtime_error("conversation stalled after " + std::to_string(guard) + " triggers");
        if (engine.step()) {
            clock->advance(plan.seconds_per_cycle);
            continue;
        }
        clock->set(engine.last_activity() + engine.config().pause_seconds);
        if (!engine.pause_watchdog(clock->now())) throw std::logic_error("pause watchdog did not fire when idle");
    }
}

/// Baseline: the model picks the next speaker from names, then that speaker
/// replies from their persona alone. No thoughts, no scores.
inline void run_baseline(const SimulationPlan& plan, const ConversationSetup& setup, Provider& provider,
                         EventLog& log) {
    ConversationState state;
    state.id = "baseline_conv" + std::to_string(setup.index + 1);
    state.rng_seed = setup.seed;
    for (const auto& a : setup.agents) state.add_participant(a);
    Rng rng(mix_seed(setup.seed, 0xB45E));
    double now = 0.0;

    log.append(events::session, 0, now, std::nullopt,
               {{"condition", "baseline"},
                {"conversation", state.id},
                {"participants", state.participants},
                {"seed", setup.seed},
                {"initiator", setup.initiator},
                {"icebreaker", setup.icebreaker}});
    auto say = [&](const std::string& speaker, std::string text) {
        const Utterance& u = state.append_utterance(speaker, std::move(text), now);
        log.append(events::utterance, u.timestep, now, u.speaker, json(u));
        now += plan.seconds_per_cycle;
    };
    say(setup.initiator, setup.icebreaker);

    while (state.current_timestep() < plan.turns) {
        const Utterance& last = state.transcript().back();
        CompletionRequest pick;
        pick.task = tasks::next_speaker;
        pick.system_prompt = "You predict who speaks next in a group conversation.";
        pick.user_prompt = prompts::render_participants(state) + "Last utterances:\n" + prompts::render_window(state, 5) +
                           prompts::kLatest + prompts::render_utterance(state, last) +
                           "\n\nWho should speak next? Answer with one participant name only.";
        pick.max_tokens = 8;
        pick.temperature = 0.0;
        const std::string answer = to_lower(provider.complete(pick).text);
        std::string next;
        for (const auto& p : state.participants)
            if (p.id != last.speaker && (answer.find(to_lower(p.name())) != std::string::npos || answer == p.id))
                next = p.id;
        if (next.empty()) {
            std::vector<std::string> others;
            for (const auto& p : state.participants)
                if (p.id != last.speaker) others.push_back(p.id);
            next = others[rng.below(others.size())];
            log_warn("baseline speaker prediction '" + answer + "' unusable; picked " + next);
        }

        const Participant& speaker = state.participant(next);
        CompletionRequest reply;
        reply.task = tasks::persona_reply;
        reply.system_prompt = "You are " + speaker.name() + ", chatting casually with a group.";
        reply.user_prompt = std::string(prompts::kYouAre) + speaker.name() + "\n" + prompts::render_persona(speaker) +
                            "Conversation so far:\n" + prompts::render_window(state, 5) + prompts::kLatest +
                            prompts::render_utterance(state, last) +
                            "\n\nWrite your next message in the conversation, staying in character. One or two "
                            "short sentences. Output only the message.";
        reply.max_tokens = 120;
        std::string text = provider.complete(reply).text;
        if (text.empty()) text = "...";
        say(next, std::move(text));
    }
}

// ---------------------------------------------------------------------------
// Metrics

struct ConversationMetrics {
    std::string condition;
    std::string file;
    int utterances = 0;
    std::map<std::string, int> per_agent;
    int transitions = 0;  // consecutive utterances by different speakers
    int interruptions = 0;
    int retained_expressions = 0;
    int thought_events = 0;
    std::vector<double> expressed_scores;

    /// Normalized speaker entropy: 1 when every participant spoke equally often.
    double balance(std::size_t participants) const {
        if (utterances == 0 || participants < 2) return 0.0;
        double h = 0.0;
        for (const auto& [_, n] : per_agent) {
            const double p = static_cast<double>(n) / utterances;
            if (p > 0) h -= p * std::log(p);
        }
        return h / std::log(static_cast<double>(participants));
    }
};

inline ConversationMetrics measure(const std::vector<json>& events, std::string file = {}) {
    ConversationMetrics m;
    m.file = std::move(file);
    std::string prev;
    for (const auto& e : events) {
        const std::string type = e.at("type").get<std::string>();
        const json& payload = e.contains("payload") ? e["payload"] : json::object();
        if (type == events::session) {
            m.condition = payload.value("condition", std::string());
            for (const auto& p : payload.value("participants", json::array()))
                if (p.value("kind", std::string()) == "agent") m.per_agent[p.at("id").get<std::string>()];
        } else if (type == events::utterance) {
            ++m.utterances;
            const std::string speaker = payload.value("speaker", std::string());
            ++m.per_agent[speaker];
            if (!prev.empty() && speaker != prev) ++m.transitions;
            prev = speaker;
        } else if (type == events::decision) {
            if (payload.value("reason", std::string()) == "interrupt") ++m.interruptions;
        } else if (type == events::thought_expressed) {
            if (payload.value("retained", false)) ++m.retained_expressions;
            if (payload.contains("score") && payload["score"].is_number())
                m.expressed_scores.push_back(payload["score"].get<double>());
        }
        if (type.rfind("thought_", 0) == 0) ++m.thought_events;
    }
    return m;
}

/// Per-condition descriptive statistics over a set of JSONL logs. Unreadable
/// or malformed logs are skipped with a warning.
inline json summarize(const std::vector<std::filesystem::path>& logs) {
    std::map<std::string, std::vector<ConversationMetrics>> by_condition;
    json skipped = json::array();
    for (const auto& path : logs) {
        std::ifstream in(path);
        try {
            if (!in) throw std::runtime_error("cannot open");
            ConversationMetrics m = measure(parse_jsonl(in), path.filename().string());
            if (m.condition.empty()) {
                const std::string stem = path.filename().string();
                m.condition = stem.substr(0, stem.find("_conv"));
            }
            by_condition[m.condition].push_back(std::move(m));
        } catch (const std::exception& e) {
            log_warn("skipping log " + path.string() + ": " + e.what());
            skipped.push_back({{"file", path.string()}, {"error", e.what()}});
        }
    }

    json report{{"conditions", json::object()}, {"skipped", skipped}};
    for (const auto& [condition, convs] : by_condition) {
        int utterances = 0, transitions = 0, interruptions = 0, retained = 0, thought_events = 0;
        std::map<std::string, int> per_agent;
        std::vector<double> scores;
        double balance_sum = 0.0;
        json per_conv = json::array();
        for (const auto& m : convs) {
            utterances += m.utterances;
            transitions += m.transitions;
            interruptions += m.interruptions;
            retained += m.retained_expressions;
            thought_events += m.thought_events;
            for (const auto& [a, n] : m.per_agent) per_agent[a] += n;
            scores.insert(scores.end(), m.expressed_scores.begin(), m.expressed_scores.end());
            const double b = m.balance(m.per_agent.size());
            balance_sum += b;
            json shares = json::object();
            for (const auto& [a, n] : m.per_agent)
                shares[a] = m.utterances ? static_cast<double>(n) / m.utterances : 0.0;
            per_conv.push_back({{"file", m.file},
                                {"utterances", m.utterances},
                                {"per_agent", m.per_agent},
                                {"per_agent_share", shares},
                                {"speaker_balance", b},
                                {"transitions", m.transitions},
                                {"interruptions", m.interruptions},
                                {"retained_expressions", m.retained_expressions}});
        }
        json shares = json::object();
        for (const auto& [a, n] : per_agent) shares[a] = utterances ? static_cast<double>(n) / utterances : 0.0;
        double mean_motivation = 0.0;
        for (double s : scores) mean_motivation += s;
        report["conditions"][condition] = {
            {"conversations", convs.size()},
            {"utterances", utterances},
            {"utterances_per_agent", per_agent},
            {"per_agent_share", shares},
            {"speaker_balance", balance_sum / static_cast<double>(convs.size())},
            {"transitions", transitions},
            {"interruptions", interruptions},
            {"retained_expressions", retained},
            {"thought_events", thought_events},
            {"mean_expressed_motivation",
             scores.empty() ? json(nullptr) : json(mean_motivation / static_cast<double>(scores.size()))},
            {"per_conversation", per_conv}};
    }
    return report;
}

// ---------------------------------------------------------------------------
// Runs

struct SimulationFailure {
    Condition condition;
    int index;
    std::string error;
};

struct SimulationResult {
    std::vector<std::filesystem::path> logs;
    std::vector<SimulationFailure> failures;
    json metrics;
};

/// Runs every conversation of the plan, writes one JSONL log per
/// conversation plus metrics.json into out_dir. A failing conversation is
/// recorded and the run continues.
inline SimulationResult run_simulation(const SimulationPlan& plan, const std::filesystem::path& out_dir,
                                       ProviderFactory factory = mock_provider_factory()) {
    plan.validate();
    std::filesystem::create_directories(out_dir);
    Rng persona_rng(mix_seed(plan.rng_seed, 0x9E85));
    const auto pool = build_personas(plan.persona_seeds, plan.pool_size, persona_rng, plan.proactivity);

    std::vector<Condition> conditions;
    if (plan.condition == Condition::paired) conditions = {Condition::baseline, Condition::inner_thoughts};
    else conditions = {plan.condition};

    struct Job {
        Condition condition;
        ConversationSetup setup;
    };
    std::vector<Job> jobs;
    for (int i = 0; i < plan.num_conversations; ++i) {
        const ConversationSetup setup = conversation_setup(plan, pool, i);
        for (auto c : conditions) jobs.push_back({c, setup});
    }

    std::vector<std::optional<std::string>> errors(jobs.size());
    std::vector<std::filesystem::path> paths(jobs.size());
    auto run_job = [&](std::size_t k) {
        const Job& job = jobs[k];
        paths[k] = out_dir / log_name(job.condition, job.setup.index);
        EventLog log;
        try {
            log.open_file(paths[k].string());
            auto provider = factory(job.setup.seed);
            if (job.condition == Condition::baseline) run_baseline(plan, job.setup, *provider, log);
            else run_inner_thoughts(plan, job.setup, provider, log);
        } catch (const std::exception& e) {
            errors[k] = e.what();
            log_warn(paths[k].filename().string() + " failed: " + e.what());
        }
        log.close();
    };

    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(plan.jobs), jobs.size());
    if (workers <= 1) {
        for (std::size_t k = 0; k < jobs.size(); ++k) run_job(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool_threads;
        for (std::size_t w = 0; w < workers; ++w)
            pool_threads.emplace_back([&] {
                for (std::size_t k; (k = next++) < jobs.size();) run_job(k);
            });
        for (auto& t : pool_threads) t.join();
    }

    SimulationResult result;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        result.logs.push_back(paths[k]);
        if (errors[k]) result.failures.push_back({jobs[k].condition, jobs[k].setup.index, *errors[k]});
    }
    result.metrics = summarize(result.logs);
    result.metrics["plan"] = to_json_plan(plan);
    json failures = json::array();
    for (const auto& f : result.failures)
        failures.push_back({{"condition", f.condition}, {"conversation", f.index + 1}, {"error", f.error}});
    result.metrics["failures"] = failures;
    std::ofstream(out_dir / "metrics.json") << result.metrics.dump(2) << '\n';
    return result;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayOptions {
    double speed = 1.0;  // 0 = no pacing
    bool show_thoughts = false;
    double chars_per_second = 15.0;
};

/// Prints the transcript of a log, pausing in proportion to message length.
/// Returns the number of utterances printed.
inline int replay_transcript(const std::vector<json>& events, std::ostream& out, const ReplayOptions& opt,
                             const std::function<void(double)>& sleep = {}) {
    std::map<std::string, std::string> names;
    int printed = 0;
    for (const auto& e : events) {
        const std::string type = e.value("type", std::string());
        const json payload = e.value("payload", json::object());
        const std::string agent = e.contains("agent") && e["agent"].is_string() ? e["agent"].get<std::string>() : "";
        if (type == events::session) {
            for (const auto& p : payload.value("participants", json::array()))
                names[p.value("id", std::string())] = p.value("display_name", p.value("id", std::string()));
        } else if (type == events::utterance) {
            const std::string text = payload.value("text", std::string());
            if (opt.speed > 0 && sleep) sleep(static_cast<double>(text.size()) / opt.chars_per_second / opt.speed);
            const std::string speaker = payload.value("speaker", std::string());
            out << (names.count(speaker) ? names[speaker] : speaker) << ": " << text << '\n';
            ++printed;
        } else if (opt.show_thoughts && type == events::thought_created) {
            out << "\x1b[2m  (" << (names.count(agent) ? names[agent] : agent) << " thinks: "
                << payload.value("text", std::string()) << ")\x1b[0m\n";
        } else if (opt.show_thoughts && type == events::decision && payload.value("action", std::string()) == "speak") {
            out << "\x1b[2m  [" << (names.count(agent) ? names[agent] : agent) << " wants to speak: "
                << payload.value("reason", std::string()) << "]\x1b[0m\n";
        }
    }
    out.flush();
    return printed;
}

}  // namespace inner_thoughts
