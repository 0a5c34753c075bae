// inner-thoughts: run simulations, replay logs, serve the API, and poke at
// single evaluation/classification calls.
//
// Exit codes: 0 ok, 1 runtime failure (e.g. a conversation failed),
// 2 bad input (plan, config or log), 3 port busy.

#include "inner_thoughts/openai_provider.hpp"
#include "inner_thoughts/server.hpp"
#include "inner_thoughts/simulator.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <ctime>
#include <iostream>

namespace it = inner_thoughts;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kBadInput = 2;
constexpr int kPortBusy = 3;

struct BadInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

it::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw BadInput("cannot open " + path);
    it::json j = it::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw BadInput(path + " is not valid JSON");
    return j;
}

it::OpenAIConfig live_config(const std::string& path) {
    it::OpenAIConfig cfg;
    if (!path.empty()) from_json(read_json_file(path), cfg);
    if (const char* v = std::getenv("INNER_THOUGHTS_BASE_URL")) cfg.base_url = v;
    if (const char* v = std::getenv("INNER_THOUGHTS_MODEL")) cfg.chat_model = v;
    if (const char* v = std::getenv("INNER_THOUGHTS_EMBEDDING_MODEL")) cfg.embedding_model = v;
    return cfg;
}

std::shared_ptr<it::Provider> make_provider(const std::string& kind, std::uint64_t seed, const std::string& live_path) {
    if (kind == "live") return std::make_shared<it::OpenAIProvider>(live_config(live_path));
    auto mock = std::make_shared<it::MockProvider>(seed);
    mock->enable_synthetic();
    return mock;
}

std::string timestamp() {
    std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", std::localtime(&now));
    return buf;
}

// -- simulate ----------------------------------------------------------------

struct SimulateArgs {
    std::string plan;
    std::string condition = "inner_thoughts";
    int convs = 1;
    int agents = 4;
    int turns = 15;
    std::string provider = "mock";
    std::string live;
    std::optional<std::uint64_t> seed;
    std::string out;
    int jobs = 1;
};

int simulate(const SimulateArgs& a) {
    it::SimulationPlan plan;
    try {
        if (!a.plan.empty()) {
            plan = it::plan_from_json(read_json_file(a.plan));
        } else {
            plan = it::plan_from_json({{"condition", a.condition},
                                       {"num_conversations", a.convs},
                                       {"agents_per_conversation", a.agents},
                                       {"turns", a.turns}});
        }
        if (a.seed) plan.rng_seed = *a.seed;
        plan.jobs = a.jobs;
        plan.validate();
    } catch (const it::InvalidConfig& e) {
        std::cerr << "bad plan: " << e.what() << "\n";
        return kBadInput;
    } catch (const BadInput& e) {
        std::cerr << "bad plan: " << e.what() << "\n";
        return kBadInput;
    }

    const fs::path out = a.out.empty() ? fs::path("runs") / timestamp() : fs::path(a.out);
    it::ProviderFactory factory = it::mock_provider_factory();
    if (a.provider == "live") {
        auto cfg = live_config(a.live);
        factory = [cfg](std::uint64_t) { return std::make_shared<it::OpenAIProvider>(cfg); };
    }
    const auto result = it::run_simulation(plan, out, factory);
    std::cout << "wrote " << result.logs.size() << " logs to " << out.string() << "\n";
    for (const auto& [condition, m] : result.metrics["conditions"].items())
        std::cout << condition << ": " << m["conversations"] << " conversations, " << m["utterances"]
                  << " utterances, balance " << m["speaker_balance"] << ", interruptions " << m["interruptions"]
                  << ", retained expressions " << m["retained_expressions"] << "\n";
    for (const auto& f : result.failures)
        std::cerr << it::json(f.condition).get<std::string>() << " conversation " << f.index + 1
                  << " failed: " << f.error << "\n";
    return result.failures.empty() ? kOk : kFailed;
}

// -- replay ------------------------------------------------------------------

int replay(const std::string& path, double speed, bool show_thoughts) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << "\n";
        return kBadInput;
    }
    std::vector<it::json> events;
    try {
        events = it::parse_jsonl(in);
    } catch (const std::exception& e) {
        std::cerr << path << ": " << e.what() << "\n";
        return kBadInput;
    }
    it::ReplayOptions opt;
    opt.speed = speed;
    opt.show_thoughts = show_thoughts;
    it::replay_transcript(events, std::cout, opt, [](double s) {
        std::this_thread::sleep_for(std::chrono::duration<double>(s));
    });
    return kOk;
}

// -- serve -------------------------------------------------------------------

std::atomic<bool> g_interrupted{false};
extern "C" void on_signal(int) { g_interrupted = true; }

/// A config file is either a full engine config (has "agents") or a preset
/// file, which is applied to a small demo conversation.
it::EngineConfig serve_config(const std::string& path, std::uint64_t seed) {
    it::json j = path.empty() ? it::json{{"preset", "active_contributor"}} : read_json_file(path);
    it::EngineConfig cfg;
    if (j.contains("agents")) {
        from_json(j, cfg);
    } else {
        it::ProactivityConfig pc;
        if (j.contains("preset")) {
            auto p = it::presets::by_name(j["preset"].get<std::string>());
            if (!p) throw it::InvalidConfig({"unknown preset: " + j["preset"].get<std::string>()});
            pc = *p;
        }
        if (j.contains("proactivity")) from_json(j["proactivity"], pc);
        auto seeds = it::bundled::persona_seeds();
        for (std::size_t i = 0; i < 2; ++i) {
            it::Participant p;
            p.id = it::to_lower(seeds[i].name);
            p.display_name = seeds[i].name;
            p.kind = it::ParticipantKind::agent;
            p.persona = seeds[i].lines;
            p.proactivity = pc;
            cfg.agents.push_back({p, {}});
        }
        it::Participant you;
        you.id = "you";
        you.display_name = "You";
        you.kind = it::ParticipantKind::human;
        cfg.humans.push_back(you);
        cfg.conversation_id = "main";
    }
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

int serve(const std::string& host, int port, const std::string& config_path, const std::string& provider,
          const std::string& live, const std::string& log_dir, std::uint64_t seed) {
    it::EngineConfig cfg;
    try {
        cfg = serve_config(config_path, seed);
    } catch (const std::exception& e) {
        std::cerr << "bad config: " << e.what() << "\n";
        return kBadInput;
    }

    it::ServerOptions opt;
    opt.provider_factory = [provider, live, seed](const it::EngineConfig& c) {
        return make_provider(provider, it::mix_seed(seed, it::stable_hash(c.conversation_id)), live);
    };
    opt.auth_token = it::ServerOptions::token_from_env();
    if (!log_dir.empty()) opt.log_dir = fs::path(log_dir);
    it::Server server(std::move(opt));

    if (!server.bind(host, port)) {
        std::cerr << "port " << port << " is busy\n";
        return kPortBusy;
    }
    const std::string id = server.create_conversation(cfg);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([&] {
        while (!g_interrupted && !server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
        while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        server.stop();
    });
    std::cout << "serving conversation '" << id << "' on http://" << host << ":" << port << std::endl;
    server.listen();
    g_interrupted = true;
    watcher.join();
    std::cout << "stopped" << std::endl;
    return kOk;
}

// -- score-thought / classify-turn --------------------------------------------

/// Builds a conversation from "Name: text" lines; every named speaker becomes
/// a participant (the first `agent` one is an agent, the rest humans).
it::ConversationState conversation_from_lines(const std::vector<std::string>& lines, const std::string& agent,
                                              const std::vector<std::string>& extra = {}) {
    it::ConversationState state;
    state.id = "cli";
    auto ensure = [&](const std::string& name) {
        const std::string id = it::to_lower(name);
        if (state.find_participant(id)) return id;
        it::Participant p;
        p.id = id;
        p.display_name = name;
        p.kind = name == agent ? it::ParticipantKind::agent : it::ParticipantKind::human;
        if (p.kind == it::ParticipantKind::agent) p.proactivity = it::ProactivityConfig{};
        state.add_participant(p);
        return id;
    };
    if (!agent.empty()) ensure(agent);
    for (const auto& name : extra) ensure(name);
    for (const auto& line : lines) {
        const auto colon = line.find(':');
        if (colon == std::string::npos || colon == 0) throw BadInput("expected 'Name: text', got: " + line);
        std::string text = line.substr(colon + 1);
        while (!text.empty() && text.front() == ' ') text.erase(0, 1);
        state.append_utterance(ensure(line.substr(0, colon)), text);
    }
    return state;
}

int score_thought(const std::vector<std::string>& lines, const std::string& agent, const std::string& thought_text,
                  const std::string& provider, const std::string& live, std::uint64_t seed) {
    it::ConversationState state;
    try {
        state = conversation_from_lines(lines, agent);
    } catch (const BadInput& e) {
        std::cerr << e.what() << "\n";
        return kBadInput;
    }
    const it::Participant& a = state.participant(it::to_lower(agent));
    it::Thought th;
    th.id = "t1";
    th.owner = a.id;
    th.text = thought_text;
    th.created_at = state.current_timestep();
    auto p = make_provider(provider, seed, live);
    const auto score = it::evaluate_thought(a, state, th, *p, *a.proactivity, state.current_timestep());
    if (!score) {
        std::cerr << "evaluation failed\n";
        return kFailed;
    }
    std::cout << it::json(*score).dump(2) << "\n";
    return kOk;
}

int classify(const std::vector<std::string>& lines, const std::vector<std::string>& participants,
             const std::string& provider, const std::string& live, std::uint64_t seed) {
    it::ConversationState state;
    try {
        state = conversation_from_lines(lines, "", participants);
    } catch (const BadInput& e) {
        std::cerr << e.what() << "\n";
        return kBadInput;
    }
    auto p = make_provider(provider, seed, live);
    const auto pred = it::classify_turn(state, *p);
    std::cout << (pred.is_open() ? std::string("open_to_anyone") : "allocated:" + pred.addressee) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Proactive conversational agents with an inner thought reservoir"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    std::string provider = "mock";
    std::string live;
    auto provider_opts = [&](CLI::App* sub) {
        sub->add_option("--provider", provider, "mock or live")->check(CLI::IsMember({"mock", "live"}));
        sub->add_option("--live-config", live, "JSON with base_url, chat_model, embedding_model, api_key_env");
    };

    SimulateArgs sim;
    auto* simulate_cmd = app.add_subcommand("simulate", "Run simulated multi-agent conversations");
    simulate_cmd->add_option("--plan", sim.plan, "Plan JSON file");
    simulate_cmd->add_option("--condition", sim.condition, "inner_thoughts, baseline or paired");
    simulate_cmd->add_option("--convs", sim.convs, "Conversations per condition");
    simulate_cmd->add_option("--agents", sim.agents, "Agents per conversation");
    simulate_cmd->add_option("--turns", sim.turns, "Utterances per conversation");
    simulate_cmd->add_option("--seed", sim.seed, "RNG seed");
    simulate_cmd->add_option("--out", sim.out, "Output directory (default runs/<timestamp>)");
    simulate_cmd->add_option("--jobs", sim.jobs, "Conversations to run concurrently")->check(CLI::PositiveNumber);
    provider_opts(simulate_cmd);

    std::string log_path;
    double speed = 1.0;
    bool show_thoughts = false;
    auto* replay_cmd = app.add_subcommand("replay", "Print the transcript of a JSONL log");
    replay_cmd->add_option("--log", log_path, "JSONL log")->required();
    replay_cmd->add_option("--speed", speed, "Pacing multiplier; 0 prints instantly")->check(CLI::NonNegativeNumber);
    replay_cmd->add_flag("--show-thoughts", show_thoughts, "Interleave covert events");

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string config_path;
    std::string log_dir;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
    serve_cmd->add_option("--host", host);
    serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--config", config_path, "Engine config or preset JSON");
    serve_cmd->add_option("--log-dir", log_dir, "Mirror event logs here");
    serve_cmd->add_option("--seed", seed);
    provider_opts(serve_cmd);

    std::vector<std::string> lines;
    std::string agent;
    std::string thought;
    auto* score_cmd = app.add_subcommand("score-thought", "Evaluate one thought's intrinsic motivation");
    score_cmd->add_option("--line", lines, "Conversation line 'Name: text' (repeatable)")->required();
    score_cmd->add_option("--agent", agent, "Name of the thinking agent")->required();
    score_cmd->add_option("--thought", thought, "Thought text")->required();
    score_cmd->add_option("--seed", seed);
    provider_opts(score_cmd);

    auto* classify_cmd = app.add_subcommand("classify-turn", "Predict whether the next turn is open or allocated");
    classify_cmd->add_option("--line", lines, "Conversation line 'Name: text' (repeatable)")->required();
    std::vector<std::string> extra;
    classify_cmd->add_option("--participant", extra, "Participant who has not spoken yet (repeatable)");
    classify_cmd->add_option("--seed", seed);
    provider_opts(classify_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate_cmd) {
            sim.provider = provider;
            sim.live = live;
            return simulate(sim);
        }
        if (*replay_cmd) return replay(log_path, speed, show_thoughts);
        if (*serve_cmd) return serve(host, port, config_path, provider, live, log_dir, seed);
        if (*score_cmd) return score_thought(lines, agent, thought, provider, live, seed);
        if (*classify_cmd) return classify(lines, extra, provider, live, seed);
    } catch (const BadInput& e) {
        std::cerr << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailed;
    }
    return kOk;
}
