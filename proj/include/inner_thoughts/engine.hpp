#pragma once
// Trigger queue and cognition-cycle orchestration.
//
// Triggers (new messages, pauses) are queued and processed strictly in
// order. Each cycle runs, per agent: retrieval, formation, evaluation and a
// participation decision; arbitration then lets at most one agent speak.
// While triggers are waiting in the queue, agents hold back.
//
// Threading: any thread may call the ingress, command and read methods.
// Cycles work on snapshots and make provider calls without holding the
// state lock, so readers and ingress are never blocked on a model call.
// Only one cycle or command runs at a time.

#include "inner_thoughts/cognition.hpp"
#include "inner_thoughts/evaluation.hpp"
#include "inner_thoughts/event_log.hpp"
#include "inner_thoughts/participation.hpp"
#include "inner_thoughts/presets.hpp"

#include <deque>
#include <map>
#include <shared_mutex>

namespace inner_thoughts {

class NotFound : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class Conflict : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class QueueFull : public std::runtime_error {
public:
    QueueFull() : std::runtime_error("trigger queue is full") {}
};

// ---------------------------------------------------------------------------
// Configuration

struct TriggerEvent {
    enum class Kind { on_new_message, on_pause };
    Kind kind = Kind::on_new_message;
    std::optional<std::string> utterance;  // set iff on_new_message
    double enqueued_at = 0.0;
    Timestep timestep = 0;
    std::uint64_t seq = 0;  // assigned by enqueue
    double silence_seconds = 0.0;

    bool is_pause() const noexcept { return kind == Kind::on_pause; }
};

NLOHMANN_JSON_SERIALIZE_ENUM(TriggerEvent::Kind, {{TriggerEvent::Kind::on_new_message, "on_new_message"},
                                                  {TriggerEvent::Kind::on_pause, "on_pause"}})

inline void to_json(json& j, const TriggerEvent& e) {
    j = json{{"kind", e.kind},
             {"utterance", e.utterance ? json(*e.utterance) : json(nullptr)},
             {"enqueued_at", e.enqueued_at},
             {"timestep", e.timestep},
             {"seq", e.seq}};
    if (e.is_pause()) j["silence_seconds"] = e.silence_seconds;
}

enum class Arbitration { highest_score, round_robin };

NLOHMANN_JSON_SERIALIZE_ENUM(Arbitration, {{Arbitration::highest_score, "highest_score"},
                                           {Arbitration::round_robin, "round_robin"}})

struct AgentSpec {
    Participant participant;
    std::vector<MemoryItem> memory;  // ids and embeddings assigned by the engine
};

struct EngineConfig {
    std::string conversation_id = "conversation";
    std::vector<AgentSpec> agents;
    std::vector<Participant> humans;
    Arbitration arbitration = Arbitration::highest_score;
    std::size_t max_queue = 64;
    double pause_seconds = 10.0;
    std::uint64_t seed = 0;
    bool parallel_agents = false;
    std::string id_prefix;
    json metadata = json::object();  // merged into the session event

    std::vector<std::string> problems() const {
        std::vector<std::string> p;
        if (!(pause_seconds > 0.0)) p.emplace_back("pause_seconds must be > 0");
        if (max_queue < 1) p.emplace_back("max_queue must be >= 1");
        std::set<std::string> ids;
        auto check_id = [&](const std::string& id) {
            if (id.empty()) p.emplace_back("participant id must be nonempty");
            if (!ids.insert(id).second) p.emplace_back("duplicate participant id: " + id);
        };
        for (const auto& a : agents) {
            check_id(a.participant.id);
            for (auto& s : (a.participant.proactivity ? *a.participant.proactivity : ProactivityConfig{}).problems())
                p.push_back(a.participant.id + ": " + s);
        }
        for (const auto& h : humans) check_id(h.id);
        return p;
    }
    void validate() const {
        if (auto p = problems(); !p.empty()) throw InvalidConfig(std::move(p));
    }
};

/// Guesses a memory kind for a first-person persona line.
inline MemoryKind infer_memory_kind(std::string_view line) {
    std::string s;
    for (char c : line) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (const char* k : {"i want", "i would", "i hope", "i plan", "my goal", "i'd like", "i am trying"})
        if (s.rfind(k, 0) == 0) return MemoryKind::objective;
    for (const char* k : {" like", " love", " enjoy", " fan of", " into ", "favorite"})
        if (s.find(k) != std::string::npos) return MemoryKind::interest;
    return MemoryKind::knowledge;
}

inline Participant participant_from_json(const json& j, ParticipantKind kind) {
    Participant p;
    p.kind = kind;
    p.id = j.at("id").get<std::string>();
    p.display_name = j.value("display_name", p.id);
    p.persona = j.value("persona", std::vector<std::string>{});
    if (kind == ParticipantKind::agent) {
        ProactivityConfig cfg;
        if (auto it = j.find("preset"); it != j.end()) {
            auto preset = presets::by_name(it->get<std::string>());
            if (!preset) throw InvalidConfig({"unknown preset: " + it->get<std::string>()});
            cfg = *preset;
        }
        if (auto it = j.find("proactivity"); it != j.end()) from_json(*it, cfg);
        p.proactivity = cfg;
    }
    return p;
}

inline void from_json(const json& j, EngineConfig& c) {
    c.conversation_id = j.value("id", c.conversation_id);
    c.agents.clear();
    for (const auto& a : j.value("agents", json::array())) {
        AgentSpec spec;
        spec.participant = participant_from_json(a, ParticipantKind::agent);
        for (const auto& m : a.value("memory", json::array())) spec.memory.push_back(memory_item_from_json(m));
        c.agents.push_back(std::move(spec));
    }
    c.humans.clear();
    for (const auto& h : j.value("humans", json::array()))
        c.humans.push_back(participant_from_json(h, ParticipantKind::human));
    if (auto it = j.find("arbitration"); it != j.end()) {
        const auto s = it->get<std::string>();
        if (s != "highest_score" && s != "round_robin") throw InvalidConfig({"unknown arbitration: " + s});
        c.arbitration = it->get<Arbitration>();
    }
    c.max_queue = j.value("max_queue", c.max_queue);
    c.pause_seconds = j.value("pause_seconds", c.pause_seconds);
    c.seed = j.value("seed", c.seed);
    c.parallel_agents = j.value("parallel_agents", c.parallel_agents);
}

inline void to_json(json& j, const EngineConfig& c) {
    j = json{{"id", c.conversation_id},
             {"arbitration", c.arbitration},
             {"max_queue", c.max_queue},
             {"pause_seconds", c.pause_seconds},
             {"seed", c.seed},
             {"parallel_agents", c.parallel_agents}};
    j["agents"] = json::array();
    for (const auto& a : c.agents) {
        json aj = a.participant;
        aj["memory"] = json::array();
        for (const auto& m : a.memory) aj["memory"].push_back({{"kind", m.kind}, {"text", m.text}, {"weight", m.weight}});
        j["agents"].push_back(std::move(aj));
    }
    j["humans"] = c.humans;
}

// ---------------------------------------------------------------------------
// Engine

class Engine {
public:
    Engine(EngineConfig config, std::shared_ptr<Provider> provider, std::shared_ptr<Clock> clock = nullptr,
           std::shared_ptr<EventLog> log = nullptr)
        : config_(std::move(config)),
          provider_(std::move(provider)),
          clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
          log_(log ? std::move(log) : std::make_shared<EventLog>()) {
        config_.validate();
        if (!provider_) throw std::invalid_argument("engine needs a provider");
        state_.id = config_.conversation_id;
        state_.rng_seed = config_.seed;
        state_.id_prefix = config_.id_prefix;
        for (auto& spec : config_.agents) {
            state_.add_participant(spec.participant);
            agent_order_.push_back(spec.participant.id);
            AgentMind mind;
            mind.reservoir.owner = spec.participant.id;
            for (const auto& line : spec.participant.persona) {
                MemoryItem m;
                m.kind = infer_memory_kind(line);
                m.text = line;
                add_memory_locked(spec.participant.id, mind, std::move(m));
            }
            for (auto m : spec.memory) add_memory_locked(spec.participant.id, mind, std::move(m));
            minds_.emplace(spec.participant.id, std::move(mind));
        }
        for (const auto& h : config_.humans) state_.add_participant(h);
        last_activity_ = clock_->now();

        json session = config_.metadata.is_object() ? config_.metadata : json::object();
        session["conversation"] = state_.id;
        session["participants"] = state_.participants;
        session["seed"] = config_.seed;
        log_->append(events::session, 0, clock_->now(), std::nullopt, std::move(session));
    }

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    const EngineConfig& config() const noexcept { return config_; }
    EventLog& log() noexcept { return *log_; }
    std::shared_ptr<EventLog> log_ptr() const noexcept { return log_; }
    Provider& provider() noexcept { return *provider_; }
    Clock& clock() noexcept { return *clock_; }
    const std::vector<std::string>& agent_ids() const noexcept { return agent_order_; }

    // -- ingress -------------------------------------------------------------

    /// Appends an utterance from any participant and queues its trigger.
    Utterance post_message(const std::string& speaker, std::string text) {
        Utterance u;
        {
            std::unique_lock lock(mu_);
            u = append_locked(speaker, std::move(text), std::nullopt);
        }
        enqueue_message(u);
        return u;
    }

    /// Queues a trigger; returns the queue depth. When full, the oldest
    /// pause triggers are dropped first.
    std::size_t enqueue(TriggerEvent event) {
        std::lock_guard lock(queue_mu_);
        if (event.kind == TriggerEvent::Kind::on_new_message && !event.utterance)
            throw std::invalid_argument("message trigger without utterance");
        if (event.is_pause()) event.utterance.reset();
        if (queue_.size() >= config_.max_queue) {
            auto it = std::find_if(queue_.begin(), queue_.end(), [](const TriggerEvent& e) { return e.is_pause(); });
            if (it == queue_.end()) throw QueueFull();
            queue_.erase(it);
            pause_pending_ = std::any_of(queue_.begin(), queue_.end(), [](const TriggerEvent& e) { return e.is_pause(); });
        }
        event.seq = ++trigger_seq_;
        if (event.is_pause()) pause_pending_ = true;
        queue_.push_back(std::move(event));
        queue_cv_.notify_all();
        return queue_.size();
    }

    std::size_t queue_depth() const {
        std::lock_guard lock(queue_mu_);
        return queue_.size();
    }

    /// Emits (and queues) a pause trigger once the conversation has been
    /// silent for pause_seconds with nothing queued or running.
    std::optional<TriggerEvent> pause_watchdog(double now) {
        TriggerEvent e;
        {
            std::lock_guard lock(queue_mu_);
            if (!queue_.empty() || pause_pending_ || cycle_running_) return std::nullopt;
            const double silence = now - last_activity_;
            if (silence < config_.pause_seconds) return std::nullopt;
            e.kind = TriggerEvent::Kind::on_pause;
            e.enqueued_at = now;
            e.silence_seconds = silence;
            last_activity_ = now;
        }
        {
            std::shared_lock lock(mu_);
            e.timestep = state_.current_timestep();
        }
        enqueue(e);
        return e;
    }

    double last_activity() const {
        std::lock_guard lock(queue_mu_);
        return last_activity_;
    }

    /// Blocks until the queue is nonempty or the timeout passes.
    template <typename Rep, typename Period>
    bool wait_for_trigger(std::chrono::duration<Rep, Period> timeout) {
        std::unique_lock lock(queue_mu_);
        return queue_cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || stopping_; }) && !queue_.empty();
    }

    void stop() {
        std::lock_guard lock(queue_mu_);
        stopping_ = true;
        queue_cv_.notify_all();
    }

    // -- processing ----------------------------------------------------------

    /// Processes the oldest queued trigger. Returns false if the queue was empty.
    bool step() {
        std::unique_lock cycle(cycle_mu_);
        TriggerEvent e;
        {
            std::lock_guard lock(queue_mu_);
            if (queue_.empty()) return false;
            e = std::move(queue_.front());
            queue_.pop_front();
            if (e.is_pause())
                pause_pending_ = std::any_of(queue_.begin(), queue_.end(), [](const TriggerEvent& x) { return x.is_pause(); });
            cycle_running_ = true;
        }
        try {
            run_cycle_locked(e);
        } catch (...) {
            finish_cycle();
            throw;
        }
        finish_cycle();
        return true;
    }

    /// Runs one cognition cycle for an already-dequeued trigger.
    std::vector<Decision> run_cycle(const TriggerEvent& event) {
        std::unique_lock cycle(cycle_mu_);
        {
            std::lock_guard lock(queue_mu_);
            cycle_running_ = true;
        }
        std::vector<Decision> out;
        try {
            out = run_cycle_locked(event);
        } catch (...) {
            finish_cycle();
            throw;
        }
        finish_cycle();
        return out;
    }

    /// Decisions of the most recent cycle.
    std::vector<Decision> last_decisions() const {
        std::shared_lock lock(mu_);
        return last_decisions_;
    }

    // -- commands ------------------------------------------------------------

    /// Speaks a thought regardless of thresholds. Articulation still runs.
    Utterance force_express(const std::string& thought_id) {
        std::unique_lock cycle(cycle_mu_);
        Participant agent;
        Thought thought;
        ConversationState snap;
        {
            std::shared_lock lock(mu_);
            auto [owner, th] = find_thought_locked(thought_id);
            if (!th) throw NotFound("unknown thought: " + thought_id);
            if (th->state == ThoughtState::expressed) throw Conflict("thought already expressed: " + thought_id);
            if (th->state == ThoughtState::discarded) throw Conflict("thought was discarded: " + thought_id);
            agent = state_.participant(owner);
            thought = *th;
            snap = state_;
        }
        const std::string text = articulate(agent, thought, snap, agent.proactivity->proactiveTone, *provider_);
        Utterance u;
        {
            std::unique_lock lock(mu_);
            auto [owner, th] = find_thought_locked(thought_id);
            if (!th || !th->live()) throw Conflict("thought is no longer live: " + thought_id);
            minds_.at(owner).reservoir.mark_expressed(thought_id, state_.current_timestep() + 1, ++command_seq_ | kCommandBit);
            log_->append(events::thought_expressed, state_.current_timestep(), clock_->now(), owner,
                         {{"thought", thought_id}, {"text", text}, {"forced", true},
                          {"retained", th->state == ThoughtState::retained},
                          {"score", th->evaluation ? json(th->evaluation->final) : json(nullptr)}});
            u = append_locked(owner, text, thought_id);
        }
        enqueue_message(u);
        return u;
    }

    /// Removes a thought from consideration. Expressed thoughts cannot be deleted.
    void delete_thought(const std::string& thought_id) {
        std::unique_lock lock(mu_);
        auto [owner, th] = find_thought_locked(thought_id);
        if (!th) throw NotFound("unknown thought: " + thought_id);
        if (th->state == ThoughtState::expressed) throw Conflict("thought already expressed: " + thought_id);
        if (th->state == ThoughtState::discarded) return;
        th->state = ThoughtState::discarded;
        log_->append(events::thought_discarded, state_.current_timestep(), clock_->now(), owner,
                     {{"thought", thought_id}, {"reason", "deleted"}});
    }

    json memory(const std::string& agent_id) const {
        std::shared_lock lock(mu_);
        return json(mind_locked(agent_id).memory.items());
    }

    /// Adds a memory entry ({kind, text, weight}); returns the stored item.
    json add_memory(const std::string& agent_id, const json& entry) {
        MemoryItem m = memory_item_from_json(entry);
        {
            std::shared_lock lock(mu_);
            mind_locked(agent_id);
        }
        m.embedding = provider_->embed(m.text);
        std::unique_lock lock(mu_);
        AgentMind& mind = mind_locked(agent_id);
        m.last_accessed = state_.current_timestep();
        return json(add_memory_locked(agent_id, mind, std::move(m), /*embed=*/false));
    }

    /// Edits text and/or weight; text edits re-embed.
    json update_memory(const std::string& agent_id, const std::string& memory_id, const json& patch) {
        std::optional<std::string> text;
        std::optional<double> weight;
        if (patch.contains("text")) text = patch["text"].get<std::string>();
        if (patch.contains("weight")) weight = patch["weight"].get<double>();
        if (text && text->empty()) throw std::invalid_argument("memory text must be nonempty");
        if (weight && !(*weight > 0.0)) throw std::invalid_argument("memory weight must be > 0");
        std::optional<EmbeddingVector> emb;
        if (text) emb = provider_->embed(*text);
        std::unique_lock lock(mu_);
        MemoryItem* m = mind_locked(agent_id).memory.find(memory_id);
        if (!m) throw NotFound("unknown memory: " + memory_id);
        if (text) {
            m->text = *text;
            m->embedding = std::move(*emb);
        }
        if (weight) m->weight = *weight;
        return json(*m);
    }

    void delete_memory(const std::string& agent_id, const std::string& memory_id) {
        std::unique_lock lock(mu_);
        if (!mind_locked(agent_id).memory.remove(memory_id)) throw NotFound("unknown memory: " + memory_id);
    }

    ProactivityConfig settings(const std::string& agent_id) const {
        std::shared_lock lock(mu_);
        const Participant* p = state_.find_participant(agent_id);
        if (!p || !p->is_agent()) throw NotFound("unknown agent: " + agent_id);
        return *p->proactivity;
    }

    /// Overlays a partial settings object. Throws InvalidConfig, leaving the
    /// old settings in place, if the result is out of range.
    ProactivityConfig update_settings(const std::string& agent_id, const json& patch) {
        std::unique_lock lock(mu_);
        Participant* p = state_.find_participant(agent_id);
        if (!p || !p->is_agent()) throw NotFound("unknown agent: " + agent_id);
        ProactivityConfig next = *p->proactivity;
        try {
            from_json(patch, next);
        } catch (const json::exception& e) {
            throw InvalidConfig({e.what()});
        }
        next.validate();
        p->proactivity = next;
        return next;
    }

    // -- reads ---------------------------------------------------------------

    ConversationState state() const {
        std::shared_lock lock(mu_);
        return state_;
    }

    Timestep timestep() const {
        std::shared_lock lock(mu_);
        return state_.current_timestep();
    }

    json snapshot() const {
        std::shared_lock lock(mu_);
        json j = state_;
        j["queue_depth"] = queue_depth();
        j["events"] = log_->size();
        return j;
    }

    json thoughts(const std::string& agent_id) const {
        std::shared_lock lock(mu_);
        return json(mind_locked(agent_id).reservoir.thoughts());
    }

    ThoughtReservoir reservoir(const std::string& agent_id) const {
        std::shared_lock lock(mu_);
        return mind_locked(agent_id).reservoir;
    }

    std::optional<Thought> thought(const std::string& thought_id) const {
        std::shared_lock lock(mu_);
        auto [owner, th] = const_cast<Engine*>(this)->find_thought_locked(thought_id);
        if (!th) return std::nullopt;
        return *th;
    }

    /// Evaluation factors and rating distribution of a thought.
    json reasoning(const std::string& thought_id) const {
        auto th = thought(thought_id);
        if (!th) throw NotFound("unknown thought: " + thought_id);
        if (!th->evaluation) return json{{"thought", thought_id}, {"evaluation", nullptr}};
        const auto& e = *th->evaluation;
        return json{{"thought", thought_id},
                    {"text", th->text},
                    {"positive_factors", e.positive_factors},
                    {"negative_factors", e.negative_factors},
                    {"distribution", e.distribution},
                    {"raw", e.raw},
                    {"silence_factor", e.silence_factor},
                    {"final", e.final},
                    {"evaluated_at", e.evaluated_at}};
    }

    bool has_participant(const std::string& pid) const {
        std::shared_lock lock(mu_);
        return state_.find_participant(pid) != nullptr;
    }
    bool has_thought(const std::string& thought_id) const { return thought(thought_id).has_value(); }

private:
    static constexpr std::uint64_t kCommandBit = 1ULL << 63;

    struct AgentMind {
        MemoryStore memory;
        ThoughtReservoir reservoir;
        std::size_t memory_counter = 0;
        std::size_t thought_counter = 0;
    };

    struct AgentCycle {
        std::string agent;
        std::vector<RetrievalHit> hits;
        std::vector<std::pair<std::string, Timestep>> accessed;  // item id, new last_accessed
        std::vector<Thought> formed;
        std::vector<EvaluationResult> evaluations;
        Decision decision;
        bool failed = false;
    };

    void finish_cycle() {
        std::lock_guard lock(queue_mu_);
        cycle_running_ = false;
    }

    const MemoryItem& add_memory_locked(const std::string& agent_id, AgentMind& mind, MemoryItem m, bool embed = true) {
        m.id = config_.id_prefix + agent_id + ".m" + std::to_string(++mind.memory_counter);
        if (embed) m.embedding = provider_->embed(m.text);
        return mind.memory.add(std::move(m));
    }

    AgentMind& mind_locked(const std::string& agent_id) {
        auto it = minds_.find(agent_id);
        if (it == minds_.end()) throw NotFound("unknown agent: " + agent_id);
        return it->second;
    }
    const AgentMind& mind_locked(const std::string& agent_id) const {
        return const_cast<Engine*>(this)->mind_locked(agent_id);
    }

    std::pair<std::string, Thought*> find_thought_locked(const std::string& thought_id) {
        for (auto& [id, mind] : minds_)
            if (Thought* t = mind.reservoir.find(thought_id)) return {id, t};
        return {{}, nullptr};
    }

    Utterance append_locked(const std::string& speaker, std::string text, std::optional<std::string> thought_id) {
        const double now = clock_->now();
        Utterance u = state_.append_utterance(speaker, std::move(text), now);
        json payload = u;
        if (thought_id) payload["thought"] = *thought_id;
        log_->append(events::utterance, u.timestep, now, u.speaker, std::move(payload));
        std::lock_guard lock(queue_mu_);
        last_activity_ = now;
        return u;
    }

    void enqueue_message(const Utterance& u) {
        TriggerEvent e;
        e.kind = TriggerEvent::Kind::on_new_message;
        e.utterance = u.id;
        e.enqueued_at = u.wall_time;
        e.timestep = u.timestep;
        enqueue(std::move(e));
    }

    AgentCycle run_agent(const Participant& agent, std::size_t agent_index, AgentMind mind,
                         const ConversationState& snap, const TriggerContext& trigger,
                         const std::optional<UtteranceEmbeddings>& ue, const TurnPrediction& prediction) {
        AgentCycle out;
        out.agent = agent.id;
        const ProactivityConfig& cfg = *agent.proactivity;
        const Timestep t = trigger.timestep;
        Rng rng(mix_seed(mix_seed(config_.seed, trigger.batch), agent_index));

        // retrieval over long-term memories and live thoughts
        if (ue) {
            std::vector<MemoryItem> candidates = mind.memory.items();
            for (const auto& th : mind.reservoir.thoughts()) {
                if (!th.live()) continue;
                MemoryItem m;
                m.id = th.id;
                m.kind = MemoryKind::thought_ref;
                m.text = th.text;
                m.last_accessed = th.last_accessed;
                m.embedding = th.embedding;
                candidates.push_back(std::move(m));
            }
            out.hits = retrieve_stimuli(candidates, *ue, t, cfg, &rng);
            for (const auto& h : out.hits) out.accessed.emplace_back(h.item.id, t);
        }

        // formation
        std::size_t counter = mind.thought_counter;
        const std::string prefix = config_.id_prefix + agent.id + ".t";
        IdGenerator next_id = [&] { return prefix + std::to_string(++counter); };
        StimulusResolver resolve = [&](std::string_view id) -> std::optional<StimulusRef::Kind> {
            if (snap.find_utterance(id)) return StimulusRef::Kind::utterance;
            for (const auto& m : mind.memory.items())
                if (m.id == id) return StimulusRef::Kind::memory;
            if (const Thought* th = mind.reservoir.find(id); th && th->state != ThoughtState::discarded)
                return StimulusRef::Kind::thought;
            return std::nullopt;
        };
        out.formed = form_system1(agent, snap, trigger, cfg.num_system1_thoughts, *provider_, next_id);
        auto s2 = form_system2(agent, snap, trigger, out.hits, cfg.num_system2_thoughts, *provider_, resolve, next_id);
        std::move(s2.begin(), s2.end(), std::back_inserter(out.formed));
        for (const auto& th : out.formed) mind.reservoir.add(th);

        // evaluation
        out.evaluations = evaluate_batch(agent, snap, mind.reservoir, *provider_, cfg, t, config_.parallel_agents);
        for (const auto& r : out.evaluations)
            if (r.score)
                if (Thought* th = mind.reservoir.find(r.thought_id)) th->evaluation = r.score;

        out.decision = decide(agent.id, cfg, mind.reservoir, prediction, t, trigger.batch, rng);
        return out;
    }

    std::vector<Decision> run_cycle_locked(const TriggerEvent& event) {
        // snapshot
        ConversationState snap;
        std::map<std::string, AgentMind> minds;
        TriggerContext trigger;
        {
            std::unique_lock lock(mu_);
            snap = state_;
            minds = minds_;
            log_->append(events::trigger, state_.current_timestep(), clock_->now(), std::nullopt, event);
        }
        trigger.pause = event.is_pause();
        trigger.timestep = snap.current_timestep();
        trigger.batch = event.seq;
        trigger.silence_seconds = event.silence_seconds;
        if (event.utterance) {
            trigger.utterance_id = *event.utterance;
        } else if (!snap.transcript().empty()) {
            trigger.utterance_id = snap.transcript().back().id;
        }

        // shared interpretation and embeddings of the triggering utterance
        std::optional<UtteranceEmbeddings> ue;
        if (const Utterance* u = snap.find_utterance(trigger.utterance_id)) {
            const bool had = u->interpretation.has_value();
            const std::string interp = interpret_utterance(snap, u->id, *provider_);
            if (!had && !interp.empty()) {
                std::unique_lock lock(mu_);
                state_.set_interpretation(u->id, interp);
            }
            try {
                UtteranceEmbeddings e;
                e.raw = provider_->embed(u->text);
                if (!interp.empty()) e.interp = provider_->embed(interp);
                ue = std::move(e);
            } catch (const ProviderError& err) {
                log_warn(std::string("utterance embedding failed, skipping retrieval: ") + err.what());
            }
        }

        const TurnPrediction prediction =
            event.is_pause() ? TurnPrediction::open() : classify_turn(snap, *provider_);

        // per-agent cognition
        std::vector<AgentCycle> cycles(agent_order_.size());
        auto run_one = [&](std::size_t i) {
            const std::string& id = agent_order_[i];
            try {
                cycles[i] = run_agent(*snap.find_participant(id), i, minds.at(id), snap, trigger, ue, prediction);
            } catch (const std::exception& e) {
                log_warn("cycle for " + id + " failed: " + e.what());
                cycles[i] = AgentCycle{};
                cycles[i].agent = id;
                cycles[i].failed = true;
                cycles[i].decision.agent = id;
                cycles[i].decision.reason = DecisionReason::agent_error;
            }
        };
        if (config_.parallel_agents) {
            std::vector<std::future<void>> jobs;
            for (std::size_t i = 0; i < cycles.size(); ++i) jobs.push_back(std::async(std::launch::async, run_one, i));
            for (auto& j : jobs) j.get();
        } else {
            for (std::size_t i = 0; i < cycles.size(); ++i) run_one(i);
        }

        // hold back while other triggers are waiting
        if (queue_depth() > 0) {
            for (auto& c : cycles) {
                if (!c.decision.speaks()) continue;
                c.decision = Decision{c.agent, Decision::Action::silent, std::nullopt, std::nullopt,
                                      DecisionReason::queue_busy, c.decision.score};
            }
        }

        // arbitration
        std::optional<std::size_t> winner = arbitrate(cycles, snap);
        for (std::size_t i = 0; i < cycles.size(); ++i) {
            if (winner && i == *winner) continue;
            auto& d = cycles[i].decision;
            if (d.speaks()) d = Decision{d.agent, Decision::Action::silent, std::nullopt, std::nullopt,
                                         DecisionReason::outvoted, d.score};
        }

        // articulation of the winner, outside the lock
        std::optional<Thought> ack;
        if (winner) {
            AgentCycle& c = cycles[*winner];
            const Participant& agent = *snap.find_participant(c.agent);
            if (c.decision.thought) {
                const Thought* th = nullptr;
                for (const auto& f : c.formed)
                    if (f.id == *c.decision.thought) th = &f;
                if (!th) th = minds.at(c.agent).reservoir.find(*c.decision.thought);
                c.decision.articulated_text = articulate(agent, *th, snap, agent.proactivity->proactiveTone, *provider_);
            } else {
                Thought t;
                t.id = config_.id_prefix + c.agent + ".t" +
                       std::to_string(minds.at(c.agent).thought_counter + c.formed.size() + 1);
                t.owner = c.agent;
                t.text = acknowledge(agent, snap, *provider_);
                t.system = 1;
                t.stimuli = {trigger.origin()};
                t.created_at = trigger.timestep;
                t.batch = trigger.batch;
                t.last_accessed = trigger.timestep;
                c.formed.push_back(t);
                c.decision.thought = t.id;
                c.decision.articulated_text = t.text;
                ack = t;
            }
        }

        // apply
        std::vector<Decision> decisions;
        std::optional<Utterance> spoken;
        {
            std::unique_lock lock(mu_);
            const Timestep t = trigger.timestep;
            for (auto& c : cycles) {
                AgentMind& mind = minds_.at(c.agent);
                for (const auto& [id, at] : c.accessed) {
                    if (MemoryItem* m = mind.memory.find(id)) m->last_accessed = at;
                    if (Thought* th = mind.reservoir.find(id)) th->last_accessed = at;
                }
                for (const auto& th : c.formed) {
                    mind.reservoir.add(th);
                    ++mind.thought_counter;
                    log_->append(events::thought_created, t, clock_->now(), c.agent, json(th));
                }
                for (const auto& r : c.evaluations) {
                    Thought* th = mind.reservoir.find(r.thought_id);
                    if (!th || !th->live()) continue;
                    if (r.score) th->evaluation = r.score;
                    log_->append(events::thought_evaluated, t, clock_->now(), c.agent,
                                 {{"thought", r.thought_id},
                                  {"saliency", th->saliency_at_creation},
                                  {"evaluation", r.score ? json(*r.score) : json(nullptr)}});
                }
            }
            for (auto& c : cycles) {
                log_->append(events::decision, t, clock_->now(), c.agent, json(c.decision));
                decisions.push_back(c.decision);
            }
            if (winner) {
                const Decision& d = cycles[*winner].decision;
                AgentMind& mind = minds_.at(d.agent);
                Thought* th = mind.reservoir.find(*d.thought);
                if (th && th->live()) {
                    const bool retained = th->state == ThoughtState::retained;
                    mind.reservoir.mark_expressed(*d.thought, state_.current_timestep() + 1, trigger.batch);
                    log_->append(events::thought_expressed, state_.current_timestep(), clock_->now(), d.agent,
                                 {{"thought", *d.thought},
                                  {"text", *d.articulated_text},
                                  {"reason", d.reason},
                                  {"score", std::isfinite(d.score) ? json(d.score) : json(nullptr)},
                                  {"created_at", th->created_at},
                                  {"retained", retained},
                                  {"forced", false}});
                    spoken = append_locked(d.agent, *d.articulated_text, *d.thought);
                }
            }
            for (const auto& id : agent_order_) {
                AgentMind& mind = minds_.at(id);
                mind.reservoir.retain_fresh();
                const auto max_live = static_cast<std::size_t>(state_.participant(id).proactivity->max_live_thoughts);
                for (const auto& gone : prune_reservoir(mind.reservoir, max_live))
                    log_->append(events::thought_discarded, state_.current_timestep(), clock_->now(), id,
                                 {{"thought", gone}, {"reason", "pruned"}});
            }
            last_decisions_ = decisions;
        }
        if (spoken) enqueue_message(*spoken);
        return decisions;
    }

    std::optional<std::size_t> arbitrate(const std::vector<AgentCycle>& cycles, const ConversationState& snap) const {
        std::vector<std::size_t> speakers;
        for (std::size_t i = 0; i < cycles.size(); ++i)
            if (cycles[i].decision.speaks()) speakers.push_back(i);
        if (speakers.empty()) return std::nullopt;

        if (config_.arbitration == Arbitration::round_robin) {
            std::size_t start = 0;
            if (!snap.transcript().empty()) {
                auto it = std::find(agent_order_.begin(), agent_order_.end(), snap.transcript().back().speaker);
                if (it != agent_order_.end()) start = static_cast<std::size_t>(it - agent_order_.begin()) + 1;
            }
            for (std::size_t k = 0; k < agent_order_.size(); ++k) {
                const std::size_t i = (start + k) % agent_order_.size();
                if (cycles[i].decision.speaks()) return i;
            }
        }

        const Timestep t = snap.current_timestep();
        auto silence = [&](std::size_t i) { return t - snap.participant(cycles[i].agent).last_spoke_at; };
        return *std::min_element(speakers.begin(), speakers.end(), [&](std::size_t a, std::size_t b) {
            const double sa = cycles[a].decision.score, sb = cycles[b].decision.score;
            if (sa != sb) return sa > sb;
            if (silence(a) != silence(b)) return silence(a) > silence(b);
            return cycles[a].agent < cycles[b].agent;
        });
    }

    EngineConfig config_;
    std::shared_ptr<Provider> provider_;
    std::shared_ptr<Clock> clock_;
    std::shared_ptr<EventLog> log_;

    mutable std::shared_mutex mu_;  // state_, minds_, last_decisions_
    ConversationState state_;
    std::map<std::string, AgentMind> minds_;
    std::vector<std::string> agent_order_;
    std::vector<Decision> last_decisions_;
    std::uint64_t command_seq_ = 0;

    mutable std::mutex queue_mu_;  // queue_ and the pause bookkeeping
    std::condition_variable queue_cv_;
    std::deque<TriggerEvent> queue_;
    std::uint64_t trigger_seq_ = 0;
    bool pause_pending_ = false;
    bool cycle_running_ = false;
    bool stopping_ = false;
    double last_activity_ = 0.0;

    std::mutex cycle_mu_;  // one cycle or command at a time
};

}  // namespace inner_thoughts
