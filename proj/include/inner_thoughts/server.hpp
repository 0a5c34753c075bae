#pragma once
// HTTP/JSON service over one or more engines, with a server-sent-events feed
// of each conversation's event log.
//
// Routes:
//   POST   /conversations                       create (body: engine config)
//   GET    /conversations                       list ids
//   GET    /conversations/{id}                  state snapshot
//   POST   /conversations/{id}/messages         {speaker, text} -> 202
//   GET    /conversations/{id}/events           text/event-stream, resumable
//   GET    /participants/{id}/thoughts
//   GET    /participants/{id}/memory
//   PUT    /participants/{id}/memory            {add: [...], update: [...], delete: [...]}
//   GET    /participants/{id}/settings
//   PUT    /participants/{id}/settings          partial proactivity settings
//   POST   /thoughts/{id}/express               force-express
//   DELETE /thoughts/{id}
//   GET    /thoughts/{id}/reasoning
//
// Participant routes take ?conversation=<id> when a participant id is not
// unique across conversations. Thought ids are unique server-wide.
//
// All state changes go through Engine's public commands; the server never
// touches conversation state directly.

#include "inner_thoughts/engine.hpp"

#include <httplib.h>

#include <filesystem>
#include <thread>

namespace inner_thoughts {

struct ServerOptions {
    std::function<std::shared_ptr<Provider>(const EngineConfig&)> provider_factory;
    std::function<std::shared_ptr<Clock>()> clock_factory;  // default: system clock
    std::string cors_origin = "*";
    std::optional<std::string> auth_token;  // require "Authorization: Bearer <token>"
    std::optional<std::filesystem::path> log_dir;  // mirror each conversation to <dir>/<id>.jsonl
    bool auto_run = true;  // process triggers and pauses on a worker per conversation
    std::chrono::milliseconds heartbeat{1000};
    // Minimum gap after an utterance before the worker starts the next cycle.
    // Keeps agent-to-agent exchanges at reading pace when the provider
    // answers instantly (mock) instead of flooding the log.
    std::chrono::milliseconds pacing{1500};

    /// Reads the bearer token from an environment variable, if set.
    static std::optional<std::string> token_from_env(const char* var = "INNER_THOUGHTS_TOKEN") {
        if (const char* v = std::getenv(var); v && *v) return std::string(v);
        return std::nullopt;
    }
};

class Server {
public:
    explicit Server(ServerOptions options) : options_(std::move(options)) {
        if (!options_.provider_factory) throw std::invalid_argument("server needs a provider factory");
        routes();
    }

    ~Server() { stop(); }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Creates and starts a conversation. Throws Conflict on a duplicate id.
    std::string create_conversation(EngineConfig cfg) {
        std::unique_lock lock(mu_);
        if (cfg.conversation_id.empty() || cfg.conversation_id == "conversation")
            cfg.conversation_id = "c" + std::to_string(++counter_);
        if (sessions_.count(cfg.conversation_id)) throw Conflict("conversation exists: " + cfg.conversation_id);
        for (char c : cfg.conversation_id)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
                throw InvalidConfig({"conversation id may only contain letters, digits, '-' and '_'"});
        cfg.id_prefix = cfg.conversation_id + ".";
        cfg.validate();

        auto log = std::make_shared<EventLog>();
        if (options_.log_dir) {
            std::filesystem::create_directories(*options_.log_dir);
            log->open_file((*options_.log_dir / (cfg.conversation_id + ".jsonl")).string());
        }
        auto clock = options_.clock_factory ? options_.clock_factory() : std::make_shared<SystemClock>();
        auto provider = options_.provider_factory(cfg);
        const std::string id = cfg.conversation_id;
        auto session = std::make_shared<Session>();
        session->engine = std::make_shared<Engine>(std::move(cfg), std::move(provider), std::move(clock), log);
        if (options_.auto_run) session->worker = std::thread([this, s = session.get()] { work(*s); });
        sessions_.emplace(id, std::move(session));
        return id;
    }

    std::shared_ptr<Engine> engine(const std::string& conversation_id) const {
        std::shared_lock lock(mu_);
        auto it = sessions_.find(conversation_id);
        if (it == sessions_.end()) throw NotFound("unknown conversation: " + conversation_id);
        return it->second->engine;
    }

    std::vector<std::string> conversation_ids() const {
        std::shared_lock lock(mu_);
        std::vector<std::string> out;
        for (const auto& [id, _] : sessions_) out.push_back(id);
        return out;
    }

    /// Binds without serving. Returns false if the address is unavailable.
    bool bind(const std::string& host, int port) { return http_.bind_to_port(host, port); }
    /// Binds to a free port; returns it (or -1).
    int bind_any(const std::string& host = "127.0.0.1") { return http_.bind_to_any_port(host); }
    /// Serves until stop(). Call after bind().
    bool listen() { return http_.listen_after_bind(); }
    bool running() const { return http_.is_running(); }
    void wait_until_ready() const { http_.wait_until_ready(); }

    /// Stops workers, closes event streams and the HTTP listener, flushes logs.
    void stop() {
        std::vector<std::shared_ptr<Session>> sessions;
        {
            std::unique_lock lock(mu_);
            if (stopped_) return;
            stopped_ = true;
            for (auto& [_, s] : sessions_) sessions.push_back(s);
        }
        for (auto& s : sessions) {
            s->stop = true;
            s->engine->stop();
        }
        for (auto& s : sessions)
            if (s->worker.joinable()) s->worker.join();
        for (auto& s : sessions) s->engine->log().close();
        http_.stop();
    }

    httplib::Server& http() noexcept { return http_; }

private:
    struct Session {
        std::shared_ptr<Engine> engine;
        std::thread worker;
        std::atomic<bool> stop{false};
    };

    void work(Session& s) {
        Engine& engine = *s.engine;
        while (!s.stop) {
            try {
                if (engine.wait_for_trigger(std::chrono::milliseconds(200))) {
                    const Timestep before = engine.timestep();
                    engine.step();
                    if (engine.timestep() > before) pace(s);
                } else {
                    engine.pause_watchdog(engine.clock().now());
                }
            } catch (const std::exception& e) {
                log_warn(std::string("conversation worker: ") + e.what());
            }
        }
    }

    void pace(const Session& s) const {
        const auto until = std::chrono::steady_clock::now() + options_.pacing;
        while (!s.stop && std::chrono::steady_clock::now() < until)
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }

    // -- lookup helpers -------------------------------------------------------

    std::shared_ptr<Engine> engine_for_participant(const std::string& pid, const httplib::Request& req) const {
        if (req.has_param("conversation")) {
            auto e = engine(req.get_param_value("conversation"));
            if (!e->has_participant(pid)) throw NotFound("unknown participant: " + pid);
            return e;
        }
        std::shared_lock lock(mu_);
        std::shared_ptr<Engine> found;
        for (const auto& [_, s] : sessions_) {
            if (!s->engine->has_participant(pid)) continue;
            if (found) throw Conflict("participant id '" + pid + "' is ambiguous; pass ?conversation=<id>");
            found = s->engine;
        }
        if (!found) throw NotFound("unknown participant: " + pid);
        return found;
    }

    std::shared_ptr<Engine> engine_for_thought(const std::string& tid) const {
        std::shared_lock lock(mu_);
        const auto dot = tid.find('.');
        if (dot != std::string::npos)
            if (auto it = sessions_.find(tid.substr(0, dot)); it != sessions_.end()) return it->second->engine;
        for (const auto& [_, s] : sessions_)
            if (s->engine->has_thought(tid)) return s->engine;
        throw NotFound("unknown thought: " + tid);
    }

    static void reply(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static json parse_body(const httplib::Request& req) {
        json j = json::parse(req.body, nullptr, false);
        if (j.is_discarded()) throw std::invalid_argument("request body is not valid JSON");
        return j;
    }

    /// Wraps a handler with auth and error mapping.
    httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
        return [this, fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
            if (options_.auth_token) {
                const std::string expected = "Bearer " + *options_.auth_token;
                const bool ok = req.get_header_value("Authorization") == expected ||
                                (req.has_param("token") && req.get_param_value("token") == *options_.auth_token);
                if (!ok) return reply(res, 401, {{"error", "unauthorized"}});
            }
            try {
                fn(req, res);
            } catch (const NotFound& e) {
                reply(res, 404, {{"error", e.what()}});
            } catch (const UnknownParticipant& e) {
                reply(res, 404, {{"error", e.what()}});
            } catch (const Conflict& e) {
                reply(res, 409, {{"error", e.what()}});
            } catch (const InvalidConfig& e) {
                reply(res, 422, {{"error", "invalid settings"}, {"problems", e.problems()}});
            } catch (const QueueFull& e) {
                reply(res, 503, {{"error", e.what()}});
            } catch (const json::exception& e) {
                reply(res, 400, {{"error", e.what()}});
            } catch (const std::invalid_argument& e) {
                reply(res, 400, {{"error", e.what()}});
            } catch (const std::exception& e) {
                reply(res, 500, {{"error", e.what()}});
            }
        };
    }

    // -- routes ---------------------------------------------------------------

    void routes() {
        // httplib's default also sets SO_REUSEPORT, which would let a second
        // server share a busy port instead of failing to bind.
        http_.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        http_.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                                   {"Access-Control-Allow-Headers", "Content-Type, Authorization, Last-Event-ID"},
                                   {"Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"}});
        http_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        http_.Post("/conversations", guarded([this](const auto& req, auto& res) {
            EngineConfig cfg = parse_body(req).template get<EngineConfig>();
            const std::string id = create_conversation(std::move(cfg));
            reply(res, 201, engine(id)->snapshot());
        }));

        http_.Get("/conversations", guarded([this](const auto&, auto& res) {
            reply(res, 200, {{"conversations", conversation_ids()}});
        }));

        http_.Get(R"(/conversations/([^/]+))", guarded([this](const auto& req, auto& res) {
            reply(res, 200, engine(req.matches[1])->snapshot());
        }));

        http_.Post(R"(/conversations/([^/]+)/messages)", guarded([this](const auto& req, auto& res) {
            auto e = engine(req.matches[1]);
            const json body = parse_body(req);
            std::string speaker = body.value("speaker", std::string());
            const std::string text = body.at("text").template get<std::string>();
            if (text.empty()) throw std::invalid_argument("message text must be nonempty");
            if (speaker.empty()) {
                const auto& humans = e->config().humans;
                if (humans.size() != 1) throw std::invalid_argument("speaker is required");
                speaker = humans.front().id;
            }
            const Utterance u = e->post_message(speaker, text);
            reply(res, 202, {{"utterance", u}, {"queue_depth", e->queue_depth()}});
        }));

        http_.Get(R"(/conversations/([^/]+)/events)", guarded([this](const auto& req, auto& res) {
            auto e = engine(req.matches[1]);
            std::uint64_t after = 0;
            std::string last = req.get_header_value("Last-Event-ID");
            if (last.empty() && req.has_param("last_event_id")) last = req.get_param_value("last_event_id");
            if (!last.empty()) {
                try {
                    after = std::stoull(last);
                } catch (const std::exception&) {
                    throw std::invalid_argument("Last-Event-ID must be an event sequence number");
                }
            }
            const bool follow = !(req.has_param("follow") && req.get_param_value("follow") == "false");
            stream_events(res, e->log_ptr(), after, follow);
        }));

        http_.Get(R"(/participants/([^/]+)/thoughts)", guarded([this](const auto& req, auto& res) {
            reply(res, 200, {{"thoughts", engine_for_participant(req.matches[1], req)->thoughts(req.matches[1])}});
        }));

        http_.Get(R"(/participants/([^/]+)/memory)", guarded([this](const auto& req, auto& res) {
            reply(res, 200, {{"memory", engine_for_participant(req.matches[1], req)->memory(req.matches[1])}});
        }));

        http_.Put(R"(/participants/([^/]+)/memory)", guarded([this](const auto& req, auto& res) {
            const std::string pid = req.matches[1];
            auto e = engine_for_participant(pid, req);
            const json body = parse_body(req);
            if (!body.is_object() || (!body.contains("add") && !body.contains("update") && !body.contains("delete")))
                throw std::invalid_argument("memory update needs 'add', 'update' or 'delete'");
            for (const auto& id : body.value("delete", json::array())) e->delete_memory(pid, id.template get<std::string>());
            for (const auto& u : body.value("update", json::array()))
                e->update_memory(pid, u.at("id").template get<std::string>(), u);
            for (const auto& item : body.value("add", json::array())) e->add_memory(pid, item);
            reply(res, 200, {{"memory", e->memory(pid)}});
        }));

        http_.Get(R"(/participants/([^/]+)/settings)", guarded([this](const auto& req, auto& res) {
            reply(res, 200, json(engine_for_participant(req.matches[1], req)->settings(req.matches[1])));
        }));

        http_.Put(R"(/participants/([^/]+)/settings)", guarded([this](const auto& req, auto& res) {
            const json body = parse_body(req);
            if (!body.is_object()) throw std::invalid_argument("settings must be a JSON object");
            reply(res, 200, json(engine_for_participant(req.matches[1], req)->update_settings(req.matches[1], body)));
        }));

        http_.Post(R"(/thoughts/([^/]+)/express)", guarded([this](const auto& req, auto& res) {
            const std::string tid = req.matches[1];
            reply(res, 200, {{"utterance", engine_for_thought(tid)->force_express(tid)}});
        }));

        http_.Delete(R"(/thoughts/([^/]+))", guarded([this](const auto& req, auto& res) {
            const std::string tid = req.matches[1];
            engine_for_thought(tid)->delete_thought(tid);
            reply(res, 200, {{"deleted", tid}});
        }));

        http_.Get(R"(/thoughts/([^/]+)/reasoning)", guarded([this](const auto& req, auto& res) {
            const std::string tid = req.matches[1];
            reply(res, 200, engine_for_thought(tid)->reasoning(tid));
        }));
    }

    /// Streams events with seq > after as SSE frames ("id: <seq>" + one JSON
    /// object per "data:" line), then the live tail when follow is set.
    void stream_events(httplib::Response& res, std::shared_ptr<EventLog> log, std::uint64_t after, bool follow) {
        res.set_header("Cache-Control", "no-cache");
        auto cursor = std::make_shared<std::uint64_t>(after);
        res.set_chunked_content_provider(
            "text/event-stream", [this, log, cursor, follow](std::size_t, httplib::DataSink& sink) {
                auto batch = follow ? log->wait_since(*cursor, options_.heartbeat) : log->since(*cursor);
                for (const auto& e : batch) {
                    const std::uint64_t seq = e.at("seq").get<std::uint64_t>();
                    const std::string frame = "id: " + std::to_string(seq) + "\ndata: " + e.dump() + "\n\n";
                    if (!sink.write(frame.data(), frame.size())) return false;
                    *cursor = seq;
                }
                if (!follow || (batch.empty() && log->closed())) {
                    sink.done();
                    return true;
                }
                if (batch.empty()) {
                    static const std::string heartbeat = ": keep-alive\n\n";
                    return sink.write(heartbeat.data(), heartbeat.size());
                }
                return true;
            });
    }

    ServerOptions options_;
    httplib::Server http_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t counter_ = 0;
    bool stopped_ = false;
};

/// Parses an SSE body into its JSON data payloads (ignores comments).
inline std::vector<json> parse_sse(std::string_view body) {
    std::vector<json> out;
    std::size_t pos = 0;
    while (pos < body.size()) {
        auto end = body.find('\n', pos);
        if (end == std::string_view::npos) end = body.size();
        std::string_view line = body.substr(pos, end - pos);
        if (line.rfind("data: ", 0) == 0) out.push_back(json::parse(line.substr(6)));
        pos = end + 1;
    }
    return out;
}

}  // namespace inner_thoughts
