#include "helpers.hpp"

#include "inner_thoughts/server.hpp"

#include <thread>

using namespace it_test;
namespace fs = std::filesystem;

namespace {

const json kConfig = {
    {"id", "demo"},
    {"agents",
     {{{"id", "alice"}, {"display_name", "Alice"}, {"persona", {"I bake bread.", "I run marathons."}},
       {"proactivity", {{"imThreshold", 1.0}, {"system1Prob", 0.0}}}},
      {{"id", "bob"}, {"display_name", "Bob"}, {"persona", {"I teach history.", "I hike."}},
       {"proactivity", {{"imThreshold", 5.0}, {"interruptThreshold", 5.0}, {"system1Prob", 0.0}}}}}},
    {"humans", {{{"id", "sam"}, {"display_name", "Sam"}}}}};

struct Live {
    std::unique_ptr<Server> server;
    std::thread thread;
    int port = -1;
    std::unique_ptr<httplib::Client> client;

    explicit Live(ServerOptions opt) {
        if (!opt.provider_factory)
            opt.provider_factory = [](const EngineConfig& c) {
                auto p = std::make_shared<MockProvider>(stable_hash(c.conversation_id));
                p->enable_synthetic();
                return p;
            };
        if (!opt.clock_factory) opt.clock_factory = [] { return std::make_shared<VirtualClock>(0.0); };
        opt.heartbeat = std::chrono::milliseconds(50);
        opt.pacing = std::chrono::milliseconds(100);
        server = std::make_unique<Server>(std::move(opt));
        port = server->bind_any();
        thread = std::thread([this] { server->listen(); });
        server->wait_until_ready();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(10, 0);
    }
    ~Live() {
        server->stop();
        thread.join();
    }

    httplib::Result post(const std::string& path, const json& body) {
        return client->Post(path.c_str(), body.dump(), "application/json");
    }
    httplib::Result put(const std::string& path, const json& body) {
        return client->Put(path.c_str(), body.dump(), "application/json");
    }
    std::vector<json> events(const std::string& conv = "demo", std::uint64_t after = 0) {
        httplib::Headers h;
        if (after) h.emplace("Last-Event-ID", std::to_string(after));
        auto r = client->Get(("/conversations/" + conv + "/events?follow=false").c_str(), h);
        EXPECT_TRUE(r);
        if (!r) return {};
        EXPECT_EQ(r->status, 200);
        EXPECT_NE(r->get_header_value("Content-Type").find("text/event-stream"), std::string::npos);
        return parse_sse(r->body);
    }
    template <class Pred>
    bool wait_for(Pred pred, std::chrono::milliseconds limit = std::chrono::seconds(20)) {
        const auto end = std::chrono::steady_clock::now() + limit;
        while (std::chrono::steady_clock::now() < end) {
            if (pred()) return true;
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        return pred();
    }
};

json body(const httplib::Result& r) { return json::parse(r->body); }

std::optional<json> first_open_thought(Live& live, const std::string& pid) {
    auto r = live.client->Get(("/participants/" + pid + "/thoughts").c_str());
    if (!r || r->status != 200) return std::nullopt;
    const json listing = body(r);
    for (const auto& t : listing["thoughts"])
        if ((t["state"] == "fresh" || t["state"] == "retained") && !t["evaluation"].is_null()) return t;
    return std::nullopt;
}

}  // namespace

TEST(Server, CreatesListsAndSnapshotsConversations) {
    Live live({});
    auto created = live.post("/conversations", kConfig);
    ASSERT_TRUE(created);
    EXPECT_EQ(created->status, 201);
    EXPECT_EQ(body(created)["id"], "demo");
    EXPECT_EQ(body(created)["participants"].size(), 3u);

    auto list = live.client->Get("/conversations");
    EXPECT_EQ(body(list)["conversations"], json::array({"demo"}));
    EXPECT_EQ(live.post("/conversations", kConfig)->status, 409);
    EXPECT_EQ(live.client->Post("/conversations", "{not json", "application/json")->status, 400);
    json bad = kConfig;
    bad["id"] = "other";
    bad["agents"][0]["preset"] = "shouty";
    EXPECT_EQ(live.post("/conversations", bad)->status, 422);
    EXPECT_EQ(live.client->Get("/conversations/nope")->status, 404);

    auto snap = live.client->Get("/conversations/demo");
    ASSERT_EQ(snap->status, 200);
    EXPECT_EQ(body(snap)["current_timestep"], 0);
    EXPECT_TRUE(body(snap)["transcript"].empty());
}

TEST(Server, MessagesFlowIntoTheEventStream) {
    Live live({});
    ASSERT_EQ(live.post("/conversations", kConfig)->status, 201);
    auto posted = live.post("/conversations/demo/messages", {{"speaker", "sam"}, {"text", "Anyone bake lately?"}});
    ASSERT_EQ(posted->status, 202);
    EXPECT_EQ(body(posted)["utterance"]["speaker"], "sam");

    ASSERT_TRUE(live.wait_for([&] {
        for (const auto& e : live.events())
            if (e["type"] == "utterance" && e["payload"]["speaker"] == "alice") return true;
        return false;
    }));
    const auto events = live.events();
    for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i]["seq"], i + 1);
    EXPECT_EQ(events.front()["type"], "session");

    // The expression event precedes the utterance it produced.
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i]["type"] != "thought_expressed") continue;
        ASSERT_LT(i + 1, events.size());
        EXPECT_EQ(events[i + 1]["type"], "utterance");
        EXPECT_EQ(events[i + 1]["agent"], events[i]["agent"]);
    }

    // Resuming after k yields exactly the tail.
    const std::uint64_t k = events.size() / 2;
    const auto tail = live.events("demo", k);
    ASSERT_FALSE(tail.empty());
    EXPECT_EQ(tail.front()["seq"], k + 1);
    for (std::size_t i = 0; i + 1 < tail.size(); ++i) EXPECT_EQ(tail[i + 1]["seq"], tail[i]["seq"].get<int>() + 1);
    for (std::size_t i = 0; i < events.size() - k; ++i) EXPECT_EQ(tail[i], events[k + i]);

    EXPECT_EQ(live.client->Get("/conversations/demo/events?follow=false", {{"Last-Event-ID", "x"}})->status, 400);
}

TEST(Server, MessageValidation) {
    Live live({});
    live.post("/conversations", kConfig);
    auto implied = live.post("/conversations/demo/messages", {{"text", "hi"}});
    ASSERT_EQ(implied->status, 202);
    EXPECT_EQ(body(implied)["utterance"]["speaker"], "sam");
    EXPECT_EQ(live.post("/conversations/demo/messages", {{"speaker", "sam"}, {"text", ""}})->status, 400);
    EXPECT_EQ(live.post("/conversations/demo/messages", {{"speaker", "sam"}})->status, 400);
    EXPECT_EQ(live.post("/conversations/demo/messages", {{"speaker", "zed"}, {"text", "hi"}})->status, 404);
    EXPECT_EQ(live.post("/conversations/nope/messages", {{"speaker", "sam"}, {"text", "hi"}})->status, 404);
}

TEST(Server, FollowingStreamDeliversNewEventsLive) {
    Live live({});
    live.post("/conversations", kConfig);
    std::string received;
    std::atomic<bool> saw_utterance{false};
    std::thread reader([&] {
        httplib::Client c("127.0.0.1", live.port);
        c.set_read_timeout(20, 0);
        c.Get("/conversations/demo/events", [&](const char* data, std::size_t n) {
            received.append(data, n);
            if (received.find("\"type\":\"utterance\"") != std::string::npos) {
                saw_utterance = true;
                return false;
            }
            return true;
        });
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    live.post("/conversations/demo/messages", {{"speaker", "sam"}, {"text", "Hello?"}});
    EXPECT_TRUE(live.wait_for([&] { return saw_utterance.load(); }));
    reader.join();
    const auto frames = parse_sse(received);
    ASSERT_GE(frames.size(), 2u);
    EXPECT_EQ(frames[0]["seq"], 1);
    EXPECT_NE(received.find("id: 1\n"), std::string::npos);
}

TEST(Server, ThoughtCommands) {
    Live live({});
    live.post("/conversations", kConfig);
    live.post("/conversations/demo/messages", {{"speaker", "sam"}, {"text", "Who likes hiking?"}});
    std::optional<json> thought;
    ASSERT_TRUE(live.wait_for([&] { return (thought = first_open_thought(live, "bob")).has_value(); }));
    const std::string tid = (*thought)["id"];
    EXPECT_EQ(tid.rfind("demo.bob.t", 0), 0u) << tid;

    auto reasoning = live.client->Get(("/thoughts/" + tid + "/reasoning").c_str());
    ASSERT_EQ(reasoning->status, 200);
    EXPECT_TRUE(body(reasoning).contains("final"));
    EXPECT_TRUE(body(reasoning)["distribution"].is_object());

    auto expressed = live.client->Post(("/thoughts/" + tid + "/express").c_str(), "", "application/json");
    ASSERT_EQ(expressed->status, 200) << expressed->body;
    EXPECT_EQ(body(expressed)["utterance"]["speaker"], "bob");
    EXPECT_EQ(live.client->Post(("/thoughts/" + tid + "/express").c_str(), "", "application/json")->status, 409);
    EXPECT_TRUE(live.wait_for([&] {
        for (const auto& e : live.events())
            if (e["type"] == "thought_expressed" && e["payload"].value("forced", false)) return true;
        return false;
    }));

    std::optional<json> other;
    ASSERT_TRUE(live.wait_for([&] { return (other = first_open_thought(live, "bob")).has_value(); }));
    const std::string oid = (*other)["id"];
    EXPECT_EQ(live.client->Delete(("/thoughts/" + oid).c_str())->status, 200);
    EXPECT_EQ(live.client->Delete(("/thoughts/" + oid).c_str())->status, 200);  // idempotent
    EXPECT_EQ(live.client->Delete(("/thoughts/" + tid).c_str())->status, 409);  // already spoken
    EXPECT_EQ(live.client->Get("/thoughts/demo.bob.t999/reasoning")->status, 404);
    EXPECT_EQ(live.client->Post("/thoughts/nope/express", "", "application/json")->status, 404);
}

TEST(Server, MemoryEditing) {
    Live live({});
    live.post("/conversations", kConfig);
    auto initial = live.client->Get("/participants/alice/memory");
    ASSERT_EQ(initial->status, 200);
    const auto before = body(initial)["memory"].size();

    auto added = live.put("/participants/alice/memory",
                          {{"add", {{{"kind", "knowledge"}, {"text", "Sourdough needs a starter."}, {"weight", 2.0}}}}});
    ASSERT_EQ(added->status, 200) << added->body;
    const auto mem = body(added)["memory"];
    ASSERT_EQ(mem.size(), before + 1);
    const json item = mem.back();
    EXPECT_EQ(item["text"], "Sourdough needs a starter.");
    EXPECT_EQ(item["kind"], "knowledge");
    const std::string mid = item["id"];

    auto updated = live.put("/participants/alice/memory", {{"update", {{{"id", mid}, {"text", "Rye is tricky."}}}}});
    ASSERT_EQ(updated->status, 200);
    EXPECT_EQ(body(updated)["memory"].back()["text"], "Rye is tricky.");
    auto deleted = live.put("/participants/alice/memory", {{"delete", {mid}}});
    ASSERT_EQ(deleted->status, 200);
    EXPECT_EQ(body(deleted)["memory"].size(), before);

    EXPECT_EQ(live.put("/participants/alice/memory", {{"delete", {mid}}})->status, 404);
    EXPECT_EQ(live.put("/participants/alice/memory", json::object())->status, 400);
    EXPECT_EQ(live.put("/participants/alice/memory", {{"add", {{{"text", ""}}}}})->status, 400);
    EXPECT_EQ(live.put("/participants/alice/memory", {{"add", {{{"text", "x"}, {"kind", "gossip"}}}}})->status, 400);
    EXPECT_EQ(live.client->Get("/participants/zed/memory")->status, 404);
}

TEST(Server, SettingsValidation) {
    Live live({});
    live.post("/conversations", kConfig);
    auto current = live.client->Get("/participants/bob/settings");
    ASSERT_EQ(current->status, 200);
    EXPECT_DOUBLE_EQ(body(current)["imThreshold"].get<double>(), 5.0);

    auto changed = live.put("/participants/bob/settings", {{"imThreshold", 4.2}});
    ASSERT_EQ(changed->status, 200);
    EXPECT_DOUBLE_EQ(body(changed)["imThreshold"].get<double>(), 4.2);
    EXPECT_DOUBLE_EQ(body(changed)["interruptThreshold"].get<double>(), 5.0);

    auto rejected = live.put("/participants/bob/settings", {{"imThreshold", 9}});
    EXPECT_EQ(rejected->status, 422);
    EXPECT_FALSE(body(rejected)["problems"].empty());
    EXPECT_EQ(live.put("/participants/bob/settings", {{"imThreshold", "high"}})->status, 422);
    EXPECT_DOUBLE_EQ(body(live.client->Get("/participants/bob/settings"))["imThreshold"].get<double>(), 4.2);
    EXPECT_EQ(live.put("/participants/sam/settings", {{"imThreshold", 4}})->status, 404);
}

TEST(Server, AmbiguousParticipantsNeedAConversation) {
    Live live({});
    live.post("/conversations", kConfig);
    json second = kConfig;
    second["id"] = "demo2";
    ASSERT_EQ(live.post("/conversations", second)->status, 201);
    EXPECT_EQ(live.client->Get("/participants/alice/settings")->status, 409);
    EXPECT_EQ(live.client->Get("/participants/alice/settings?conversation=demo2")->status, 200);
    EXPECT_EQ(live.client->Get("/participants/alice/settings?conversation=nope")->status, 404);
}

TEST(Server, BearerTokenAndCors) {
    ServerOptions opt;
    opt.auth_token = "s3cret";
    Live live(std::move(opt));
    auto denied = live.client->Get("/conversations");
    EXPECT_EQ(denied->status, 401);
    EXPECT_EQ(live.client->Get("/conversations", {{"Authorization", "Bearer wrong"}})->status, 401);
    EXPECT_EQ(live.client->Get("/conversations", {{"Authorization", "Bearer s3cret"}})->status, 200);
    EXPECT_EQ(live.client->Get("/conversations?token=s3cret")->status, 200);

    auto pre = live.client->Options("/conversations");
    ASSERT_TRUE(pre);
    EXPECT_EQ(pre->status, 204);
    EXPECT_EQ(pre->get_header_value("Access-Control-Allow-Origin"), "*");
    EXPECT_NE(pre->get_header_value("Access-Control-Allow-Headers").find("Last-Event-ID"), std::string::npos);
    EXPECT_EQ(denied->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(Server, MirrorsEventLogsToDisk) {
    const auto dir = fs::temp_directory_path() / "it_server_logs";
    fs::remove_all(dir);
    std::vector<json> seen;
    {
        ServerOptions opt;
        opt.log_dir = dir;
        Live live(std::move(opt));
        live.post("/conversations", kConfig);
        live.post("/conversations/demo/messages", {{"speaker", "sam"}, {"text", "Hi all"}});
        ASSERT_TRUE(live.wait_for([&] { return live.events().size() >= 4; }));
        live.server->stop();
        seen = live.server->engine("demo")->log().snapshot();
    }
    std::ifstream in(dir / "demo.jsonl");
    ASSERT_TRUE(in);
    const auto on_disk = parse_jsonl(in);
    ASSERT_FALSE(on_disk.empty());
    EXPECT_EQ(on_disk, seen);
}

TEST(Server, ManualModeLeavesTriggersQueued) {
    ServerOptions opt;
    opt.auto_run = false;
    Live live(std::move(opt));
    live.post("/conversations", kConfig);
    auto posted = live.post("/conversations/demo/messages", {{"speaker", "sam"}, {"text", "Hi"}});
    EXPECT_EQ(body(posted)["queue_depth"], 1);
    auto engine = live.server->engine("demo");
    engine->step();
    EXPECT_EQ(engine->queue_depth(), 1u);  // alice's reply queued the next trigger
    EXPECT_EQ(body(live.client->Get("/conversations/demo"))["transcript"].size(), 2u);
}

TEST(Sse, ParsesDataLinesAndSkipsComments) {
    const auto events = parse_sse(": keep-alive\n\nid: 1\ndata: {\"seq\":1}\n\nid: 2\ndata: {\"seq\":2}\n\n");
    ASSERT_EQ(events.size(), 2u);
    EXPECT_EQ(events[1]["seq"], 2);
    EXPECT_TRUE(parse_sse("").empty());
}
