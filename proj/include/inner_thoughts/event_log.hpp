#pragma once
// Append-only structured event log.
//
// One JSON object per event: {seq, type, timestep, wall_time, agent, payload}.
// The same objects are written as JSONL and pushed to live subscribers, so a
// log file can be replayed through anything that consumes the stream.

#include "inner_thoughts/core.hpp"

#include <condition_variable>
#include <fstream>
#include <memory>

namespace inner_thoughts {

namespace events {
inline constexpr const char* session = "session";
inline constexpr const char* utterance = "utterance";
inline constexpr const char* trigger = "trigger";
inline constexpr const char* thought_created = "thought_created";
inline constexpr const char* thought_evaluated = "thought_evaluated";
inline constexpr const char* decision = "decision";
inline constexpr const char* thought_expressed = "thought_expressed";
inline constexpr const char* thought_discarded = "thought_discarded";
}  // namespace events

class EventLog {
public:
    EventLog() = default;
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    /// Mirror every event to a JSONL file (truncates it).
    void open_file(const std::string& path) {
        std::lock_guard lock(mu_);
        file_ = std::make_unique<std::ofstream>(path, std::ios::out | std::ios::trunc | std::ios::binary);
        if (!*file_) throw std::runtime_error("cannot open event log " + path);
        for (const auto& e : events_) *file_ << e.dump() << '\n';
        file_->flush();
    }

    /// Appends and returns the event's sequence number (1-based).
    std::uint64_t append(std::string type, Timestep timestep, double wall_time, std::optional<std::string> agent,
                         json payload) {
        std::lock_guard lock(mu_);
        json e{{"seq", events_.size() + 1},
               {"type", std::move(type)},
               {"timestep", timestep},
               {"wall_time", wall_time},
               {"agent", agent ? json(*agent) : json(nullptr)},
               {"payload", std::move(payload)}};
        if (file_) {
            *file_ << e.dump() << '\n';
            file_->flush();
        }
        events_.push_back(std::move(e));
        cv_.notify_all();
        return events_.size();
    }

    std::uint64_t size() const {
        std::lock_guard lock(mu_);
        return events_.size();
    }

    std::vector<json> snapshot() const {
        std::lock_guard lock(mu_);
        return events_;
    }

    /// Events with seq > after.
    std::vector<json> since(std::uint64_t after) const {
        std::lock_guard lock(mu_);
        if (after >= events_.size()) return {};
        return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
    }

    /// Blocks until an event with seq > after exists, the log closes, or the
    /// timeout passes. Returns the new events (possibly none).
    template <typename Rep, typename Period>
    std::vector<json> wait_since(std::uint64_t after, std::chrono::duration<Rep, Period> timeout) const {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, timeout, [&] { return events_.size() > after || closed_; });
        if (after >= events_.size()) return {};
        return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
    }

    /// Wakes all waiters for shutdown.
    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        if (file_) file_->flush();
        cv_.notify_all();
    }
    bool closed() const {
        std::lock_guard lock(mu_);
        return closed_;
    }

    void flush() {
        std::lock_guard lock(mu_);
        if (file_) file_->flush();
    }

    std::string to_jsonl() const {
        std::lock_guard lock(mu_);
        std::string out;
        for (const auto& e : events_) out += e.dump() + "\n";
        return out;
    }

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::vector<json> events_;
    std::unique_ptr<std::ofstream> file_;
    bool closed_ = false;
};

/// Parses JSONL text. Throws std::runtime_error naming the first bad line.
inline std::vector<json> parse_jsonl(std::istream& in) {
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("type"))
            throw std::runtime_error("malformed log line " + std::to_string(n));
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace inner_thoughts
