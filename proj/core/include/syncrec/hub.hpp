/**
 * @file hub.hpp
 * @brief Session registry, clock-sync bookkeeping and fan-out to subscribers.
 *
 * The hub is transport-agnostic: the TCP server (hub_server.hpp) and the
 * in-process simulation links both drive it through this interface.
 *
 * Ordering contract: events of one stream reach every subscriber in push
 * order, and a stream's declaration precedes its first chunk. Nothing is
 * promised across streams; consumers reorder by corrected timestamps.
 */
#pragma once

#include "syncrec/clock_sync.hpp"
#include "syncrec/stream_model.hpp"
#include "syncrec/wire_protocol.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace syncrec {

/// Session id; doubles as the `source_ref` written next to markers and
/// offset entries. 0 denotes the hub itself.
using SessionId = std::uint32_t;
inline constexpr SessionId kHubSourceRef = 0;

inline constexpr std::size_t kDefaultSubscriberCapacity = 65536;

using HubClock = std::function<double()>;

/// Seconds on the process-wide steady clock.
double steady_seconds();

enum class SessionState { Handshaking, Active, Closed };

struct DeclEvent {
    StreamId stream_id = 0;
    std::uint32_t source_ref = 0;
    StreamInfo info;
    bool operator==(const DeclEvent&) const = default;
};

struct ChunkEvent {
    StreamId stream_id = 0;
    std::vector<Sample> samples;
    double hub_receive_t = 0;
    bool operator==(const ChunkEvent&) const = default;
};

struct MarkerEvent {
    MarkerSample marker;
    std::uint32_t source_ref = 0;
    bool operator==(const MarkerEvent&) const = default;
};

struct OffsetEvent {
    std::uint32_t source_ref = 0;
    OffsetEntry entry;
    bool operator==(const OffsetEvent&) const = default;
};

using HubEvent = std::variant<DeclEvent, ChunkEvent, MarkerEvent, OffsetEvent>;

/// Declaration of the hub-owned marker stream (id 0).
StreamInfo marker_stream_info();

/// Bounded FIFO between the hub and one consumer. Overflow closes it.
class Subscription {
public:
    Subscription(wire::SubscribeFilter filter, std::size_t capacity) : filter_(filter), capacity_(capacity) {}

    /// Blocks until an event arrives, the subscription closes, or the timeout
    /// passes. nullopt means closed-and-drained or timed out.
    std::optional<HubEvent> pop(std::chrono::milliseconds timeout);
    std::optional<HubEvent> try_pop();
    std::vector<HubEvent> drain();

    wire::SubscribeFilter filter() const { return filter_; }
    bool closed() const;
    bool overflowed() const;
    std::size_t delivered() const;

private:
    friend class Hub;
    bool accepts(const HubEvent& event) const;
    /// False on overflow (the subscription is then closed).
    bool push(const HubEvent& event);
    void close();

    const wire::SubscribeFilter filter_;
    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<HubEvent> queue_;
    std::size_t delivered_ = 0;
    bool closed_ = false;
    bool overflowed_ = false;
};

struct StreamStatus {
    StreamId stream_id = 0;
    StreamInfo info;
    std::optional<double> last_rtt;
    std::optional<double> last_offset;
};

class Hub {
public:
    explicit Hub(HubClock clock = steady_seconds, std::size_t subscriber_capacity = kDefaultSubscriberCapacity);

    Hub(const Hub&) = delete;
    Hub& operator=(const Hub&) = delete;

    double now() const { return clock_(); }

    /// A connection that has not said HELLO yet.
    SessionId open_session();
    /// HELLO: names the session and makes it Active.
    void hello(SessionId session, std::string source_id, std::string role = "producer");
    /// Shorthand for open_session + hello.
    SessionId connect(std::string source_id, std::string role = "producer");

    /// Errors: "bad-decl", "duplicate-stream", "bad-session".
    StreamId register_stream(SessionId session, const StreamInfo& info);
    /// Errors: "unknown-stream", "ragged-sample", "non-monotonic", "bad-session".
    void route_chunk(SessionId session, StreamId stream_id, std::vector<Sample> samples);
    /// Appends to the marker stream. A session without any clock-sync data
    /// cannot be corrected later, so its markers are re-stamped on the hub
    /// clock and attributed to the hub. NaN raw_t also means "stamp now".
    /// Errors: "empty-marker", "bad-marker", "bad-session".
    MarkerSample inject_marker(std::string label, MarkerOrigin origin, double raw_t, SessionId source = kHubSourceRef);

    /// Answers a PING with hub receive/send stamps.
    wire::Pong handle_ping(SessionId session, double t0);
    /// Records a completed exchange reported by the producer and publishes
    /// the newly selected offset. Errors: "non-causal", "bad-session".
    std::optional<OffsetEntry> report_exchange(SessionId session, const wire::SyncReport& report);

    /// BYE (graceful) or connection loss. Abrupt loss emits SOURCE-LOST.
    void close_session(SessionId session, bool graceful);

    /// Declarations of live streams are replayed to the new subscriber;
    /// samples are not.
    std::shared_ptr<Subscription> subscribe(wire::SubscribeFilter filter = wire::SubscribeFilter::All,
                                            std::optional<std::size_t> capacity = std::nullopt);
    void unsubscribe(const std::shared_ptr<Subscription>& subscription);

    std::vector<StreamStatus> list_streams() const;
    /// Declaration of a registered stream (live or not), including id 0.
    std::optional<StreamInfo> stream_info(StreamId stream_id) const;
    SessionState session_state(SessionId session) const;
    std::string source_id(SessionId session) const;
    OffsetTable offset_table(SessionId session) const;
    /// Samples accepted per stream (markers under id 0).
    std::map<StreamId, std::uint64_t> pushed_counts() const;

private:
    struct Session {
        SessionState state = SessionState::Handshaking;
        std::string source_id;
        std::string role;
        std::vector<StreamId> streams;
        SyncEstimator estimator{kSyncWindowSize};
        OffsetTable table;
    };
    struct StreamEntry {
        StreamInfo info;
        SessionId owner = 0;
        double last_timestamp = 0;
        bool has_samples = false;
        bool live = true;
    };

    Session& session_locked(SessionId id);
    const Session& session_locked(SessionId id) const;
    void broadcast_locked(const HubEvent& event);
    MarkerSample inject_locked(MarkerSample marker, SessionId source);

    HubClock clock_;
    std::size_t subscriber_capacity_;
    mutable std::mutex mutex_;
    SessionId next_session_ = 1;
    StreamId next_stream_ = 1;
    std::map<SessionId, Session> sessions_;
    std::map<StreamId, StreamEntry> streams_;
    std::map<StreamId, std::uint64_t> pushed_;
    std::vector<std::shared_ptr<Subscription>> subscribers_;
};

} // namespace syncrec
