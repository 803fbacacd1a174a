#include "syncrec/hub.hpp"

#include "syncrec/error.hpp"

#include <algorithm>
#include <cmath>

namespace syncrec {

double steady_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

StreamInfo marker_stream_info() {
    StreamInfo info;
    info.name = "markers";
    info.source_id = "hub";
    info.kind = StreamKind::Marker;
    info.channel_count = 1;
    info.nominal_rate_hz = 0.0;
    info.channel_labels = {"label"};
    info.units = {"text"};
    return info;
}

// Subscription -----------------------------------------------------------------

std::optional<HubEvent> Subscription::pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    ready_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) return std::nullopt;
    HubEvent event = std::move(queue_.front());
    queue_.pop_front();
    return event;
}

std::optional<HubEvent> Subscription::try_pop() {
    std::lock_guard lock(mutex_);
    if (queue_.empty()) return std::nullopt;
    HubEvent event = std::move(queue_.front());
    queue_.pop_front();
    return event;
}

std::vector<HubEvent> Subscription::drain() {
    std::lock_guard lock(mutex_);
    std::vector<HubEvent> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
    queue_.clear();
    return out;
}

bool Subscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

bool Subscription::overflowed() const {
    std::lock_guard lock(mutex_);
    return overflowed_;
}

std::size_t Subscription::delivered() const {
    std::lock_guard lock(mutex_);
    return delivered_;
}

bool Subscription::accepts(const HubEvent& event) const {
    if (filter_ == wire::SubscribeFilter::All) return true;
    if (std::holds_alternative<MarkerEvent>(event)) return true;
    if (const auto* decl = std::get_if<DeclEvent>(&event)) return decl->stream_id == kMarkerStreamId;
    return false;
}

bool Subscription::push(const HubEvent& event) {
    bool accepted = true;
    {
        std::lock_guard lock(mutex_);
        if (closed_) return true;
        if (queue_.size() >= capacity_) {
            overflowed_ = true;
            closed_ = true;
            accepted = false;
        } else {
            queue_.push_back(event);
            ++delivered_;
        }
    }
    ready_.notify_all();
    return accepted;
}

void Subscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    ready_.notify_all();
}

// Hub -------------------------------------------------------------------------

Hub::Hub(HubClock clock, std::size_t subscriber_capacity)
    : clock_(std::move(clock)), subscriber_capacity_(subscriber_capacity) {
    streams_[kMarkerStreamId] = StreamEntry{marker_stream_info(), kHubSourceRef};
}

Hub::Session& Hub::session_locked(SessionId id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end() || it->second.state == SessionState::Closed)
        throw Error("bad-session", "session " + std::to_string(id) + " is not open");
    return it->second;
}

const Hub::Session& Hub::session_locked(SessionId id) const {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error("bad-session", "unknown session " + std::to_string(id));
    return it->second;
}

void Hub::broadcast_locked(const HubEvent& event) {
    bool overflow = false;
    for (auto it = subscribers_.begin(); it != subscribers_.end();) {
        auto& sub = *it;
        if (sub->accepts(event) && !sub->push(event)) {
            overflow = true;
            it = subscribers_.erase(it);
            continue;
        }
        if (sub->closed()) {
            it = subscribers_.erase(it);
            continue;
        }
        ++it;
    }
    if (overflow) {
        MarkerSample diag{clock_(), std::string(labels::kRecorderOverflow), MarkerOrigin::Auto};
        inject_locked(std::move(diag), kHubSourceRef);
    }
}

SessionId Hub::open_session() {
    std::lock_guard lock(mutex_);
    const SessionId id = next_session_++;
    sessions_.emplace(id, Session{});
    sessions_.at(id).table = OffsetTable(id);
    return id;
}

void Hub::hello(SessionId session, std::string source_id, std::string role) {
    std::lock_guard lock(mutex_);
    auto& s = session_locked(session);
    if (source_id.empty()) throw Error("bad-hello", "empty source id");
    s.source_id = std::move(source_id);
    s.role = std::move(role);
    s.state = SessionState::Active;
}

SessionId Hub::connect(std::string source_id, std::string role) {
    const SessionId id = open_session();
    hello(id, std::move(source_id), std::move(role));
    return id;
}

StreamId Hub::register_stream(SessionId session, const StreamInfo& info) {
    if (const auto problems = validate_stream_info(info); !problems.empty())
        throw Error("bad-decl", problems.front());
    std::lock_guard lock(mutex_);
    auto& s = session_locked(session);
    for (const auto& [id, entry] : streams_) {
        if (id != kMarkerStreamId && entry.live && entry.info.source_id == info.source_id &&
            entry.info.name == info.name)
            throw Error("duplicate-stream", info.source_id + "/" + info.name);
    }
    const StreamId id = next_stream_++;
    streams_[id] = StreamEntry{info, session};
    s.streams.push_back(id);
    pushed_[id] = 0;
    broadcast_locked(DeclEvent{id, session, info});
    return id;
}

void Hub::route_chunk(SessionId session, StreamId stream_id, std::vector<Sample> samples) {
    std::lock_guard lock(mutex_);
    auto& s = session_locked(session);
    if (s.state != SessionState::Active) throw Error("bad-session", "session is not active");
    auto it = streams_.find(stream_id);
    if (stream_id == kMarkerStreamId || it == streams_.end() || it->second.owner != session || !it->second.live)
        throw Error("unknown-stream", "stream " + std::to_string(stream_id) + " is not registered by this session");
    auto& entry = it->second;
    double previous = entry.has_samples ? entry.last_timestamp : -INFINITY;
    for (const auto& sample : samples) {
        if (!sample_fits(entry.info, sample))
            throw Error("ragged-sample", "sample does not match the declaration of stream " + std::to_string(stream_id));
        if (sample.raw_timestamp < previous) throw Error("non-monotonic", "timestamps decrease");
        previous = sample.raw_timestamp;
    }
    if (!samples.empty()) {
        entry.last_timestamp = samples.back().raw_timestamp;
        entry.has_samples = true;
    }
    pushed_[stream_id] += samples.size();
    broadcast_locked(ChunkEvent{stream_id, std::move(samples), clock_()});
}

MarkerSample Hub::inject_locked(MarkerSample marker, SessionId source) {
    ++pushed_[kMarkerStreamId];
    broadcast_locked(MarkerEvent{marker, source});
    return marker;
}

MarkerSample Hub::inject_marker(std::string label, MarkerOrigin origin, double raw_t, SessionId source) {
    if (label.empty()) throw Error("empty-marker", "marker label is empty");
    MarkerSample marker{raw_t, std::move(label), origin};
    if (!is_valid_marker(marker)) throw Error("bad-marker", "'" + marker.label + "' is not a catalog marker");
    std::lock_guard lock(mutex_);
    bool restamp = std::isnan(raw_t);
    if (source != kHubSourceRef && session_locked(source).table.empty()) {
        source = kHubSourceRef;
        restamp = true;
    }
    if (restamp || !std::isfinite(marker.raw_timestamp)) marker.raw_timestamp = clock_();
    return inject_locked(std::move(marker), source);
}

wire::Pong Hub::handle_ping(SessionId session, double t0) {
    std::lock_guard lock(mutex_);
    session_locked(session);
    const double t1 = clock_();
    const double t2 = clock_();
    return {t0, t1, t2};
}

std::optional<OffsetEntry> Hub::report_exchange(SessionId session, const wire::SyncReport& report) {
    const auto m = measure_offset(report.t0, report.t1, report.t2, report.t3);
    std::lock_guard lock(mutex_);
    auto& s = session_locked(session);
    auto entry = s.estimator.add(m);
    if (entry && s.table.try_append(*entry)) {
        broadcast_locked(OffsetEvent{session, *entry});
        return entry;
    }
    return std::nullopt;
}

void Hub::close_session(SessionId session, bool graceful) {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session);
    if (it == sessions_.end() || it->second.state == SessionState::Closed) return;
    auto& s = it->second;
    const bool was_active = s.state == SessionState::Active;
    s.state = SessionState::Closed;
    for (StreamId id : s.streams) streams_.at(id).live = false;
    if (!graceful && was_active) {
        MarkerSample lost{clock_(), std::string(labels::kSourceLostPrefix) + s.source_id, MarkerOrigin::Auto};
        inject_locked(std::move(lost), kHubSourceRef);
    }
}

std::shared_ptr<Subscription> Hub::subscribe(wire::SubscribeFilter filter, std::optional<std::size_t> capacity) {
    auto sub = std::make_shared<Subscription>(filter, capacity.value_or(subscriber_capacity_));
    std::lock_guard lock(mutex_);
    for (const auto& [id, entry] : streams_) {
        if (!entry.live) continue;
        const DeclEvent decl{id, entry.owner, entry.info};
        if (sub->accepts(decl)) sub->push(decl);
    }
    subscribers_.push_back(sub);
    return sub;
}

void Hub::unsubscribe(const std::shared_ptr<Subscription>& subscription) {
    std::lock_guard lock(mutex_);
    std::erase(subscribers_, subscription);
    subscription->close();
}

std::vector<StreamStatus> Hub::list_streams() const {
    std::lock_guard lock(mutex_);
    std::vector<StreamStatus> out;
    for (const auto& [id, entry] : streams_) {
        if (id == kMarkerStreamId || !entry.live) continue;
        const auto& s = sessions_.at(entry.owner);
        if (s.state != SessionState::Active) continue;
        StreamStatus status{id, entry.info, std::nullopt, std::nullopt};
        if (auto last = s.estimator.last()) status.last_rtt = last->rtt;
        status.last_offset = s.estimator.last_selected();
        out.push_back(std::move(status));
    }
    return out;
}

std::optional<StreamInfo> Hub::stream_info(StreamId stream_id) const {
    std::lock_guard lock(mutex_);
    auto it = streams_.find(stream_id);
    if (it == streams_.end()) return std::nullopt;
    return it->second.info;
}

SessionState Hub::session_state(SessionId session) const {
    std::lock_guard lock(mutex_);
    return session_locked(session).state;
}

std::string Hub::source_id(SessionId session) const {
    std::lock_guard lock(mutex_);
    return session_locked(session).source_id;
}

OffsetTable Hub::offset_table(SessionId session) const {
    std::lock_guard lock(mutex_);
    return session_locked(session).table;
}

std::map<StreamId, std::uint64_t> Hub::pushed_counts() const {
    std::lock_guard lock(mutex_);
    return pushed_;
}

} // namespace syncrec
