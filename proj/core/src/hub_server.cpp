#include "syncrec/hub_server.hpp"

#include "syncrec/error.hpp"

#include <algorithm>
#include <array>

namespace syncrec {

struct HubServer::Connection {
    explicit Connection(net::TcpStream s) : stream(std::move(s)) {}

    net::TcpStream stream;
    std::mutex send_mutex;
    std::thread reader;
    std::thread writer;
    std::shared_ptr<Subscription> subscription;
    std::atomic<bool> finished{false};

    void send(wire::MsgType type, const wire::Bytes& payload) {
        const auto frame = wire::encode_frame(type, payload);
        std::lock_guard lock(send_mutex);
        stream.send_all(frame);
    }
};

HubServer::HubServer(Hub& hub, std::uint16_t port) : hub_(hub), listener_(net::TcpListener::bind(port)) {}

HubServer::~HubServer() { stop(); }

void HubServer::start() {
    if (running_.exchange(true)) return;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void HubServer::stop() {
    if (!running_.exchange(false)) return;
    listener_.shutdown();
    if (accept_thread_.joinable()) accept_thread_.join();
    std::list<std::shared_ptr<Connection>> connections;
    {
        std::lock_guard lock(mutex_);
        connections.swap(connections_);
    }
    for (auto& conn : connections) conn->stream.shutdown();
    for (auto& conn : connections)
        if (conn->reader.joinable()) conn->reader.join();
}

void HubServer::accept_loop() {
    while (running_) {
        auto stream = listener_.accept();
        if (!stream) break;
        auto conn = std::make_shared<Connection>(std::move(*stream));
        std::lock_guard lock(mutex_);
        if (!running_) {
            conn->stream.shutdown();
            break;
        }
        // Reap finished connections so long-running hubs do not accumulate threads.
        for (auto it = connections_.begin(); it != connections_.end();) {
            if ((*it)->finished) {
                if ((*it)->reader.joinable()) (*it)->reader.join();
                it = connections_.erase(it);
            } else {
                ++it;
            }
        }
        connections_.push_back(conn);
        conn->reader = std::thread([this, conn] { serve(conn); });
    }
}

void HubServer::forward_events(const std::shared_ptr<Connection>& conn) {
    auto& sub = *conn->subscription;
    try {
        while (true) {
            auto event = sub.pop(std::chrono::milliseconds(100));
            if (!event) {
                if (sub.closed()) break;
                continue;
            }
            if (const auto* decl = std::get_if<DeclEvent>(&*event)) {
                conn->send(wire::MsgType::StreamDecl,
                           wire::encode_forwarded_decl({decl->stream_id, decl->source_ref, decl->info}));
            } else if (const auto* chunk = std::get_if<ChunkEvent>(&*event)) {
                const auto info = hub_.stream_info(chunk->stream_id);
                if (!info) continue;
                conn->send(wire::MsgType::SampleChunk,
                           wire::encode_sample_chunk(chunk->stream_id, chunk->samples, info->channel_count));
            } else if (const auto* marker = std::get_if<MarkerEvent>(&*event)) {
                const wire::MarkerMessage msg{marker->marker.raw_timestamp, marker->marker.origin, marker->marker.label};
                conn->send(wire::MsgType::Marker, wire::encode_forwarded_marker({msg, marker->source_ref}));
            }
            // Offset entries are hub-internal; remote subscribers do not receive them.
        }
    } catch (const Error&) {
    }
    // Overflow or write failure: drop the subscriber's connection.
    conn->stream.shutdown();
}

void HubServer::serve(const std::shared_ptr<Connection>& conn) {
    const SessionId session = hub_.open_session();
    wire::FrameDecoder decoder;
    std::array<std::uint8_t, 64 * 1024> buffer{};
    bool graceful = false;
    bool done = false;

    auto handle = [&](const wire::Frame& frame) {
        using wire::MsgType;
        switch (frame.type) {
        case MsgType::Hello: {
            auto [source_id, role] = wire::decode_hello(frame.payload);
            hub_.hello(session, std::move(source_id), std::move(role));
            break;
        }
        case MsgType::StreamDecl: {
            const auto info = stream_info_from_json(std::string(frame.payload.begin(), frame.payload.end()));
            conn->send(MsgType::Ack, wire::encode_ack(hub_.register_stream(session, info)));
            break;
        }
        case MsgType::SampleChunk: {
            const StreamId id = wire::peek_stream_id(frame.payload);
            const auto info = hub_.stream_info(id);
            if (!info || id == kMarkerStreamId) throw Error("unknown-stream", std::to_string(id));
            auto chunk = wire::decode_sample_chunk(frame.payload, info->channel_count);
            hub_.route_chunk(session, id, std::move(chunk.samples));
            break;
        }
        case MsgType::Marker: {
            auto msg = wire::decode_marker(frame.payload);
            hub_.inject_marker(std::move(msg.label), msg.origin, msg.raw_t, session);
            break;
        }
        case MsgType::Ping: {
            const double t0 = wire::decode_ping(frame.payload);
            conn->send(MsgType::Pong, wire::encode_pong(hub_.handle_ping(session, t0)));
            break;
        }
        case MsgType::Pong: {
            if (!wire::is_sync_report(frame.payload)) throw Error("bad-pong", "expected a 32-byte sync report");
            hub_.report_exchange(session, wire::decode_sync_report(frame.payload));
            break;
        }
        case MsgType::Subscribe: {
            if (conn->subscription) throw Error("already-subscribed");
            conn->subscription = hub_.subscribe(wire::decode_subscribe(frame.payload));
            conn->writer = std::thread([this, conn] { forward_events(conn); });
            break;
        }
        case MsgType::Bye:
            graceful = true;
            done = true;
            break;
        case MsgType::Ack:
        case MsgType::Err:
            break;
        }
    };

    try {
        while (!done) {
            const auto n = conn->stream.recv_some(buffer);
            if (n == 0) break;
            decoder.feed(std::span(buffer.data(), n));
            while (!done) {
                auto result = decoder.next();
                if (std::holds_alternative<wire::Incomplete>(result)) break;
                if (const auto* err = std::get_if<wire::DecodeError>(&result)) {
                    conn->send(wire::MsgType::Err, wire::encode_err(err->code));
                    continue;
                }
                try {
                    handle(std::get<wire::Decoded>(result).frame);
                } catch (const Error& e) {
                    conn->send(wire::MsgType::Err, wire::encode_err(e.code()));
                }
            }
        }
    } catch (const Error&) {
        // Connection failure: treated as an abrupt disconnect below.
    }

    if (conn->subscription) {
        hub_.unsubscribe(conn->subscription);
        if (conn->writer.joinable()) conn->writer.join();
    }
    hub_.close_session(session, graceful || !running_);
    conn->stream.shutdown();
    conn->finished = true;
}

// ProducerClient ----------------------------------------------------------------

ProducerClient::ProducerClient(const net::Endpoint& hub, std::string source_id, HubClock local_clock)
    : stream_(net::TcpStream::connect(hub.host, hub.port)), clock_(std::move(local_clock)) {
    send(wire::MsgType::Hello, wire::encode_hello(source_id, "producer"));
}

ProducerClient::~ProducerClient() {
    try {
        if (stream_.valid() && !closed_) bye();
    } catch (...) {
    }
}

ProducerClient::ProducerClient(ProducerClient&&) noexcept = default;
ProducerClient& ProducerClient::operator=(ProducerClient&&) noexcept = default;

void ProducerClient::send(wire::MsgType type, const wire::Bytes& payload) {
    stream_.send_all(wire::encode_frame(type, payload));
}

wire::Frame ProducerClient::await(wire::MsgType type, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::array<std::uint8_t, 4096> buffer{};
    while (true) {
        while (true) {
            auto result = decoder_.next();
            if (std::holds_alternative<wire::Incomplete>(result)) break;
            if (auto* decoded = std::get_if<wire::Decoded>(&result)) {
                if (decoded->frame.type == type) return std::move(decoded->frame);
                if (decoded->frame.type == wire::MsgType::Err) {
                    auto code = wire::decode_err(decoded->frame.payload);
                    if (type == wire::MsgType::Ack && (code == "bad-decl" || code == "duplicate-stream"))
                        throw Error(code, "stream declaration rejected");
                    errors_.push_back(std::move(code));
                }
            }
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0 || !stream_.wait_readable(static_cast<int>(left.count())))
            throw Error("timeout", std::string("waiting for ") + std::string(wire::to_string(type)));
        const auto n = stream_.recv_some(buffer);
        if (n == 0) throw Error("disconnected", "hub closed the connection");
        decoder_.feed(std::span(buffer.data(), n));
    }
}

StreamId ProducerClient::declare(const StreamInfo& info) {
    const auto json = stream_info_to_json(info);
    send(wire::MsgType::StreamDecl, wire::Bytes(json.begin(), json.end()));
    const auto ack = await(wire::MsgType::Ack, std::chrono::seconds(5));
    const StreamId id = wire::decode_ack(ack.payload);
    channel_counts_[id] = info.channel_count;
    return id;
}

void ProducerClient::push(StreamId stream_id, std::span<const Sample> samples) {
    auto it = channel_counts_.find(stream_id);
    if (it == channel_counts_.end()) throw Error("unknown-stream", "stream was not declared by this client");
    send(wire::MsgType::SampleChunk, wire::encode_sample_chunk(stream_id, samples, it->second));
}

void ProducerClient::marker(std::string_view label, MarkerOrigin origin, double raw_t) {
    send(wire::MsgType::Marker, wire::encode_marker({raw_t, origin, std::string(label)}));
}

OffsetMeasurement ProducerClient::sync(std::size_t probes) {
    std::vector<OffsetMeasurement> train;
    for (std::size_t i = 0; i < std::max<std::size_t>(probes, 1); ++i) {
        const double t0 = clock_();
        send(wire::MsgType::Ping, wire::encode_ping(t0));
        const auto pong = wire::decode_pong(await(wire::MsgType::Pong, std::chrono::seconds(5)).payload);
        train.push_back(measure_offset(pong.t0, pong.t1, pong.t2, clock_()));
    }
    const auto best = select_measurement(train);
    send(wire::MsgType::Pong, wire::encode_sync_report({best.t0, best.t1, best.t2, best.t3}));
    return best;
}

void ProducerClient::bye() {
    if (closed_) return;
    closed_ = true;
    send(wire::MsgType::Bye, {});
    // Wait for the hub to finish the session so BYE is ordered before any
    // later reconnect under the same source id.
    std::array<std::uint8_t, 4096> buffer{};
    while (stream_.wait_readable(2000)) {
        if (stream_.recv_some(buffer) == 0) break;
    }
    stream_.close();
}

std::vector<std::string> ProducerClient::take_errors() {
    // Collect anything already queued without blocking.
    std::array<std::uint8_t, 4096> buffer{};
    while (stream_.valid() && stream_.wait_readable(0)) {
        const auto n = stream_.recv_some(buffer);
        if (n == 0) break;
        decoder_.feed(std::span(buffer.data(), n));
    }
    while (true) {
        auto result = decoder_.next();
        if (std::holds_alternative<wire::Incomplete>(result)) break;
        if (auto* decoded = std::get_if<wire::Decoded>(&result); decoded && decoded->frame.type == wire::MsgType::Err)
            errors_.push_back(wire::decode_err(decoded->frame.payload));
    }
    return std::exchange(errors_, {});
}

// SubscriberClient --------------------------------------------------------------

SubscriberClient::SubscriberClient(const net::Endpoint& hub, wire::SubscribeFilter filter, std::string source_id)
    : stream_(net::TcpStream::connect(hub.host, hub.port)) {
    stream_.send_all(wire::encode_frame(wire::MsgType::Hello, wire::encode_hello(source_id, "subscriber")));
    stream_.send_all(wire::encode_frame(wire::MsgType::Subscribe, wire::encode_subscribe(filter)));
}

std::optional<HubEvent> SubscriberClient::next(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::array<std::uint8_t, 64 * 1024> buffer{};
    while (true) {
        while (true) {
            auto result = decoder_.next();
            if (std::holds_alternative<wire::Incomplete>(result)) break;
            auto* decoded = std::get_if<wire::Decoded>(&result);
            if (!decoded) continue;
            const auto& frame = decoded->frame;
            switch (frame.type) {
            case wire::MsgType::StreamDecl: {
                auto decl = wire::decode_forwarded_decl(frame.payload);
                channel_counts_[decl.stream_id] = decl.info.channel_count;
                return DeclEvent{decl.stream_id, decl.source_ref, std::move(decl.info)};
            }
            case wire::MsgType::SampleChunk: {
                const auto id = wire::peek_stream_id(frame.payload);
                auto it = channel_counts_.find(id);
                if (it == channel_counts_.end()) continue;
                auto chunk = wire::decode_sample_chunk(frame.payload, it->second);
                return ChunkEvent{id, std::move(chunk.samples), 0.0};
            }
            case wire::MsgType::Marker: {
                auto fm = wire::decode_forwarded_marker(frame.payload);
                return MarkerEvent{{fm.marker.raw_t, std::move(fm.marker.label), fm.marker.origin}, fm.source_ref};
            }
            default: continue;
            }
        }
        if (!connected_) return std::nullopt;
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0 || !stream_.wait_readable(static_cast<int>(left.count()))) return std::nullopt;
        const auto n = stream_.recv_some(buffer);
        if (n == 0) {
            connected_ = false;
            return std::nullopt;
        }
        decoder_.feed(std::span(buffer.data(), n));
    }
}

void SubscriberClient::close() {
    if (!connected_) return;
    try {
        stream_.send_all(wire::encode_frame(wire::MsgType::Bye, {}));
    } catch (const Error&) {
    }
    stream_.close();
    connected_ = false;
}

} // namespace syncrec
