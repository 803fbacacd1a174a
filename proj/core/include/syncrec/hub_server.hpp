/**
 * @file hub_server.hpp
 * @brief TCP front end for Hub plus the matching producer/subscriber clients.
 *
 * Session lifecycle on the wire:
 *
 *   producer:   HELLO -> STREAM_DECL* (each answered by ACK{id} or ERR)
 *               -> {SAMPLE_CHUNK | MARKER | PING}* -> BYE
 *   subscriber: HELLO -> SUBSCRIBE{filter}; the hub then streams STREAM_DECL,
 *               SAMPLE_CHUNK and MARKER frames until either side disconnects.
 *
 * PING carries the producer's send time t0; the hub answers PONG{t0,t1,t2};
 * the producer reports the finished exchange back as PONG{t0,t1,t2,t3}.
 */
#pragma once

#include "syncrec/hub.hpp"
#include "syncrec/net.hpp"
#include "syncrec/wire_protocol.hpp"

#include <atomic>
#include <chrono>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace syncrec {

class HubServer {
public:
    /// Binds immediately (port 0 picks a free port); call start() to serve.
    HubServer(Hub& hub, std::uint16_t port);
    ~HubServer();

    HubServer(const HubServer&) = delete;
    HubServer& operator=(const HubServer&) = delete;

    std::uint16_t port() const { return listener_.port(); }
    void start();
    /// Stops accepting, disconnects every client and joins all threads.
    void stop();

private:
    struct Connection;
    void accept_loop();
    void serve(const std::shared_ptr<Connection>& conn);
    void forward_events(const std::shared_ptr<Connection>& conn);

    Hub& hub_;
    net::TcpListener listener_;
    std::thread accept_thread_;
    std::atomic<bool> running_{false};
    std::mutex mutex_;
    std::list<std::shared_ptr<Connection>> connections_;
};

/// Producer side of a wire session.
class ProducerClient {
public:
    ProducerClient(const net::Endpoint& hub, std::string source_id, HubClock local_clock = steady_seconds);
    ~ProducerClient();

    ProducerClient(ProducerClient&&) noexcept;
    ProducerClient& operator=(ProducerClient&&) noexcept;

    /// Waits for ACK; throws Error with the hub's ERR code on rejection.
    StreamId declare(const StreamInfo& info);
    void push(StreamId stream_id, std::span<const Sample> samples);
    void marker(std::string_view label, MarkerOrigin origin, double raw_t);
    /// One sync round: `probes` PING/PONG exchanges, of which the min-rtt
    /// one is reported back to the hub.
    OffsetMeasurement sync(std::size_t probes = kProbesPerRound);
    void bye();

    double local_now() const { return clock_(); }
    /// ERR codes received for fire-and-forget frames so far.
    std::vector<std::string> take_errors();

private:
    wire::Frame await(wire::MsgType type, std::chrono::milliseconds timeout);
    void send(wire::MsgType type, const wire::Bytes& payload);

    net::TcpStream stream_;
    wire::FrameDecoder decoder_;
    HubClock clock_;
    std::map<StreamId, std::uint32_t> channel_counts_;
    std::vector<std::string> errors_;
    bool closed_ = false;
};

/// Subscriber side of a wire session.
class SubscriberClient {
public:
    SubscriberClient(const net::Endpoint& hub, wire::SubscribeFilter filter, std::string source_id = "subscriber");

    /// Next forwarded event, or nullopt on timeout / disconnect.
    std::optional<HubEvent> next(std::chrono::milliseconds timeout);
    bool connected() const { return connected_; }
    void close();

private:
    net::TcpStream stream_;
    wire::FrameDecoder decoder_;
    std::map<StreamId, std::uint32_t> channel_counts_;
    bool connected_ = true;
};

} // namespace syncrec
