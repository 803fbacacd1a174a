#include "syncrec/error.hpp"
#include "syncrec/hub_server.hpp"
#include "syncrec/recorder.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <thread>

using namespace syncrec;
using namespace std::chrono_literals;

namespace {

StreamInfo numeric(std::string name, std::string source, std::uint32_t channels = 1, double rate = 100) {
    StreamInfo info{std::move(name), std::move(source), StreamKind::Numeric, channels, rate, {}, {}};
    for (std::uint32_t c = 0; c < channels; ++c) info.channel_labels.push_back("c" + std::to_string(c));
    return info;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("syncrec_test_" + name);
}

struct LiveHub {
    Hub hub;
    HubServer server{hub, 0};
    LiveHub() { server.start(); }
    net::Endpoint endpoint() const { return {"127.0.0.1", server.port()}; }
};

/// Reads raw frames from a socket until `type` shows up.
std::optional<wire::Frame> read_until(net::TcpStream& stream, wire::FrameDecoder& decoder, wire::MsgType type) {
    std::array<std::uint8_t, 4096> buffer{};
    for (int rounds = 0; rounds < 100; ++rounds) {
        while (true) {
            auto r = decoder.next();
            if (std::holds_alternative<wire::Incomplete>(r)) break;
            if (auto* d = std::get_if<wire::Decoded>(&r); d && d->frame.type == type) return d->frame;
        }
        if (!stream.wait_readable(2000)) return std::nullopt;
        const auto n = stream.recv_some(buffer);
        if (n == 0) return std::nullopt;
        decoder.feed(std::span(buffer.data(), n));
    }
    return std::nullopt;
}

template <typename Pred>
bool eventually(Pred pred) {
    for (int i = 0; i < 400; ++i) {
        if (pred()) return true;
        std::this_thread::sleep_for(5ms);
    }
    return pred();
}

} // namespace

TEST_SUITE("network") {

TEST_CASE("endpoint parsing") {
    auto e = net::parse_endpoint("10.0.0.2:9000", 16571);
    CHECK(e.host == "10.0.0.2");
    CHECK(e.port == 9000);
    e = net::parse_endpoint(":9001", 16571);
    CHECK(e.host == "127.0.0.1");
    CHECK(e.port == 9001);
    CHECK(net::parse_endpoint("9002", 1).port == 9002);
    CHECK(net::parse_endpoint("localhost", 16571).port == 16571);
    CHECK_THROWS_WITH_AS(net::parse_endpoint("host:99999", 1), doctest::Contains("bad-address"), Error);
    CHECK_THROWS_WITH_AS(net::parse_endpoint("host:abc", 1), doctest::Contains("bad-address"), Error);
}

TEST_CASE("producer to recorder over loopback keeps every sample") {
    LiveHub live;
    const auto path = temp_file("loopback.srec");
    Recorder recorder(live.hub, path);
    {
        ProducerClient producer(live.endpoint(), "ecg-sensor");
        const auto id = producer.declare(numeric("ecg", "ecg-sensor", 2, 256));
        producer.sync(kInitialProbeCount);
        std::vector<Sample> chunk;
        for (int i = 0; i < 5000; ++i) {
            chunk.push_back({i / 256.0, {float(i), float(-i)}});
            if (chunk.size() == 64) {
                producer.push(id, chunk);
                chunk.clear();
            }
        }
        producer.push(id, chunk);
        producer.marker("Experiment start", MarkerOrigin::Auto, 1.0);
        producer.bye();
        CHECK(producer.take_errors().empty());
    }
    recorder.stop();
    CHECK_FALSE(recorder.overflowed());
    const auto rec = read_recording(path);
    CHECK_FALSE(rec.truncated);
    CHECK(rec.footer.counts.at(1) == 5000);
    CHECK(rec.footer.counts.at(kMarkerStreamId) == 1);
    const auto samples = rec.samples(1);
    REQUIRE(samples.size() == 5000);
    CHECK(samples[4999].values[1] == -4999.0);
    CHECK(rec.offset_tables().at(1).size() == 1);
    std::filesystem::remove(path);
}

TEST_CASE("duplicate declaration is answered with ERR") {
    LiveHub live;
    ProducerClient producer(live.endpoint(), "gsr-sensor");
    producer.declare(numeric("gsr", "gsr-sensor"));
    CHECK_THROWS_WITH_AS(producer.declare(numeric("gsr", "gsr-sensor")), doctest::Contains("duplicate-stream"), Error);
    StreamInfo bad = numeric("gsr2", "gsr-sensor");
    bad.channel_labels.clear();
    CHECK_THROWS_WITH_AS(producer.declare(bad), doctest::Contains("bad-decl"), Error);
}

TEST_CASE("subscriber receives declarations, samples and markers") {
    LiveHub live;
    ProducerClient producer(live.endpoint(), "ppg-sensor");
    const auto id = producer.declare(numeric("ppg", "ppg-sensor"));
    SubscriberClient sub(live.endpoint(), wire::SubscribeFilter::All);
    // Wait until the subscription is registered (the marker stream and ppg are replayed).
    int decls = 0;
    while (decls < 2) {
        auto e = sub.next(2000ms);
        REQUIRE(e);
        if (std::holds_alternative<DeclEvent>(*e)) ++decls;
    }
    const std::vector<Sample> samples = {{1.0, {0.5}}, {2.0, {0.25}}};
    producer.push(id, samples);
    producer.marker("looked away", MarkerOrigin::Subject, 2.5);
    bool got_chunk = false, got_marker = false;
    while (!(got_chunk && got_marker)) {
        auto e = sub.next(2000ms);
        REQUIRE(e);
        if (auto* c = std::get_if<ChunkEvent>(&*e)) {
            CHECK(c->stream_id == id);
            CHECK(c->samples == samples);
            got_chunk = true;
        } else if (auto* m = std::get_if<MarkerEvent>(&*e)) {
            CHECK(m->marker.label == "looked away");
            CHECK(m->marker.origin == MarkerOrigin::Subject);
            got_marker = true;
        }
    }
    sub.close();
}

TEST_CASE("unregistered stream chunk gets ERR and the session carries on") {
    LiveHub live;
    auto stream = net::TcpStream::connect("127.0.0.1", live.server.port());
    wire::FrameDecoder decoder;
    stream.send_all(wire::encode_frame(wire::MsgType::Hello, wire::encode_hello("raw", "producer")));
    const auto json = stream_info_to_json(numeric("x", "raw"));
    stream.send_all(wire::encode_frame(wire::MsgType::StreamDecl, wire::Bytes(json.begin(), json.end())));
    const auto ack = read_until(stream, decoder, wire::MsgType::Ack);
    REQUIRE(ack);
    const auto id = wire::decode_ack(ack->payload);

    const std::vector<Sample> one = {{1.0, {1}}};
    stream.send_all(wire::encode_frame(wire::MsgType::SampleChunk, wire::encode_sample_chunk(999, one, 1)));
    const auto err = read_until(stream, decoder, wire::MsgType::Err);
    REQUIRE(err);
    CHECK(wire::decode_err(err->payload) == "unknown-stream");

    const wire::Bytes junk = {0x02, 0, 0, 0, 0x7F, 0};
    stream.send_all(junk);
    const auto err2 = read_until(stream, decoder, wire::MsgType::Err);
    REQUIRE(err2);
    CHECK(wire::decode_err(err2->payload) == "bad-type");

    stream.send_all(wire::encode_frame(wire::MsgType::SampleChunk, wire::encode_sample_chunk(id, one, 1)));
    CHECK(eventually([&] { return live.hub.pushed_counts().at(id) == 1; }));
}

TEST_CASE("dropping the socket without BYE marks the source lost") {
    LiveHub live;
    auto sub = live.hub.subscribe(wire::SubscribeFilter::MarkersOnly);
    {
        auto stream = net::TcpStream::connect("127.0.0.1", live.server.port());
        stream.send_all(wire::encode_frame(wire::MsgType::Hello, wire::encode_hello("mocap", "producer")));
        std::this_thread::sleep_for(50ms);
    }
    bool lost = false;
    while (auto e = sub->pop(2000ms)) {
        if (auto* m = std::get_if<MarkerEvent>(&*e); m && m->marker.label == "SOURCE-LOST:mocap") {
            lost = true;
            break;
        }
    }
    CHECK(lost);
}

TEST_CASE("sync over loopback recovers a shifted producer clock") {
    LiveHub live;
    const double shift = 0.25;
    ProducerClient producer(live.endpoint(), "shifted", [shift] { return steady_seconds() - shift; });
    const auto best = producer.sync(kInitialProbeCount);
    CHECK(best.rtt < 0.01);
    CHECK(std::abs(best.offset - shift) <= best.rtt / 2 + 1e-9);
    producer.bye();
}

TEST_CASE("server stop disconnects clients") {
    auto live = std::make_unique<LiveHub>();
    SubscriberClient sub(live->endpoint(), wire::SubscribeFilter::MarkersOnly);
    CHECK(sub.next(2000ms));
    live->server.stop();
    while (sub.next(2000ms)) {
    }
    CHECK_FALSE(sub.connected());
}

}
