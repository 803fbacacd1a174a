#include "syncrec/error.hpp"
#include "syncrec/wire_protocol.hpp"

#include <doctest.h>

#include <cstring>
#include <random>

using namespace syncrec;
using namespace syncrec::wire;

namespace {

template <typename T>
void put(Bytes& out, T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    out.insert(out.end(), raw, raw + sizeof(T));
}

Bytes random_bytes(std::mt19937& rng, std::size_t n) {
    std::uniform_int_distribution<int> byte(0, 255);
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(byte(rng));
    return b;
}

std::vector<Sample> random_samples(std::mt19937& rng, std::size_t n, std::uint32_t channels) {
    std::uniform_real_distribution<float> value(-1e3f, 1e3f);
    std::uniform_real_distribution<double> step(0.0, 0.01);
    std::vector<Sample> out;
    double t = 100.0;
    for (std::size_t i = 0; i < n; ++i) {
        t += step(rng);
        Sample s{t, {}};
        for (std::uint32_t c = 0; c < channels; ++c) s.values.push_back(value(rng));
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace

TEST_SUITE("wire_protocol") {

TEST_CASE("encode ping frame bytes") {
    const Bytes payload(8, 0);
    const Bytes expect = {0x09, 0, 0, 0, 0x05, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(encode_frame(MsgType::Ping, payload) == expect);
}

TEST_CASE("encode empty bye frame") {
    const Bytes expect = {0x01, 0, 0, 0, 0x08};
    CHECK(encode_frame(MsgType::Bye, {}) == expect);
}

TEST_CASE("decode needs the full header") {
    const Bytes frame = encode_frame(MsgType::Bye, {});
    for (std::size_t n = 0; n < 4; ++n)
        CHECK(std::holds_alternative<Incomplete>(decode_frame(ByteView(frame.data(), n))));
}

TEST_CASE("decode bye") {
    const Bytes bytes = {0x01, 0, 0, 0, 0x08};
    const auto r = decode_frame(bytes);
    REQUIRE(std::holds_alternative<Decoded>(r));
    CHECK(std::get<Decoded>(r).frame.type == MsgType::Bye);
    CHECK(std::get<Decoded>(r).frame.payload.empty());
    CHECK(std::get<Decoded>(r).consumed == 5);
}

TEST_CASE("unknown message type is bad-type and is skipped whole") {
    const Bytes bytes = {0x03, 0, 0, 0, 0x7F, 1, 2};
    const auto r = decode_frame(bytes);
    REQUIRE(std::holds_alternative<DecodeError>(r));
    CHECK(std::get<DecodeError>(r).code == "bad-type");
    CHECK(std::get<DecodeError>(r).consumed == 7);
}

TEST_CASE("zero length field is bad-length") {
    const Bytes bytes = {0, 0, 0, 0, 0x08};
    const auto r = decode_frame(bytes);
    REQUIRE(std::holds_alternative<DecodeError>(r));
    CHECK(std::get<DecodeError>(r).code == "bad-length");
}

TEST_CASE("decode never reads past the declared frame") {
    Bytes bytes = encode_frame(MsgType::Ack, encode_ack(3));
    bytes.push_back(0xEE);
    const auto r = decode_frame(bytes);
    REQUIRE(std::holds_alternative<Decoded>(r));
    CHECK(std::get<Decoded>(r).consumed == bytes.size() - 1);
}

TEST_CASE("random payload roundtrip") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Bytes payload = random_bytes(rng, 1024);
        const Bytes frame = encode_frame(MsgType::SampleChunk, payload);
        const auto r = decode_frame(frame);
        REQUIRE(std::holds_alternative<Decoded>(r));
        CHECK(std::get<Decoded>(r).frame.payload == payload);
        CHECK(encode_frame(std::get<Decoded>(r).frame) == frame);
    }
}

TEST_CASE("streaming decoder survives arbitrary splits") {
    std::mt19937 rng(11);
    std::vector<Frame> frames;
    Bytes stream;
    std::uniform_int_distribution<int> len(0, 300);
    const MsgType types[] = {MsgType::Hello, MsgType::SampleChunk, MsgType::Marker, MsgType::Ping, MsgType::Bye};
    for (int i = 0; i < 200; ++i) {
        Frame f{types[i % 5], random_bytes(rng, static_cast<std::size_t>(len(rng)))};
        const auto enc = encode_frame(f);
        stream.insert(stream.end(), enc.begin(), enc.end());
        frames.push_back(std::move(f));
    }
    for (int split_trial = 0; split_trial < 10; ++split_trial) {
        FrameDecoder decoder;
        std::vector<Frame> got;
        std::size_t pos = 0;
        std::uniform_int_distribution<std::size_t> piece(1, 97);
        while (pos < stream.size()) {
            const std::size_t n = std::min(piece(rng), stream.size() - pos);
            decoder.feed(ByteView(stream.data() + pos, n));
            pos += n;
            for (;;) {
                auto r = decoder.next();
                if (std::holds_alternative<Incomplete>(r)) break;
                REQUIRE(std::holds_alternative<Decoded>(r));
                got.push_back(std::get<Decoded>(std::move(r)).frame);
            }
        }
        CHECK(got == frames);
        CHECK(decoder.buffered() == 0);
    }
}

TEST_CASE("decoder resynchronises after a bad frame") {
    FrameDecoder decoder;
    Bytes bytes = {0x02, 0, 0, 0, 0x7F, 9};
    const auto good = encode_frame(MsgType::Bye, {});
    bytes.insert(bytes.end(), good.begin(), good.end());
    decoder.feed(bytes);
    CHECK(std::holds_alternative<DecodeError>(decoder.next()));
    const auto r = decoder.next();
    REQUIRE(std::holds_alternative<Decoded>(r));
    CHECK(std::get<Decoded>(r).frame.type == MsgType::Bye);
}

TEST_CASE("sample chunk layout") {
    const std::vector<Sample> one = {{1.0, {2.5}}};
    Bytes expect;
    put<std::uint32_t>(expect, 7);
    put<std::uint32_t>(expect, 1);
    put<double>(expect, 1.0);
    put<float>(expect, 2.5f);
    CHECK(encode_sample_chunk(7, one, 1) == expect);
    CHECK(peek_stream_id(expect) == 7);

    const auto empty = encode_sample_chunk(7, {}, 1);
    CHECK(empty.size() == 8);
    CHECK(decode_sample_chunk(empty, 1).samples.empty());
}

TEST_CASE("thousand random samples roundtrip through f32 channels") {
    std::mt19937 rng(3);
    const auto samples = random_samples(rng, 1000, 3);
    const auto decoded = decode_sample_chunk(encode_sample_chunk(5, samples, 3), 3);
    CHECK(decoded.stream_id == 5);
    CHECK(decoded.samples == samples);
}

TEST_CASE("sample chunk errors") {
    const std::vector<Sample> ragged = {{0.0, {1, 2}}, {1.0, {1}}};
    CHECK_THROWS_WITH_AS(encode_sample_chunk(1, ragged, 2), doctest::Contains("ragged-sample"), Error);
    const std::vector<Sample> backwards = {{1.0, {1}}, {0.5, {1}}};
    CHECK_THROWS_WITH_AS(encode_sample_chunk(1, backwards, 1), doctest::Contains("non-monotonic"), Error);
    auto payload = encode_sample_chunk(1, std::vector<Sample>{{0.0, {1}}}, 1);
    payload.pop_back();
    CHECK_THROWS_WITH_AS(decode_sample_chunk(payload, 1), doctest::Contains("bad-chunk"), Error);
    CHECK_THROWS_WITH_AS(peek_stream_id(Bytes{1, 2}), doctest::Contains("short-payload"), Error);
}

TEST_CASE("oversize payload is refused") {
    CHECK_NOTHROW(check_payload_size(kMaxPayload));
    CHECK_THROWS_WITH_AS(check_payload_size(kMaxPayload + 1), doctest::Contains("oversize"), Error);
}

TEST_CASE("small payload codecs roundtrip") {
    CHECK(decode_ping(encode_ping(12.5)) == 12.5);
    const Pong pong{1, 2, 3};
    CHECK(decode_pong(encode_pong(pong)) == pong);
    const SyncReport report{1, 2, 3, 4};
    const auto report_bytes = encode_sync_report(report);
    CHECK(report_bytes.size() == 32);
    CHECK(is_sync_report(report_bytes));
    CHECK_FALSE(is_sync_report(encode_pong(pong)));
    CHECK(decode_sync_report(report_bytes) == report);
    CHECK(decode_ack(encode_ack(42)) == 42);
    CHECK(decode_err(encode_err("duplicate-stream")) == "duplicate-stream");
    CHECK(decode_subscribe(encode_subscribe(SubscribeFilter::MarkersOnly)) == SubscribeFilter::MarkersOnly);

    const MarkerMessage m{3.25, MarkerOrigin::Investigator, "subject adjusted glasses"};
    CHECK(decode_marker(encode_marker(m)) == m);
    const ForwardedMarker fm{m, 4};
    const auto fm2 = decode_forwarded_marker(encode_forwarded_marker(fm));
    CHECK(fm2.marker == m);
    CHECK(fm2.source_ref == 4);

    const auto [source, role] = decode_hello(encode_hello("gsr-sensor", "producer"));
    CHECK(source == "gsr-sensor");
    CHECK(role == "producer");

    ForwardedDecl decl{9, 2, {"ecg", "ecg-sensor", StreamKind::Numeric, 1, 256.0, {"ecg"}, {"mV"}}};
    const auto decl2 = decode_forwarded_decl(encode_forwarded_decl(decl));
    CHECK(decl2.stream_id == 9);
    CHECK(decl2.source_ref == 2);
    CHECK(decl2.info == decl.info);
}

TEST_CASE("marker layout") {
    Bytes expect;
    put<double>(expect, 2.0);
    put<std::uint8_t>(expect, 1);
    put<std::uint16_t>(expect, 2);
    expect.push_back('h');
    expect.push_back('i');
    CHECK(encode_marker({2.0, MarkerOrigin::Investigator, "hi"}) == expect);
}

TEST_CASE("known message types") {
    for (int v = 1; v <= 0x0A; ++v) CHECK(is_known_msg_type(static_cast<std::uint8_t>(v)));
    CHECK_FALSE(is_known_msg_type(0));
    CHECK_FALSE(is_known_msg_type(0x0B));
    CHECK(to_string(MsgType::SampleChunk) == "SAMPLE_CHUNK");
}

}
