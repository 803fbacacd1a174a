#include "syncrec/wire_protocol.hpp"

#include "byte_io.hpp"
#include "syncrec/error.hpp"

#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

namespace syncrec::wire {

using detail::ByteReader;
using detail::ByteWriter;

bool is_known_msg_type(std::uint8_t value) { return value >= 0x01 && value <= 0x0A; }

std::string_view to_string(MsgType type) {
    switch (type) {
    case MsgType::Hello: return "HELLO";
    case MsgType::StreamDecl: return "STREAM_DECL";
    case MsgType::SampleChunk: return "SAMPLE_CHUNK";
    case MsgType::Marker: return "MARKER";
    case MsgType::Ping: return "PING";
    case MsgType::Pong: return "PONG";
    case MsgType::Subscribe: return "SUBSCRIBE";
    case MsgType::Bye: return "BYE";
    case MsgType::Ack: return "ACK";
    case MsgType::Err: return "ERR";
    }
    return "?";
}

void check_payload_size(std::uint64_t payload_size) {
    if (payload_size > kMaxPayload) throw Error("oversize", "payload of " + std::to_string(payload_size) + " bytes");
}

Bytes encode_frame(MsgType type, ByteView payload) {
    check_payload_size(payload.size());
    Bytes out;
    out.reserve(kHeaderSize + 1 + payload.size());
    ByteWriter w(out);
    w.u32(static_cast<std::uint32_t>(payload.size() + 1));
    w.u8(static_cast<std::uint8_t>(type));
    w.bytes(payload);
    return out;
}

DecodeResult decode_frame(ByteView bytes) {
    if (bytes.size() < kHeaderSize) return Incomplete{};
    ByteReader r(bytes.first(kHeaderSize));
    const std::uint32_t length = r.u32();
    if (length == 0) return DecodeError{"bad-length", kHeaderSize};
    const std::size_t total = kHeaderSize + std::size_t{length};
    if (bytes.size() < total) return Incomplete{};
    const std::uint8_t type = bytes[kHeaderSize];
    if (!is_known_msg_type(type)) return DecodeError{"bad-type", total};
    Decoded out;
    out.frame.type = static_cast<MsgType>(type);
    out.frame.payload.assign(bytes.begin() + kHeaderSize + 1, bytes.begin() + total);
    out.consumed = total;
    return out;
}

void FrameDecoder::feed(ByteView bytes) {
    if (read_pos_ > 0 && read_pos_ * 2 >= buffer_.size()) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(read_pos_));
        read_pos_ = 0;
    }
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

DecodeResult FrameDecoder::next() {
    const ByteView pending(buffer_.data() + read_pos_, buffer_.size() - read_pos_);
    auto result = decode_frame(pending);
    if (const auto* d = std::get_if<Decoded>(&result)) read_pos_ += d->consumed;
    if (const auto* e = std::get_if<DecodeError>(&result)) read_pos_ += e->consumed;
    return result;
}

// SAMPLE_CHUNK ---------------------------------------------------------------

void append_sample_chunk(Bytes& out, StreamId stream_id, std::span<const Sample> samples,
                         std::uint32_t channel_count) {
    double previous = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        if (s.values.size() != channel_count)
            throw Error("ragged-sample", "sample has " + std::to_string(s.values.size()) + " values, stream has " +
                                             std::to_string(channel_count) + " channels");
        if (s.raw_timestamp < previous) throw Error("non-monotonic", "timestamps decrease within a chunk");
        previous = s.raw_timestamp;
    }
    out.reserve(out.size() + 8 + samples.size() * (8 + 4 * std::size_t{channel_count}));
    ByteWriter w(out);
    w.u32(stream_id);
    w.u32(static_cast<std::uint32_t>(samples.size()));
    for (const auto& s : samples) {
        w.f64(s.raw_timestamp);
        for (double v : s.values) w.f32(static_cast<float>(v));
    }
}

Bytes encode_sample_chunk(StreamId stream_id, std::span<const Sample> samples, std::uint32_t channel_count) {
    Bytes out;
    append_sample_chunk(out, stream_id, samples, channel_count);
    return out;
}

StreamId peek_stream_id(ByteView payload) { return ByteReader(payload).u32(); }

SampleChunk decode_sample_chunk(ByteView payload, std::uint32_t channel_count) {
    ByteReader r(payload);
    SampleChunk chunk;
    chunk.stream_id = r.u32();
    const std::uint32_t count = r.u32();
    const std::size_t per_sample = 8 + 4 * std::size_t{channel_count};
    if (r.remaining() != per_sample * count)
        throw Error("bad-chunk", "chunk of " + std::to_string(count) + " samples has " + std::to_string(r.remaining()) +
                                     " payload bytes");
    chunk.samples.resize(count);
    for (auto& s : chunk.samples) {
        s.raw_timestamp = r.f64();
        s.values.resize(channel_count);
        for (auto& v : s.values) v = r.f32();
    }
    return chunk;
}

// Small payloads --------------------------------------------------------------

Bytes encode_ping(double t0) {
    Bytes out;
    ByteWriter(out).f64(t0);
    return out;
}

double decode_ping(ByteView payload) { return ByteReader(payload).f64(); }

Bytes encode_pong(const Pong& pong) {
    Bytes out;
    ByteWriter w(out);
    w.f64(pong.t0);
    w.f64(pong.t1);
    w.f64(pong.t2);
    return out;
}

Pong decode_pong(ByteView payload) {
    ByteReader r(payload);
    Pong p;
    p.t0 = r.f64();
    p.t1 = r.f64();
    p.t2 = r.f64();
    return p;
}

Bytes encode_sync_report(const SyncReport& report) {
    Bytes out;
    ByteWriter w(out);
    w.f64(report.t0);
    w.f64(report.t1);
    w.f64(report.t2);
    w.f64(report.t3);
    return out;
}

SyncReport decode_sync_report(ByteView payload) {
    ByteReader r(payload);
    SyncReport s;
    s.t0 = r.f64();
    s.t1 = r.f64();
    s.t2 = r.f64();
    s.t3 = r.f64();
    return s;
}

Bytes encode_ack(StreamId stream_id) {
    Bytes out;
    ByteWriter(out).u32(stream_id);
    return out;
}

StreamId decode_ack(ByteView payload) { return ByteReader(payload).u32(); }

Bytes encode_err(std::string_view code) { return Bytes(code.begin(), code.end()); }

std::string decode_err(ByteView payload) { return std::string(payload.begin(), payload.end()); }

Bytes encode_subscribe(SubscribeFilter filter) { return Bytes{static_cast<std::uint8_t>(filter)}; }

SubscribeFilter decode_subscribe(ByteView payload) {
    if (payload.empty()) return SubscribeFilter::All;
    const auto value = payload[0];
    if (value > 1) throw Error("bad-subscribe", "unknown filter " + std::to_string(value));
    return static_cast<SubscribeFilter>(value);
}

namespace {

void write_marker(ByteWriter& w, const MarkerMessage& marker) {
    if (marker.label.size() > 0xFFFF) throw Error("oversize", "marker label longer than 65535 bytes");
    w.f64(marker.raw_t);
    w.u8(static_cast<std::uint8_t>(marker.origin));
    w.u16(static_cast<std::uint16_t>(marker.label.size()));
    w.text(marker.label);
}

MarkerMessage read_marker(ByteReader& r) {
    MarkerMessage m;
    m.raw_t = r.f64();
    const auto origin = r.u8();
    if (origin > 2) throw Error("bad-origin", "unknown marker origin " + std::to_string(origin));
    m.origin = static_cast<MarkerOrigin>(origin);
    m.label = r.text(r.u16());
    return m;
}

} // namespace

Bytes encode_marker(const MarkerMessage& marker) {
    Bytes out;
    ByteWriter w(out);
    write_marker(w, marker);
    return out;
}

MarkerMessage decode_marker(ByteView payload) {
    ByteReader r(payload);
    return read_marker(r);
}

Bytes encode_forwarded_marker(const ForwardedMarker& marker) {
    Bytes out;
    ByteWriter w(out);
    write_marker(w, marker.marker);
    w.u32(marker.source_ref);
    return out;
}

ForwardedMarker decode_forwarded_marker(ByteView payload) {
    ByteReader r(payload);
    ForwardedMarker fm;
    fm.marker = read_marker(r);
    fm.source_ref = r.u32();
    return fm;
}

Bytes encode_hello(std::string_view source_id, std::string_view role) {
    const auto text = nlohmann::json{{"source_id", source_id}, {"role", role}}.dump();
    return Bytes(text.begin(), text.end());
}

std::pair<std::string, std::string> decode_hello(ByteView payload) {
    try {
        const auto doc = nlohmann::json::parse(payload.begin(), payload.end());
        return {doc.at("source_id").get<std::string>(), doc.value("role", std::string("producer"))};
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad-hello", e.what());
    }
}

Bytes encode_forwarded_decl(const ForwardedDecl& decl) {
    auto doc = nlohmann::json::parse(stream_info_to_json(decl.info));
    doc["stream_id"] = decl.stream_id;
    doc["source_ref"] = decl.source_ref;
    const auto text = doc.dump();
    return Bytes(text.begin(), text.end());
}

ForwardedDecl decode_forwarded_decl(ByteView payload) {
    const std::string text(payload.begin(), payload.end());
    ForwardedDecl decl;
    decl.info = stream_info_from_json(text);
    try {
        const auto doc = nlohmann::json::parse(text);
        decl.stream_id = doc.at("stream_id").get<StreamId>();
        decl.source_ref = doc.at("source_ref").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad-decl", e.what());
    }
    return decl;
}

} // namespace syncrec::wire
