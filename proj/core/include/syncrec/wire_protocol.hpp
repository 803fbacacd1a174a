/**
 * @file wire_protocol.hpp
 * @brief Length-prefixed framing for producer/subscriber <-> hub sessions.
 *
 * Frame layout (all integers little-endian):
 *
 *     [u32 length][u8 msg_type][payload: length - 1 bytes]
 *
 * where length counts msg_type plus payload. Numeric samples travel in
 * SAMPLE_CHUNK payloads as `[u32 stream_id][u32 count]` followed by `count`
 * repetitions of `[f64 raw_timestamp][channel_count x f32]`.
 */
#pragma once

#include "syncrec/stream_model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace syncrec::wire {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline constexpr std::uint16_t kDefaultHubPort = 16571;
inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::uint64_t kMaxPayload = 0xFFFFFFFEull; ///< length field (payload + 1) must fit u32

enum class MsgType : std::uint8_t {
    Hello = 0x01,
    StreamDecl = 0x02,
    SampleChunk = 0x03,
    Marker = 0x04,
    Ping = 0x05,
    Pong = 0x06,
    Subscribe = 0x07,
    Bye = 0x08,
    Ack = 0x09,
    Err = 0x0A,
};

bool is_known_msg_type(std::uint8_t value);
std::string_view to_string(MsgType type);

struct Frame {
    MsgType type{};
    Bytes payload;

    bool operator==(const Frame&) const = default;
};

/// Throws Error("oversize") when `payload_size` cannot be framed.
void check_payload_size(std::uint64_t payload_size);
Bytes encode_frame(MsgType type, ByteView payload);
inline Bytes encode_frame(const Frame& frame) { return encode_frame(frame.type, frame.payload); }

struct Incomplete {};
struct Decoded {
    Frame frame;
    std::size_t consumed = 0; ///< header + length bytes
};
struct DecodeError {
    std::string code; ///< "bad-type" or "bad-length"
    std::size_t consumed = 0; ///< bytes to skip to resynchronise (whole frame when known)
};
using DecodeResult = std::variant<Incomplete, Decoded, DecodeError>;

/// Decodes the first frame in `bytes`. Never reads beyond the declared frame.
DecodeResult decode_frame(ByteView bytes);

/// Incremental decoder for one connection: feed arbitrary byte slices,
/// pop complete frames.
class FrameDecoder {
public:
    void feed(ByteView bytes);
    /// Next frame or error from the buffered bytes; Incomplete when more
    /// bytes are needed. Malformed frames are consumed as they are reported.
    DecodeResult next();
    std::size_t buffered() const { return buffer_.size() - read_pos_; }

private:
    Bytes buffer_;
    std::size_t read_pos_ = 0;
};

// SAMPLE_CHUNK ---------------------------------------------------------------

struct SampleChunk {
    StreamId stream_id = 0;
    std::vector<Sample> samples;

    bool operator==(const SampleChunk&) const = default;
};

/// Throws Error("ragged-sample") on a value-count mismatch and
/// Error("non-monotonic") when timestamps decrease.
Bytes encode_sample_chunk(StreamId stream_id, std::span<const Sample> samples, std::uint32_t channel_count);
/// Appends the same layout to `out` (used by the recorder).
void append_sample_chunk(Bytes& out, StreamId stream_id, std::span<const Sample> samples,
                         std::uint32_t channel_count);
/// Stream id of a SAMPLE_CHUNK payload; throws Error("short-payload").
StreamId peek_stream_id(ByteView payload);
/// Throws Error("bad-chunk") when the payload size disagrees with count and channel_count.
SampleChunk decode_sample_chunk(ByteView payload, std::uint32_t channel_count);

// Small payloads --------------------------------------------------------------

struct Pong {
    double t0 = 0, t1 = 0, t2 = 0;
    bool operator==(const Pong&) const = default;
};

/// Producer -> hub report of a completed exchange, carried in a PONG frame
/// with a 32-byte payload.
struct SyncReport {
    double t0 = 0, t1 = 0, t2 = 0, t3 = 0;
    bool operator==(const SyncReport&) const = default;
};

struct MarkerMessage {
    double raw_t = 0;
    MarkerOrigin origin = MarkerOrigin::Auto;
    std::string label;
    bool operator==(const MarkerMessage&) const = default;
};

enum class SubscribeFilter : std::uint8_t { All = 0, MarkersOnly = 1 };

/// STREAM_DECL sent hub -> subscriber (a declaration plus its assigned id).
struct ForwardedDecl {
    StreamId stream_id = 0;
    std::uint32_t source_ref = 0;
    StreamInfo info;
};

/// MARKER sent hub -> subscriber; carries the originating session.
struct ForwardedMarker {
    MarkerMessage marker;
    std::uint32_t source_ref = 0;
};

Bytes encode_ping(double t0);
double decode_ping(ByteView payload);
Bytes encode_pong(const Pong& pong);
Pong decode_pong(ByteView payload);
Bytes encode_sync_report(const SyncReport& report);
SyncReport decode_sync_report(ByteView payload);
inline bool is_sync_report(ByteView pong_payload) { return pong_payload.size() == 32; }

Bytes encode_ack(StreamId stream_id);
StreamId decode_ack(ByteView payload);
Bytes encode_err(std::string_view code);
std::string decode_err(ByteView payload);
Bytes encode_subscribe(SubscribeFilter filter);
SubscribeFilter decode_subscribe(ByteView payload);

/// `[f64 raw_t][u8 origin][u16 label_len][label]`
Bytes encode_marker(const MarkerMessage& marker);
MarkerMessage decode_marker(ByteView payload);
Bytes encode_forwarded_marker(const ForwardedMarker& marker);
ForwardedMarker decode_forwarded_marker(ByteView payload);

Bytes encode_hello(std::string_view source_id, std::string_view role);
/// Returns (source_id, role).
std::pair<std::string, std::string> decode_hello(ByteView payload);
Bytes encode_forwarded_decl(const ForwardedDecl& decl);
ForwardedDecl decode_forwarded_decl(ByteView payload);

} // namespace syncrec::wire
