/**
 * @file recorder.hpp
 * @brief The `.srec` recording format: writer, reader and hub recorder.
 *
 * Layout (little-endian throughout):
 *
 *     "SREC" u16 version=1 u16 reserved=0
 *     record*   where record = [u8 type][u32 length][payload]
 *
 *     type 1  declaration   UTF-8 JSON: StreamInfo fields + stream_id + source_ref
 *     type 2  numeric chunk [u32 stream_id][u32 count]{[f64 t][f32 x channels]}
 *     type 3  marker        [f64 raw_t][u8 origin][u16 len][label][u32 source_ref]
 *     type 4  offset entry  [u32 source_ref][f64 measured_at][f64 offset]
 *     type 5  footer        UTF-8 JSON {"counts": {id: n}, "metadata": {k: v}}
 *
 * Records are append-only, so a file cut anywhere still yields every
 * complete record before the cut.
 */
#pragma once

#include "syncrec/clock_sync.hpp"
#include "syncrec/hub.hpp"
#include "syncrec/stream_model.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace syncrec {

inline constexpr std::uint16_t kSrecVersion = 1;
inline constexpr std::size_t kSrecPreambleSize = 8;

enum class RecordType : std::uint8_t { Declaration = 1, NumericChunk = 2, Marker = 3, OffsetEntry = 4, Footer = 5 };

struct StreamDecl {
    StreamId stream_id = 0;
    std::uint32_t source_ref = 0;
    StreamInfo info;
    bool operator==(const StreamDecl&) const = default;
};

struct NumericChunk {
    StreamId stream_id = 0;
    std::vector<Sample> samples;
    bool operator==(const NumericChunk&) const = default;
};

struct MarkerRecord {
    MarkerSample marker;
    std::uint32_t source_ref = 0;
    bool operator==(const MarkerRecord&) const = default;
};

struct OffsetRecord {
    std::uint32_t source_ref = 0;
    OffsetEntry entry;
    bool operator==(const OffsetRecord&) const = default;
};

using RecordEvent = std::variant<StreamDecl, NumericChunk, MarkerRecord, OffsetRecord>;

using Metadata = std::map<std::string, std::string>;

struct Footer {
    std::map<StreamId, std::uint64_t> counts; ///< samples per stream, markers under id 0
    Metadata metadata;
    bool operator==(const Footer&) const = default;
};

struct Recording {
    std::vector<RecordEvent> records; ///< file order
    Footer footer;
    bool truncated = false; ///< footer missing or last record cut short

    /// Recording a writer would produce from `events` (counts derived).
    static Recording from_events(std::vector<RecordEvent> events, Metadata metadata = {});

    std::vector<StreamDecl> declarations() const;
    std::optional<StreamDecl> declaration(StreamId id) const;
    std::map<std::uint32_t, OffsetTable> offset_tables() const;
    std::vector<MarkerRecord> markers() const;
    /// Concatenated samples of one stream in file order.
    std::vector<Sample> samples(StreamId id) const;
    /// Sample counts found by scanning the records.
    std::map<StreamId, std::uint64_t> scanned_counts() const;

    bool operator==(const Recording& other) const {
        return records == other.records && footer == other.footer && truncated == other.truncated;
    }
};

/// Append-only `.srec` writer.
class RecordingWriter {
public:
    /// Truncates/creates `path`. Throws Error("io").
    explicit RecordingWriter(const std::filesystem::path& path);
    /// Writes into an in-memory buffer (see bytes()).
    RecordingWriter();
    ~RecordingWriter();

    RecordingWriter(const RecordingWriter&) = delete;
    RecordingWriter& operator=(const RecordingWriter&) = delete;

    /// Throws Error("undeclared-stream") for chunks of unknown streams,
    /// Error("io") with the file offset on write failure.
    void write(const RecordEvent& event);
    /// Writes the footer; further writes are rejected.
    void finish(const Metadata& metadata = {});

    bool finished() const { return finished_; }
    std::uint64_t offset() const { return offset_; }
    const std::map<StreamId, std::uint64_t>& counts() const { return counts_; }
    /// In-memory mode only.
    const std::vector<std::uint8_t>& bytes() const { return memory_; }

private:
    void emit(RecordType type, std::span<const std::uint8_t> payload);

    std::unique_ptr<std::ofstream> file_;
    std::vector<std::uint8_t> memory_;
    std::map<StreamId, std::uint32_t> channel_counts_;
    std::map<StreamId, std::uint64_t> counts_;
    std::uint64_t offset_ = 0;
    bool finished_ = false;
};

/// Serialises `events` followed by a footer.
std::vector<std::uint8_t> write_recording(std::span<const RecordEvent> events, const Metadata& metadata = {});
void write_recording(std::span<const RecordEvent> events, const std::filesystem::path& path,
                     const Metadata& metadata = {});

/// Errors: "not-srec" (bad magic), "unsupported-version", "corrupt".
Recording read_recording(std::span<const std::uint8_t> bytes);
Recording read_recording(const std::filesystem::path& path);

/// `<experiment>_<subject>_<ISO8601>.srec` (basic format, UTC).
std::string recording_file_name(std::string_view experiment, std::string_view subject);

RecordEvent to_record_event(const HubEvent& event);

/// Hub subscriber that persists everything it receives.
class Recorder {
public:
    Recorder(Hub& hub, const std::filesystem::path& path,
             std::optional<std::size_t> queue_capacity = std::nullopt);
    ~Recorder();

    Recorder(const Recorder&) = delete;
    Recorder& operator=(const Recorder&) = delete;

    void set_metadata(std::string key, std::string value);
    /// Drains everything the hub delivered, writes the footer, closes the file.
    void stop();
    bool overflowed() const;
    std::map<StreamId, std::uint64_t> counts() const;
    /// First write error, if the background writer failed.
    std::optional<std::string> error() const;

private:
    void run();

    Hub& hub_;
    std::shared_ptr<Subscription> subscription_;
    RecordingWriter writer_;
    Metadata metadata_;
    mutable std::mutex mutex_;
    std::optional<std::string> error_;
    std::thread thread_;
    bool stopped_ = false;
};

} // namespace syncrec
