/**
 * @file stream_model.hpp
 * @brief Stream declarations, samples and event markers.
 *
 * Timestamps are 64-bit seconds on the producer's local clock. Markers are a
 * text-valued stream; the hub owns the reserved marker stream id 0.
 */
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace syncrec {

using StreamId = std::uint32_t;

/// Stream id reserved for the hub's marker stream.
inline constexpr StreamId kMarkerStreamId = 0;

enum class StreamKind : std::uint8_t { Numeric = 0, Marker = 1 };

struct StreamInfo {
    std::string name;
    std::string source_id;
    StreamKind kind = StreamKind::Numeric;
    std::uint32_t channel_count = 1;
    double nominal_rate_hz = 0.0; ///< 0 means irregular
    std::vector<std::string> channel_labels;
    std::vector<std::string> units; ///< one per channel

    bool operator==(const StreamInfo&) const = default;
};

struct Sample {
    double raw_timestamp = 0.0;
    std::vector<double> values;

    bool operator==(const Sample&) const = default;
};

enum class MarkerOrigin : std::uint8_t { Auto = 0, Investigator = 1, Subject = 2 };

struct MarkerSample {
    double raw_timestamp = 0.0;
    std::string label;
    MarkerOrigin origin = MarkerOrigin::Auto;

    bool operator==(const MarkerSample&) const = default;
};

std::string_view to_string(StreamKind kind);
std::string_view to_string(MarkerOrigin origin);
StreamKind stream_kind_from_string(std::string_view text);
MarkerOrigin marker_origin_from_string(std::string_view text);

/// Every violated declaration rule; empty means the declaration is valid.
std::vector<std::string> validate_stream_info(const StreamInfo& info);

inline bool is_valid(const StreamInfo& info) { return validate_stream_info(info).empty(); }

std::string stream_info_to_json(const StreamInfo& info);
/// Throws Error("bad-decl") on malformed documents.
StreamInfo stream_info_from_json(std::string_view text);

/// True when the sample is finite-stamped and carries one value per channel.
bool sample_fits(const StreamInfo& info, const Sample& sample);

struct CatalogEntry {
    int case_study = 1; ///< 1 or 2
    std::string label;
    std::string definition;
};

/// Number of tasks the per-task labels ("Task [n] ...") are expanded over.
inline constexpr int kCatalogTaskCount = 4;

/// Auto-generated event markers of both case studies, in table order, with
/// the "Task [n] ..." rows expanded for tasks 1..4. "Experiment start" and
/// "Experiment end" are listed once per case.
const std::vector<CatalogEntry>& marker_catalog();

bool is_catalog_label(std::string_view label);

/// Hub-generated diagnostics ("RECORDER-OVERFLOW", "SOURCE-LOST:<id>").
bool is_diagnostic_label(std::string_view label);

/// Auto markers must come from the catalog (or be hub diagnostics); manual
/// markers may be free text. Labels are never empty.
bool is_valid_marker(const MarkerSample& marker);

namespace labels {
inline constexpr std::string_view kExperimentStart = "Experiment start";
inline constexpr std::string_view kExperimentEnd = "Experiment end";
inline constexpr std::string_view kRobotApproaching = "Robot approaching";
inline constexpr std::string_view kPickUpSuccessful = "Pick up successful";
inline constexpr std::string_view kPickUpFailed = "Pick up failed";
inline constexpr std::string_view kRobotStateChange = "Robot state change";
inline constexpr std::string_view kRobotStopping = "Robot is stopping";
inline constexpr std::string_view kRobotSpeedingUp = "Robot is speeding up";
inline constexpr std::string_view kRobotSlowingDown = "Robot is slowing down";
inline constexpr std::string_view kRecorderOverflow = "RECORDER-OVERFLOW";
inline constexpr std::string_view kSourceLostPrefix = "SOURCE-LOST:";

std::string task_init(int task);
std::string task_start(int task);
std::string task_end(int task);
} // namespace labels

} // namespace syncrec
