/**
 * @file epocher.hpp
 * @brief Offline timestamp correction and marker-aligned epoching.
 *
 * Every sample is mapped onto the hub timeline with its source's offset
 * table, then cut into closed windows [-pre, +post] around each matching
 * marker. Samples are exported as-is, without resampling.
 */
#pragma once

#include "syncrec/recorder.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace syncrec {

struct CorrectedStream {
    StreamId stream_id = 0;
    std::uint32_t source_ref = 0;
    StreamInfo info;
    std::vector<double> times; ///< hub timeline, seconds
    std::vector<std::vector<double>> values;
};

struct CorrectedMarker {
    double time = 0; ///< hub timeline
    std::string label;
    MarkerOrigin origin = MarkerOrigin::Auto;
    std::uint32_t source_ref = 0;
};

struct CorrectedRecording {
    std::vector<CorrectedStream> streams; ///< numeric streams in id order
    std::vector<CorrectedMarker> markers; ///< sorted by corrected time (stable)
};

/// Throws Error("unsynchronized-source") when a source with samples or
/// markers has no offset entries. Hub-local data (source 0) is not shifted.
CorrectedRecording correct_recording(const Recording& rec);

struct StreamSlice {
    std::string name; ///< stream name, or "source_id/name" when names collide
    std::vector<double> relative_t;
    std::vector<std::vector<double>> values;

    bool operator==(const StreamSlice&) const = default;
};

struct Epoch {
    std::string label;
    double marker_t = 0;
    double pre = 0;
    double post = 0;
    std::vector<StreamSlice> slices;
};

using LabelMatcher = std::function<bool(std::string_view)>;

/// One epoch per marker whose label equals `label`, in corrected-time order.
/// Throws Error("bad-window") for negative pre/post, Error("empty-label").
std::vector<Epoch> extract_epochs(const Recording& rec, std::string_view label, double pre, double post);
std::vector<Epoch> extract_epochs(const CorrectedRecording& rec, std::string_view label, double pre, double post);
std::vector<Epoch> extract_epochs(const CorrectedRecording& rec, const LabelMatcher& matches, double pre, double post);

/// One JSON object per line: {"label", "marker_t", "streams": {name: {"relative_t", "values"}}}.
std::string epoch_to_json_line(const Epoch& epoch);
void export_epochs(std::span<const Epoch> epochs, std::ostream& out);
/// Throws Error("io") on failure.
void export_epochs(std::span<const Epoch> epochs, const std::filesystem::path& path);
/// Reads an export back (pre/post are not part of the file and stay 0).
std::vector<Epoch> parse_epochs(std::istream& in);

/// Shell-style wildcard match ('*' and '?').
bool glob_match(std::string_view pattern, std::string_view text);

} // namespace syncrec
