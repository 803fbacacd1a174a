/**
 * @file clock_sync.hpp
 * @brief Producer-to-hub clock offset estimation from four-timestamp exchanges.
 *
 * A producer sends PING at t0 (its clock); the hub stamps receipt t1 and
 * reply t2 (hub clock); the producer receives the PONG at t3. Then
 *
 *     offset = ((t1 - t0) + (t2 - t3)) / 2      (hub_time - producer_time)
 *     rtt    = (t3 - t0) - (t2 - t1)
 *
 * and the offset error is bounded by rtt / 2 whatever the delay asymmetry.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace syncrec {

inline constexpr double kPingIntervalSeconds = 5.0;
inline constexpr std::size_t kSyncWindowSize = 12;
/// A sync round is a short train of PING/PONG exchanges; only its min-rtt
/// exchange is reported, so each window slot is already a best-of-train.
inline constexpr std::size_t kProbesPerRound = 8;
/// Train length of the first round after a producer connects.
inline constexpr std::size_t kInitialProbeCount = 64;

struct OffsetMeasurement {
    double t0 = 0, t1 = 0, t2 = 0, t3 = 0;
    double offset = 0;
    double rtt = 0;

    /// Hub time at which the exchange completed on the hub side.
    double measured_at() const { return t2; }
};

/// Throws Error("non-causal") when the exchange implies a negative round trip.
OffsetMeasurement measure_offset(double t0, double t1, double t2, double t3);

/// Offset of the minimum-rtt measurement (latest wins ties). Throws
/// Error("empty-window") on an empty window.
double select_offset(std::span<const OffsetMeasurement> window);
/// The measurement select_offset picks.
const OffsetMeasurement& select_measurement(std::span<const OffsetMeasurement> window);

struct OffsetEntry {
    double measured_at = 0; ///< hub seconds
    double offset = 0;      ///< hub - producer seconds

    bool operator==(const OffsetEntry&) const = default;
};

/// Time-ordered offset estimates for one source.
class OffsetTable {
public:
    OffsetTable() = default;
    explicit OffsetTable(std::uint32_t source_ref) : source_ref_(source_ref) {}
    OffsetTable(std::uint32_t source_ref, std::vector<OffsetEntry> entries);

    /// Throws Error("non-monotonic") unless measured_at exceeds the last entry.
    void append(OffsetEntry entry);
    /// Like append, but silently drops entries that are not strictly later.
    bool try_append(OffsetEntry entry);

    std::uint32_t source_ref() const { return source_ref_; }
    const std::vector<OffsetEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

    /// Offset applicable to a raw producer timestamp: linear interpolation
    /// between bracketing entries, clamped outside the measured range.
    /// Entries are placed on the producer axis (measured_at - offset) so the
    /// lookup is exact for a linearly drifting clock.
    double offset_at(double raw_t) const;

    bool operator==(const OffsetTable& other) const {
        return source_ref_ == other.source_ref_ && entries_ == other.entries_;
    }

private:
    std::uint32_t source_ref_ = 0;
    std::vector<OffsetEntry> entries_;
};

/// raw_t + offset(raw_t). Throws Error("empty-table").
double correct_timestamp(double raw_t, const OffsetTable& table);

/// Sliding-window estimator owned by one producer session.
class SyncEstimator {
public:
    explicit SyncEstimator(std::size_t window = kSyncWindowSize) : capacity_(window) {}

    /// Adds a measurement and returns the entry to publish, or nullopt when
    /// it would not be strictly later than the previous entry.
    std::optional<OffsetEntry> add(const OffsetMeasurement& m);

    const std::deque<OffsetMeasurement>& window() const { return window_; }
    std::optional<OffsetMeasurement> last() const {
        return window_.empty() ? std::nullopt : std::optional(window_.back());
    }
    std::optional<double> last_selected() const { return last_selected_; }

private:
    std::size_t capacity_;
    std::deque<OffsetMeasurement> window_;
    std::optional<double> last_selected_;
    std::optional<double> last_published_at_;
};

} // namespace syncrec
