#include "syncrec/clock_sync.hpp"

#include "syncrec/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace syncrec {

OffsetMeasurement measure_offset(double t0, double t1, double t2, double t3) {
    OffsetMeasurement m{t0, t1, t2, t3, 0.0, 0.0};
    m.rtt = (t3 - t0) - (t2 - t1);
    if (!(m.rtt >= 0.0) || t3 < t0 || t2 < t1) throw Error("non-causal", "exchange implies a negative round trip");
    m.offset = ((t1 - t0) + (t2 - t3)) / 2.0;
    return m;
}

const OffsetMeasurement& select_measurement(std::span<const OffsetMeasurement> window) {
    if (window.empty()) throw Error("empty-window", "no measurements to select from");
    const OffsetMeasurement* best = &window.front();
    for (const auto& m : window.subspan(1)) {
        if (m.rtt < best->rtt || (m.rtt == best->rtt && m.measured_at() >= best->measured_at())) best = &m;
    }
    return *best;
}

double select_offset(std::span<const OffsetMeasurement> window) { return select_measurement(window).offset; }

OffsetTable::OffsetTable(std::uint32_t source_ref, std::vector<OffsetEntry> entries) : source_ref_(source_ref) {
    entries_.reserve(entries.size());
    for (const auto& e : entries) append(e);
}

void OffsetTable::append(OffsetEntry entry) {
    if (!try_append(entry)) throw Error("non-monotonic", "offset entries must be strictly increasing in time");
}

bool OffsetTable::try_append(OffsetEntry entry) {
    if (!std::isfinite(entry.measured_at) || !std::isfinite(entry.offset)) return false;
    if (!entries_.empty() && !(entry.measured_at > entries_.back().measured_at)) return false;
    entries_.push_back(entry);
    return true;
}

double OffsetTable::offset_at(double raw_t) const {
    if (entries_.empty()) throw Error("empty-table", "no offset entries for source " + std::to_string(source_ref_));
    auto producer_time = [](const OffsetEntry& e) { return e.measured_at - e.offset; };
    if (raw_t <= producer_time(entries_.front())) return entries_.front().offset;
    if (raw_t >= producer_time(entries_.back())) return entries_.back().offset;
    auto hi = std::upper_bound(entries_.begin(), entries_.end(), raw_t,
                               [&](double t, const OffsetEntry& e) { return t < producer_time(e); });
    auto lo = std::prev(hi);
    const double p0 = producer_time(*lo);
    const double p1 = producer_time(*hi);
    if (!(p1 > p0)) return hi->offset;
    const double w = (raw_t - p0) / (p1 - p0);
    return lo->offset + w * (hi->offset - lo->offset);
}

double correct_timestamp(double raw_t, const OffsetTable& table) { return raw_t + table.offset_at(raw_t); }

std::optional<OffsetEntry> SyncEstimator::add(const OffsetMeasurement& m) {
    window_.push_back(m);
    while (window_.size() > capacity_) window_.pop_front();
    const std::vector<OffsetMeasurement> snapshot(window_.begin(), window_.end());
    last_selected_ = select_offset(snapshot);
    const OffsetEntry entry{m.measured_at(), *last_selected_};
    if (last_published_at_ && !(entry.measured_at > *last_published_at_)) return std::nullopt;
    last_published_at_ = entry.measured_at;
    return entry;
}

} // namespace syncrec
