#include "syncrec/epocher.hpp"

#include "syncrec/error.hpp"

#include <algorithm>
#include <fnmatch.h>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

namespace syncrec {

CorrectedRecording correct_recording(const Recording& rec) {
    const auto tables = rec.offset_tables();
    auto table_for = [&](std::uint32_t source_ref, std::string_view what) -> const OffsetTable* {
        if (source_ref == kHubSourceRef) return nullptr;
        auto it = tables.find(source_ref);
        if (it == tables.end() || it->second.empty())
            throw Error("unsynchronized-source",
                        std::string(what) + " from source " + std::to_string(source_ref) + " has no offset entries");
        return &it->second;
    };

    CorrectedRecording out;
    for (const auto& decl : rec.declarations()) {
        if (decl.stream_id == kMarkerStreamId || decl.info.kind == StreamKind::Marker) continue;
        CorrectedStream stream{decl.stream_id, decl.source_ref, decl.info, {}, {}};
        const auto samples = rec.samples(decl.stream_id);
        const OffsetTable* table = samples.empty() ? nullptr : table_for(decl.source_ref, "stream '" + decl.info.name + "'");
        stream.times.reserve(samples.size());
        stream.values.reserve(samples.size());
        for (const auto& s : samples) {
            stream.times.push_back(table ? correct_timestamp(s.raw_timestamp, *table) : s.raw_timestamp);
            stream.values.push_back(s.values);
        }
        out.streams.push_back(std::move(stream));
    }
    for (const auto& m : rec.markers()) {
        const OffsetTable* table = table_for(m.source_ref, "marker '" + m.marker.label + "'");
        const double t = table ? correct_timestamp(m.marker.raw_timestamp, *table) : m.marker.raw_timestamp;
        out.markers.push_back({t, m.marker.label, m.marker.origin, m.source_ref});
    }
    std::stable_sort(out.markers.begin(), out.markers.end(),
                     [](const CorrectedMarker& a, const CorrectedMarker& b) { return a.time < b.time; });
    return out;
}

std::vector<Epoch> extract_epochs(const CorrectedRecording& rec, const LabelMatcher& matches, double pre, double post) {
    if (!(pre >= 0.0) || !(post >= 0.0)) throw Error("bad-window", "pre and post must be non-negative");

    std::map<std::string, int> name_uses;
    for (const auto& s : rec.streams) ++name_uses[s.info.name];
    auto slice_name = [&](const CorrectedStream& s) {
        return name_uses[s.info.name] > 1 ? s.info.source_id + "/" + s.info.name : s.info.name;
    };

    std::vector<Epoch> epochs;
    for (const auto& marker : rec.markers) {
        if (!matches(marker.label)) continue;
        Epoch epoch{marker.label, marker.time, pre, post, {}};
        for (const auto& stream : rec.streams) {
            StreamSlice slice{slice_name(stream), {}, {}};
            // Corrected times are non-decreasing per stream, so the window is contiguous.
            auto first = std::lower_bound(stream.times.begin(), stream.times.end(), marker.time - pre - 1e-6);
            for (auto it = first; it != stream.times.end(); ++it) {
                const double rel = *it - marker.time;
                if (rel > post) break;
                if (rel < -pre) continue;
                slice.relative_t.push_back(rel);
                slice.values.push_back(stream.values[static_cast<std::size_t>(it - stream.times.begin())]);
            }
            epoch.slices.push_back(std::move(slice));
        }
        epochs.push_back(std::move(epoch));
    }
    return epochs;
}

std::vector<Epoch> extract_epochs(const CorrectedRecording& rec, std::string_view label, double pre, double post) {
    if (label.empty()) throw Error("empty-label", "marker label is empty");
    return extract_epochs(rec, [label](std::string_view l) { return l == label; }, pre, post);
}

std::vector<Epoch> extract_epochs(const Recording& rec, std::string_view label, double pre, double post) {
    return extract_epochs(correct_recording(rec), label, pre, post);
}

std::string epoch_to_json_line(const Epoch& epoch) {
    nlohmann::json streams = nlohmann::json::object();
    for (const auto& slice : epoch.slices)
        streams[slice.name] = {{"relative_t", slice.relative_t}, {"values", slice.values}};
    const nlohmann::json line = {{"label", epoch.label}, {"marker_t", epoch.marker_t}, {"streams", streams}};
    return line.dump();
}

void export_epochs(std::span<const Epoch> epochs, std::ostream& out) {
    for (const auto& e : epochs) out << epoch_to_json_line(e) << '\n';
}

void export_epochs(std::span<const Epoch> epochs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot open " + path.string() + " for writing");
    export_epochs(epochs, out);
    out.flush();
    if (!out) throw Error("io", "write failed for " + path.string());
}

std::vector<Epoch> parse_epochs(std::istream& in) {
    std::vector<Epoch> epochs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto doc = nlohmann::json::parse(line);
            Epoch e;
            e.label = doc.at("label").get<std::string>();
            e.marker_t = doc.at("marker_t").get<double>();
            for (const auto& [name, body] : doc.at("streams").items()) {
                StreamSlice slice{name, body.at("relative_t").get<std::vector<double>>(),
                                  body.at("values").get<std::vector<std::vector<double>>>()};
                e.slices.push_back(std::move(slice));
            }
            epochs.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw Error("bad-export", ex.what());
        }
    }
    return epochs;
}

bool glob_match(std::string_view pattern, std::string_view text) {
    return ::fnmatch(std::string(pattern).c_str(), std::string(text).c_str(), 0) == 0;
}

} // namespace syncrec
