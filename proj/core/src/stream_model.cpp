#include "syncrec/stream_model.hpp"

#include "syncrec/error.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

namespace syncrec {

std::string_view to_string(StreamKind kind) {
    return kind == StreamKind::Marker ? "marker" : "numeric";
}

std::string_view to_string(MarkerOrigin origin) {
    switch (origin) {
    case MarkerOrigin::Auto: return "auto";
    case MarkerOrigin::Investigator: return "investigator";
    case MarkerOrigin::Subject: return "subject";
    }
    return "auto";
}

StreamKind stream_kind_from_string(std::string_view text) {
    if (text == "numeric") return StreamKind::Numeric;
    if (text == "marker") return StreamKind::Marker;
    throw Error("bad-decl", "unknown stream kind '" + std::string(text) + "'");
}

MarkerOrigin marker_origin_from_string(std::string_view text) {
    if (text == "auto") return MarkerOrigin::Auto;
    if (text == "investigator") return MarkerOrigin::Investigator;
    if (text == "subject") return MarkerOrigin::Subject;
    throw Error("bad-origin", "unknown marker origin '" + std::string(text) + "'");
}

std::vector<std::string> validate_stream_info(const StreamInfo& info) {
    std::vector<std::string> errors;
    if (info.name.empty()) errors.emplace_back("stream name is empty");
    if (info.source_id.empty()) errors.emplace_back("source id is empty");
    if (info.channel_count == 0) errors.emplace_back("channel count must be positive");
    if (info.channel_labels.size() != info.channel_count) errors.emplace_back("label count mismatch");
    if (!info.units.empty() && info.units.size() != info.channel_count) errors.emplace_back("unit count mismatch");
    if (!(info.nominal_rate_hz >= 0.0) || !std::isfinite(info.nominal_rate_hz))
        errors.emplace_back("nominal rate must be a non-negative number");
    if (info.kind == StreamKind::Marker) {
        if (info.channel_count != 1) errors.emplace_back("marker streams have one channel");
        if (info.nominal_rate_hz != 0.0) errors.emplace_back("marker streams are irregular (rate 0)");
    }
    return errors;
}

bool sample_fits(const StreamInfo& info, const Sample& sample) {
    return std::isfinite(sample.raw_timestamp) && sample.values.size() == info.channel_count;
}

namespace labels {
std::string task_init(int task) { return "Task " + std::to_string(task) + " init"; }
std::string task_start(int task) { return "Task " + std::to_string(task) + " start"; }
std::string task_end(int task) { return "Task " + std::to_string(task) + " end"; }
} // namespace labels

namespace {

std::vector<CatalogEntry> build_catalog() {
    std::vector<CatalogEntry> rows;
    rows.push_back({1, "Experiment start", "Experiment started"});
    for (int n = 1; n <= kCatalogTaskCount; ++n)
        rows.push_back({1, labels::task_init(n),
                        "Task " + std::to_string(n) + " initialized but subject has not complete loading yet"});
    for (int n = 1; n <= kCatalogTaskCount; ++n)
        rows.push_back({1, labels::task_start(n), "Task " + std::to_string(n) + " started robot unloading all the parts"});
    for (int n = 1; n <= kCatalogTaskCount; ++n)
        rows.push_back({1, labels::task_end(n), "Task " + std::to_string(n) + " unloading is done"});
    rows.push_back({1, "Robot approaching", "Each time robot comes toward human will generate a event"});
    rows.push_back({1, "Pick up successful", "Master pin is loaded"});
    rows.push_back({1, "Pick up failed", "Master pin is not loaded"});
    rows.push_back({1, "Experiment end", "Experiment is complete"});

    rows.push_back({2, "Experiment start", "Experiment"});
    rows.push_back({2, "Robot state change", "When robot change state between Normal, Reduced, and Stop"});
    rows.push_back({2, "Robot is stopping", "When robot going to complete stop"});
    rows.push_back({2, "Robot is speeding up", "When robot is going to normal speed"});
    rows.push_back({2, "Robot is slowing down", "When robot is slowing down."});
    rows.push_back({2, "Experiment end", "Experiment is complete"});
    return rows;
}

} // namespace

const std::vector<CatalogEntry>& marker_catalog() {
    static const std::vector<CatalogEntry> catalog = build_catalog();
    return catalog;
}

bool is_catalog_label(std::string_view label) {
    for (const auto& entry : marker_catalog())
        if (entry.label == label) return true;
    return false;
}

bool is_diagnostic_label(std::string_view label) {
    return label == labels::kRecorderOverflow ||
           (label.starts_with(labels::kSourceLostPrefix) && label.size() > labels::kSourceLostPrefix.size());
}

bool is_valid_marker(const MarkerSample& marker) {
    if (marker.label.empty()) return false;
    if (marker.origin != MarkerOrigin::Auto) return true;
    return is_catalog_label(marker.label) || is_diagnostic_label(marker.label);
}

std::string stream_info_to_json(const StreamInfo& info) {
    nlohmann::json doc = {
        {"name", info.name},
        {"source_id", info.source_id},
        {"kind", std::string(to_string(info.kind))},
        {"channel_count", info.channel_count},
        {"nominal_rate_hz", info.nominal_rate_hz},
        {"channel_labels", info.channel_labels},
        {"units", info.units},
    };
    return doc.dump();
}

StreamInfo stream_info_from_json(std::string_view text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        StreamInfo info;
        info.name = doc.at("name").get<std::string>();
        info.source_id = doc.at("source_id").get<std::string>();
        info.kind = stream_kind_from_string(doc.at("kind").get<std::string>());
        info.channel_count = doc.at("channel_count").get<std::uint32_t>();
        info.nominal_rate_hz = doc.at("nominal_rate_hz").get<double>();
        info.channel_labels = doc.value("channel_labels", std::vector<std::string>{});
        info.units = doc.value("units", std::vector<std::string>{});
        return info;
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad-decl", e.what());
    }
}

} // namespace syncrec
