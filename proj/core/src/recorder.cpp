#include "syncrec/recorder.hpp"

#include "byte_io.hpp"
#include "syncrec/error.hpp"
#include "syncrec/wire_protocol.hpp"

#include <array>
#include <chrono>
#include <cstring>
#include <ctime>
#include <nlohmann/json.hpp>

namespace syncrec {

using detail::ByteReader;
using detail::ByteWriter;

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'S', 'R', 'E', 'C'};
constexpr std::size_t kRecordHeaderSize = 5;

std::string decl_to_json(const StreamDecl& decl) {
    auto doc = nlohmann::json::parse(stream_info_to_json(decl.info));
    doc["stream_id"] = decl.stream_id;
    doc["source_ref"] = decl.source_ref;
    return doc.dump();
}

StreamDecl decl_from_json(std::string_view text) {
    StreamDecl decl;
    decl.info = stream_info_from_json(text);
    try {
        const auto doc = nlohmann::json::parse(text);
        decl.stream_id = doc.at("stream_id").get<StreamId>();
        decl.source_ref = doc.at("source_ref").get<std::uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("corrupt", std::string("declaration: ") + e.what());
    }
    return decl;
}

std::string footer_to_json(const Footer& footer) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [id, n] : footer.counts) counts[std::to_string(id)] = n;
    nlohmann::json metadata = nlohmann::json::object();
    for (const auto& [k, v] : footer.metadata) metadata[k] = v;
    return nlohmann::json{{"counts", counts}, {"metadata", metadata}}.dump();
}

Footer footer_from_json(std::string_view text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        Footer footer;
        for (const auto& [key, value] : doc.at("counts").items())
            footer.counts[static_cast<StreamId>(std::stoul(key))] = value.get<std::uint64_t>();
        if (doc.contains("metadata"))
            for (const auto& [key, value] : doc.at("metadata").items()) footer.metadata[key] = value.get<std::string>();
        return footer;
    } catch (const std::exception& e) {
        throw Error("corrupt", std::string("footer: ") + e.what());
    }
}

void count_event(std::map<StreamId, std::uint64_t>& counts, const RecordEvent& event) {
    if (const auto* chunk = std::get_if<NumericChunk>(&event)) counts[chunk->stream_id] += chunk->samples.size();
    else if (std::holds_alternative<MarkerRecord>(event)) counts[kMarkerStreamId] += 1;
    else if (const auto* decl = std::get_if<StreamDecl>(&event)) counts.try_emplace(decl->stream_id, 0);
}

} // namespace

// Recording ----------------------------------------------------------------------

Recording Recording::from_events(std::vector<RecordEvent> events, Metadata metadata) {
    Recording rec;
    rec.records = std::move(events);
    rec.footer.counts = rec.scanned_counts();
    rec.footer.metadata = std::move(metadata);
    return rec;
}

std::vector<StreamDecl> Recording::declarations() const {
    std::vector<StreamDecl> out;
    for (const auto& r : records)
        if (const auto* d = std::get_if<StreamDecl>(&r)) out.push_back(*d);
    return out;
}

std::optional<StreamDecl> Recording::declaration(StreamId id) const {
    for (const auto& r : records)
        if (const auto* d = std::get_if<StreamDecl>(&r); d && d->stream_id == id) return *d;
    return std::nullopt;
}

std::map<std::uint32_t, OffsetTable> Recording::offset_tables() const {
    std::map<std::uint32_t, OffsetTable> tables;
    for (const auto& r : records) {
        if (const auto* o = std::get_if<OffsetRecord>(&r)) {
            auto [it, _] = tables.try_emplace(o->source_ref, OffsetTable(o->source_ref));
            it->second.try_append(o->entry);
        }
    }
    return tables;
}

std::vector<MarkerRecord> Recording::markers() const {
    std::vector<MarkerRecord> out;
    for (const auto& r : records)
        if (const auto* m = std::get_if<MarkerRecord>(&r)) out.push_back(*m);
    return out;
}

std::vector<Sample> Recording::samples(StreamId id) const {
    std::vector<Sample> out;
    for (const auto& r : records)
        if (const auto* c = std::get_if<NumericChunk>(&r); c && c->stream_id == id)
            out.insert(out.end(), c->samples.begin(), c->samples.end());
    return out;
}

std::map<StreamId, std::uint64_t> Recording::scanned_counts() const {
    std::map<StreamId, std::uint64_t> counts;
    for (const auto& r : records) count_event(counts, r);
    return counts;
}

// RecordingWriter ----------------------------------------------------------------

RecordingWriter::RecordingWriter(const std::filesystem::path& path)
    : file_(std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc)) {
    if (!*file_) throw Error("io", "cannot open " + path.string() + " for writing");
    const std::array<std::uint8_t, kSrecPreambleSize> preamble{'S', 'R', 'E', 'C', kSrecVersion & 0xFF,
                                                               kSrecVersion >> 8, 0, 0};
    file_->write(reinterpret_cast<const char*>(preamble.data()), preamble.size());
    file_->flush();
    if (!*file_) throw Error("io", "write failed at offset 0");
    offset_ = preamble.size();
}

RecordingWriter::RecordingWriter() {
    memory_ = {'S', 'R', 'E', 'C', kSrecVersion & 0xFF, kSrecVersion >> 8, 0, 0};
    offset_ = memory_.size();
}

RecordingWriter::~RecordingWriter() = default;

void RecordingWriter::emit(RecordType type, std::span<const std::uint8_t> payload) {
    if (finished_) throw Error("finished", "recording already has a footer");
    std::vector<std::uint8_t> header;
    ByteWriter w(header);
    w.u8(static_cast<std::uint8_t>(type));
    w.u32(static_cast<std::uint32_t>(payload.size()));
    if (file_) {
        file_->write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
        file_->write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
        file_->flush();
        if (!*file_) throw Error("io", "write failed at offset " + std::to_string(offset_));
    } else {
        memory_.insert(memory_.end(), header.begin(), header.end());
        memory_.insert(memory_.end(), payload.begin(), payload.end());
    }
    offset_ += header.size() + payload.size();
}

void RecordingWriter::write(const RecordEvent& event) {
    std::vector<std::uint8_t> payload;
    ByteWriter w(payload);
    if (const auto* decl = std::get_if<StreamDecl>(&event)) {
        w.text(decl_to_json(*decl));
        emit(RecordType::Declaration, payload);
        channel_counts_[decl->stream_id] = decl->info.channel_count;
    } else if (const auto* chunk = std::get_if<NumericChunk>(&event)) {
        auto it = channel_counts_.find(chunk->stream_id);
        if (it == channel_counts_.end() || chunk->stream_id == kMarkerStreamId)
            throw Error("undeclared-stream", "chunk for stream " + std::to_string(chunk->stream_id) +
                                                 " precedes its declaration");
        wire::append_sample_chunk(payload, chunk->stream_id, chunk->samples, it->second);
        emit(RecordType::NumericChunk, payload);
    } else if (const auto* marker = std::get_if<MarkerRecord>(&event)) {
        const auto& m = marker->marker;
        if (m.label.size() > 0xFFFF) throw Error("oversize", "marker label longer than 65535 bytes");
        w.f64(m.raw_timestamp);
        w.u8(static_cast<std::uint8_t>(m.origin));
        w.u16(static_cast<std::uint16_t>(m.label.size()));
        w.text(m.label);
        w.u32(marker->source_ref);
        emit(RecordType::Marker, payload);
    } else if (const auto* offset = std::get_if<OffsetRecord>(&event)) {
        w.u32(offset->source_ref);
        w.f64(offset->entry.measured_at);
        w.f64(offset->entry.offset);
        emit(RecordType::OffsetEntry, payload);
    }
    count_event(counts_, event);
}

void RecordingWriter::finish(const Metadata& metadata) {
    const auto text = footer_to_json(Footer{counts_, metadata});
    emit(RecordType::Footer, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    finished_ = true;
    if (file_) file_->close();
}

std::vector<std::uint8_t> write_recording(std::span<const RecordEvent> events, const Metadata& metadata) {
    RecordingWriter writer;
    for (const auto& e : events) writer.write(e);
    writer.finish(metadata);
    return writer.bytes();
}

void write_recording(std::span<const RecordEvent> events, const std::filesystem::path& path, const Metadata& metadata) {
    RecordingWriter writer(path);
    for (const auto& e : events) writer.write(e);
    writer.finish(metadata);
}

// Reader --------------------------------------------------------------------------

Recording read_recording(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
        throw Error("not-srec", "missing SREC magic");
    Recording rec;
    if (bytes.size() < kSrecPreambleSize) {
        rec.truncated = true;
        return rec;
    }
    ByteReader preamble(bytes.subspan(4, 4));
    const auto version = preamble.u16();
    if (version > kSrecVersion) throw Error("unsupported-version", "version " + std::to_string(version));

    std::map<StreamId, std::uint32_t> channels;
    std::size_t pos = kSrecPreambleSize;
    bool have_footer = false;
    while (pos < bytes.size() && !have_footer) {
        if (bytes.size() - pos < kRecordHeaderSize) break;
        ByteReader header(bytes.subspan(pos, kRecordHeaderSize));
        const auto type = header.u8();
        const auto length = header.u32();
        if (bytes.size() - pos - kRecordHeaderSize < length) break;
        const auto payload = bytes.subspan(pos + kRecordHeaderSize, length);
        const std::string_view text(reinterpret_cast<const char*>(payload.data()), payload.size());
        try {
            switch (static_cast<RecordType>(type)) {
            case RecordType::Declaration: {
                auto decl = decl_from_json(text);
                channels[decl.stream_id] = decl.info.channel_count;
                rec.records.emplace_back(std::move(decl));
                break;
            }
            case RecordType::NumericChunk: {
                const auto id = wire::peek_stream_id(payload);
                auto it = channels.find(id);
                if (it == channels.end()) throw Error("corrupt", "chunk for undeclared stream " + std::to_string(id));
                auto chunk = wire::decode_sample_chunk(payload, it->second);
                rec.records.emplace_back(NumericChunk{chunk.stream_id, std::move(chunk.samples)});
                break;
            }
            case RecordType::Marker: {
                ByteReader r(payload);
                MarkerRecord m;
                m.marker.raw_timestamp = r.f64();
                const auto origin = r.u8();
                if (origin > 2) throw Error("corrupt", "bad marker origin");
                m.marker.origin = static_cast<MarkerOrigin>(origin);
                m.marker.label = r.text(r.u16());
                m.source_ref = r.u32();
                rec.records.emplace_back(std::move(m));
                break;
            }
            case RecordType::OffsetEntry: {
                ByteReader r(payload);
                OffsetRecord o;
                o.source_ref = r.u32();
                o.entry.measured_at = r.f64();
                o.entry.offset = r.f64();
                rec.records.emplace_back(o);
                break;
            }
            case RecordType::Footer:
                rec.footer = footer_from_json(text);
                have_footer = true;
                break;
            default:
                throw Error("corrupt", "unknown record type " + std::to_string(type) + " at offset " +
                                           std::to_string(pos));
            }
        } catch (const Error& e) {
            if (e.code() == "corrupt") throw;
            throw Error("corrupt", std::string(e.what()) + " at offset " + std::to_string(pos));
        }
        pos += kRecordHeaderSize + length;
    }
    if (!have_footer) {
        rec.truncated = true;
        rec.footer.counts = rec.scanned_counts();
    }
    return rec;
}

Recording read_recording(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return read_recording(bytes);
}

std::string recording_file_name(std::string_view experiment, std::string_view subject) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &utc);
    return std::string(experiment) + "_" + std::string(subject) + "_" + stamp + ".srec";
}

RecordEvent to_record_event(const HubEvent& event) {
    return std::visit(
        [](const auto& e) -> RecordEvent {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, DeclEvent>) return StreamDecl{e.stream_id, e.source_ref, e.info};
            else if constexpr (std::is_same_v<T, ChunkEvent>) return NumericChunk{e.stream_id, e.samples};
            else if constexpr (std::is_same_v<T, MarkerEvent>) return MarkerRecord{e.marker, e.source_ref};
            else return OffsetRecord{e.source_ref, e.entry};
        },
        event);
}

// Recorder ------------------------------------------------------------------------

Recorder::Recorder(Hub& hub, const std::filesystem::path& path, std::optional<std::size_t> queue_capacity)
    : hub_(hub), writer_(path) {
    subscription_ = hub_.subscribe(wire::SubscribeFilter::All, queue_capacity);
    thread_ = std::thread([this] { run(); });
}

Recorder::~Recorder() {
    try {
        stop();
    } catch (...) {
    }
}

void Recorder::run() {
    while (true) {
        auto event = subscription_->pop(std::chrono::milliseconds(200));
        if (!event) {
            if (subscription_->closed()) break;
            continue;
        }
        try {
            std::lock_guard lock(mutex_);
            if (!error_) writer_.write(to_record_event(*event));
        } catch (const Error& e) {
            std::lock_guard lock(mutex_);
            error_ = e.what();
        }
    }
}

void Recorder::set_metadata(std::string key, std::string value) {
    std::lock_guard lock(mutex_);
    metadata_[std::move(key)] = std::move(value);
}

void Recorder::stop() {
    if (stopped_) return;
    stopped_ = true;
    hub_.unsubscribe(subscription_);
    if (thread_.joinable()) thread_.join();
    std::lock_guard lock(mutex_);
    if (subscription_->overflowed()) metadata_["recorder_overflow"] = "true";
    writer_.finish(metadata_);
}

bool Recorder::overflowed() const { return subscription_->overflowed(); }

std::map<StreamId, std::uint64_t> Recorder::counts() const {
    std::lock_guard lock(mutex_);
    return writer_.counts();
}

std::optional<std::string> Recorder::error() const {
    std::lock_guard lock(mutex_);
    return error_;
}

} // namespace syncrec
