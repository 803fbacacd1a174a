#include "cli.hpp"

#include "syncrec/epocher.hpp"
#include "syncrec/error.hpp"
#include "syncrec/hub_server.hpp"
#include "syncrec/orchestrator.hpp"
#include "syncrec/recorder.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace syncrec::cli {

std::atomic<bool>& stop_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

namespace {

extern "C" void on_signal(int) { stop_flag().store(true); }

std::string default_hub() {
    const char* env = std::getenv("SYNCREC_HUB");
    return env && *env ? env : "127.0.0.1:" + std::to_string(wire::kDefaultHubPort);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot read " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

std::string fixed(double v, int digits = 6) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.*f", digits, v);
    return buffer;
}

/// Sleeps in short steps until the stop flag is raised or `seconds` pass (<= 0: forever).
void wait_for_stop(double seconds) {
    const double until = steady_seconds() + seconds;
    while (!stop_flag().load()) {
        if (seconds > 0 && steady_seconds() >= until) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

struct HubServeOptions {
    std::uint16_t port = wire::kDefaultHubPort;
    std::string record;
    double duration = 0;
};

int hub_serve(const HubServeOptions& o, std::ostream& out) {
    Hub hub;
    HubServer server(hub, o.port);
    std::optional<Recorder> recorder;
    if (!o.record.empty()) recorder.emplace(hub, o.record);
    server.start();
    out << "listening on port " << server.port() << std::endl;
    wait_for_stop(o.duration);
    server.stop();
    if (recorder) {
        recorder->set_metadata("experiment", "hub");
        recorder->stop();
        if (auto e = recorder->error()) throw Error("io", *e);
        out << "recording written to " << o.record << (recorder->overflowed() ? " (subscriber overflowed)" : "")
            << std::endl;
    }
    return kExitOk;
}

struct SimOptions {
    std::string device;
    std::string hub = default_hub();
    std::uint64_t seed = 1;
    double rate = 0;
    double duration = 0;
};

int sim(const SimOptions& o, std::ostream& out) {
    NetworkBackend backend(net::parse_endpoint(o.hub, wire::kDefaultHubPort), "sim-" + o.device);
    out << "streaming " << o.device << " to " << o.hub << std::endl;
    run_device(device_kind_from_string(o.device), backend, o.rate, o.seed, o.duration,
               [] { return stop_flag().load(); });
    return kExitOk;
}

struct ExperimentOptions {
    int task = 0;
    std::optional<std::string> subject;
    std::string config;
    std::string out;
    std::string hub;
    std::optional<std::uint64_t> seed;
};

template <typename Config>
void apply_common(Config& cfg, const ExperimentOptions& o) {
    if (o.subject) cfg.subject_id = *o.subject;
    if (o.seed) cfg.devices.seed = *o.seed;
}

template <typename Run>
int run_experiment(const ExperimentOptions& o, const std::string& experiment, const std::string& subject,
                   std::ostream& out, Run&& run) {
    if (!o.hub.empty()) {
        NetworkBackend backend(net::parse_endpoint(o.hub, wire::kDefaultHubPort));
        const auto markers = run(backend);
        out << "markers: " << markers << "\n";
        return kExitOk;
    }
    const std::filesystem::path path = o.out.empty() ? recording_file_name(experiment, subject) : o.out;
    InProcessBackend backend(path);
    const auto markers = run(backend);
    out << "recording: " << path.string() << "\n" << "markers: " << markers << "\n";
    return kExitOk;
}

int experiment_case1(const ExperimentOptions& o, std::ostream& out) {
    CaseOneConfig cfg = o.config.empty() ? CaseOneConfig::defaults(o.task) : parse_case1_config(read_file(o.config), o.task);
    apply_common(cfg, o);
    return run_experiment(o, "case1-task" + std::to_string(o.task), cfg.subject_id, out, [&](ExperimentBackend& backend) {
        const auto result = run_case1(cfg, backend);
        out << "task " << o.task << ": acceleration " << to_string(result.acceleration) << ", trajectory "
            << to_string(result.trajectory) << "\n"
            << "duration_s: " << fixed(result.duration, 3) << "\n";
        return result.markers.size();
    });
}

int experiment_case2(const ExperimentOptions& o, std::ostream& out) {
    CaseTwoConfig cfg = o.config.empty() ? CaseTwoConfig::defaults() : parse_case2_config(read_file(o.config));
    apply_common(cfg, o);
    return run_experiment(o, "case2", cfg.subject_id, out, [&](ExperimentBackend& backend) {
        const auto result = run_case2(cfg, backend);
        out << "place events: " << result.place_times.size() << "\n"
            << "duration_s: " << fixed(result.duration, 3) << "\n";
        return result.markers.size();
    });
}

struct EpochOptions {
    std::string in;
    std::string marker;
    double pre = 0;
    double post = 0;
    std::string out;
    bool glob = false;
};

int epoch(const EpochOptions& o, std::ostream& out) {
    const auto corrected = correct_recording(read_recording(std::filesystem::path(o.in)));
    std::vector<Epoch> epochs;
    if (o.glob) {
        const std::string pattern = o.marker;
        epochs = extract_epochs(corrected, [&](std::string_view label) { return glob_match(pattern, label); }, o.pre,
                                o.post);
    } else {
        epochs = extract_epochs(corrected, o.marker, o.pre, o.post);
    }
    export_epochs(epochs, std::filesystem::path(o.out));
    out << epochs.size() << " epochs written to " << o.out << "\n";
    return kExitOk;
}

int marker_inject(const std::string& hub, const std::string& label, std::ostream& out) {
    ProducerClient client(net::parse_endpoint(hub, wire::kDefaultHubPort), "investigator");
    client.sync(kInitialProbeCount);
    client.marker(label, MarkerOrigin::Investigator, client.local_now());
    client.bye();
    for (const auto& code : client.take_errors()) throw Error(code, "hub rejected the marker");
    out << "marker injected: " << label << "\n";
    return kExitOk;
}

CLI::Validator task_range() {
    return CLI::Validator(
        [](std::string& value) -> std::string {
            try {
                const int task = std::stoi(value);
                if (task >= 1 && task <= 4 && std::to_string(task) == value) return {};
            } catch (const std::exception&) {
            }
            return "task must be 1..4";
        },
        "1..4");
}

} // namespace

void install_signal_handlers() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

std::string inspect_report(const std::string& path) {
    const auto rec = read_recording(std::filesystem::path(path));
    std::ostringstream out;
    out << "file: " << path << (rec.truncated ? " (truncated)" : "") << "\n";

    const auto counts = rec.truncated ? rec.scanned_counts() : rec.footer.counts;
    auto count_of = [&](StreamId id) {
        auto it = counts.find(id);
        return it == counts.end() ? std::uint64_t{0} : it->second;
    };
    out << "streams:\n";
    char line[256];
    std::snprintf(line, sizeof line, "  %-4s %-12s %-14s %-8s %4s %9s %10s\n", "id", "name", "source", "kind", "ch",
                  "rate_hz", "samples");
    out << line;
    for (const auto& d : rec.declarations()) {
        std::snprintf(line, sizeof line, "  %-4u %-12s %-14s %-8s %4u %9.3f %10llu\n", d.stream_id, d.info.name.c_str(),
                      d.info.source_id.c_str(), std::string(to_string(d.info.kind)).c_str(), d.info.channel_count,
                      d.info.nominal_rate_hz, static_cast<unsigned long long>(count_of(d.stream_id)));
        out << line;
    }
    out << "  markers: " << count_of(kMarkerStreamId) << "\n";

    if (!rec.footer.metadata.empty()) {
        out << "metadata:\n";
        for (const auto& [k, v] : rec.footer.metadata) out << "  " << k << " = " << v << "\n";
    }

    const auto tables = rec.offset_tables();
    if (!tables.empty()) {
        out << "offsets:\n";
        for (const auto& [source, table] : tables) {
            out << "  source " << source << ": " << table.size() << " entries, last offset "
                << fixed(table.entries().back().offset) << " s\n";
        }
    }

    out << "markers:\n";
    std::vector<std::pair<double, MarkerRecord>> timeline;
    bool corrected = true;
    try {
        const auto c = correct_recording(rec);
        for (const auto& m : c.markers) timeline.push_back({m.time, {{m.time, m.label, m.origin}, m.source_ref}});
    } catch (const Error&) {
        corrected = false;
        for (const auto& m : rec.markers()) timeline.push_back({m.marker.raw_timestamp, m});
    }
    if (!corrected) out << "  (raw timestamps: some sources have no offset entries)\n";
    for (const auto& [t, m] : timeline) {
        std::snprintf(line, sizeof line, "  %14.6f  %-12s  ", t, std::string(to_string(m.marker.origin)).c_str());
        out << line << m.marker.label << "\n";
    }
    return out.str();
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app("Synchronized multi-stream acquisition for human-robot collaboration experiments.", "syncrec");
    app.require_subcommand(1);
    app.set_version_flag("--version", "syncrec 0.1.0");

    // hub serve
    HubServeOptions hub_opts;
    auto* hub_cmd = app.add_subcommand("hub", "Run the acquisition hub.");
    hub_cmd->require_subcommand(1);
    auto* serve_cmd = hub_cmd->add_subcommand("serve", "Accept producers and subscribers over TCP.");
    serve_cmd->add_option("--port", hub_opts.port, "TCP port (0 picks a free one)")->capture_default_str();
    serve_cmd->add_option("--record", hub_opts.record, "Record every stream to this .srec file");
    serve_cmd->add_option("--duration", hub_opts.duration, "Stop after this many seconds (default: until SIGINT)");

    // sim
    SimOptions sim_opts;
    auto* sim_cmd = app.add_subcommand("sim", "Stream one simulated device to a hub.");
    sim_cmd->add_option("device", sim_opts.device, "Device kind")
        ->required()
        ->check(CLI::IsMember({"gsr", "ppg", "ecg", "mocap", "robot"}));
    sim_cmd->add_option("--hub", sim_opts.hub, "Hub address HOST:PORT (default: $SYNCREC_HUB)");
    sim_cmd->add_option("--seed", sim_opts.seed, "Random seed")->capture_default_str();
    sim_cmd->add_option("--rate", sim_opts.rate, "Sampling rate in Hz (default: device default)");
    sim_cmd->add_option("--duration", sim_opts.duration, "Stop after this many seconds (default: until SIGINT)");

    // experiment
    ExperimentOptions c1, c2;
    auto* exp_cmd = app.add_subcommand("experiment", "Run a scripted case study.");
    exp_cmd->require_subcommand(1);
    auto* c1_cmd = exp_cmd->add_subcommand("case1", "Insert unloading with the acceleration/trajectory task matrix.");
    c1_cmd->add_option("--task", c1.task, "Task 1..4")->required()->check(task_range());
    auto* c2_cmd = exp_cmd->add_subcommand("case2", "Pick-and-place with speed and separation monitoring.");
    for (auto [cmd, o] : {std::pair{c1_cmd, &c1}, std::pair{c2_cmd, &c2}}) {
        cmd->add_option("--subject", o->subject, "Subject id (default: from --config, else S00)");
        cmd->add_option("--config", o->config, "Scenario JSON file")->check(CLI::ExistingFile);
        cmd->add_option("--out", o->out, "Recording path (default: <experiment>_<subject>_<UTC time>.srec)");
        cmd->add_option("--hub", o->hub, "Run against a live hub HOST:PORT in real time instead of in-process");
        cmd->add_option("--seed", o->seed, "Override the scenario seed");
    }

    // epoch
    EpochOptions ep;
    auto* epoch_cmd = app.add_subcommand("epoch", "Cut marker-aligned windows out of a recording.");
    epoch_cmd->add_option("--in", ep.in, "Input .srec file")->required()->check(CLI::ExistingFile);
    epoch_cmd->add_option("--marker", ep.marker, "Marker label (a wildcard pattern with --glob)")->required();
    epoch_cmd->add_option("--pre", ep.pre, "Seconds before the marker")->required();
    epoch_cmd->add_option("--post", ep.post, "Seconds after the marker")->required();
    epoch_cmd->add_option("--out", ep.out, "Output JSON-lines file")->required();
    epoch_cmd->add_flag("--glob", ep.glob, "Match --marker as a shell wildcard");

    // inspect
    std::string inspect_in;
    auto* inspect_cmd = app.add_subcommand("inspect", "Print streams, counts and the marker timeline of a recording.");
    inspect_cmd->add_option("--in", inspect_in, "Input .srec file")->required()->check(CLI::ExistingFile);

    // marker inject
    std::string marker_hub = default_hub();
    std::string marker_label;
    auto* marker_cmd = app.add_subcommand("marker", "Investigator markers.");
    marker_cmd->require_subcommand(1);
    auto* inject_cmd = marker_cmd->add_subcommand("inject", "Send one Investigator marker to a live hub.");
    inject_cmd->add_option("--hub", marker_hub, "Hub address HOST:PORT (default: $SYNCREC_HUB)");
    inject_cmd->add_option("--label", marker_label, "Marker text")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        const CLI::App* deepest = &app;
        while (!deepest->get_subcommands().empty()) deepest = deepest->get_subcommands().front();
        err << "error: " << e.what() << "\n\n" << deepest->help();
        return kExitUsage;
    }

    try {
        if (serve_cmd->parsed()) return hub_serve(hub_opts, out);
        if (sim_cmd->parsed()) return sim(sim_opts, out);
        if (c1_cmd->parsed()) return experiment_case1(c1, out);
        if (c2_cmd->parsed()) return experiment_case2(c2, out);
        if (epoch_cmd->parsed()) return epoch(ep, out);
        if (inspect_cmd->parsed()) {
            out << inspect_report(inspect_in);
            return kExitOk;
        }
        if (inject_cmd->parsed()) return marker_inject(marker_hub, marker_label, out);
    } catch (const Error& e) {
        err << "error [" << e.code() << "]: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    err << app.help();
    return kExitUsage;
}

} // namespace syncrec::cli
