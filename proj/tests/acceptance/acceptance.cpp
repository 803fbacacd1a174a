// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.
#include "support/oracles.hpp"

#include "syncrec/epocher.hpp"
#include "syncrec/hub_server.hpp"
#include "syncrec/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

using namespace syncrec;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (ok) return;
        if (pass) detail.clear();
        pass = false;
        if (!detail.empty()) detail += "; ";
        detail += what;
    }
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double wall_seconds() { return steady_seconds(); }

// Offset 50 ms, one-way delays U(0, 5 ms), a sync round every 5 s for 60 s.
Verdict clock_sync_recovery() {
    Verdict v;
    const double start = wall_seconds();
    const double truth_offset = 0.050;
    double worst = 0, worst_bound_excess = -1;
    std::size_t samples = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SimClock clock;
        Hub hub(clock.hub_clock());
        auto sub = hub.subscribe();
        const ClockModel model{-truth_offset, 0.0};
        SimulatedProducer producer(hub, clock, "sensor", model, {0.0, 0.005}, seed);
        const auto id = producer.declare(gsr_stream_info("sensor", 100));
        std::vector<double> truth;
        for (int round = 0; round < 12; ++round) {
            clock.set(round * 5.0);
            const auto m = producer.sync(round == 0 ? kInitialProbeCount : kProbesPerRound);
            worst_bound_excess = std::max(worst_bound_excess, std::abs(m.offset - truth_offset) - m.rtt / 2);
            std::vector<Sample> chunk;
            for (int k = 0; k < 500; ++k) {
                const double t = round * 5.0 + 0.1 + k * 0.01;
                truth.push_back(t);
                chunk.push_back({producer.local_time(t), {0.0}});
            }
            clock.set(round * 5.0 + 0.1);
            producer.push(id, chunk);
        }
        clock.set(60.0);
        producer.sync(kProbesPerRound);
        const auto table = hub.offset_table(producer.session());
        std::size_t i = 0;
        for (auto& e : sub->drain())
            if (auto* c = std::get_if<ChunkEvent>(&e))
                for (const auto& s : c->samples)
                    worst = std::max(worst, std::abs(correct_timestamp(s.raw_timestamp, table) - truth[i++]));
        v.require(i == truth.size(), "missing samples for seed " + std::to_string(seed));
        samples += i;
    }
    const double runtime = wall_seconds() - start;
    v.require(worst <= 0.001, "max error " + fmt("%.3f", worst * 1e3) + " ms > 1 ms");
    v.require(worst_bound_excess <= 1e-12, "selected offset outside rtt/2 bound");
    v.require(runtime < 5.0, "runtime " + fmt("%.2f", runtime) + " s");
    if (v.pass)
        v.detail = "50 seeds, " + std::to_string(samples) + " samples, max error " + fmt("%.3f", worst * 1e3) +
                   " ms, runtime " + fmt("%.2f", runtime) + " s";
    return v;
}

// Four devices over TCP loopback into a Recorder, 60 s of data each.
Verdict lossless_pipeline() {
    Verdict v;
    const auto path = std::filesystem::temp_directory_path() / "syncrec_acceptance_lossless.srec";
    Hub hub;
    HubServer server(hub, 0);
    server.start();
    const net::Endpoint endpoint{"127.0.0.1", server.port()};
    auto recorder = std::make_unique<Recorder>(hub, path);

    struct Device {
        StreamInfo info;
        std::function<std::vector<double>(double)> gen;
        std::vector<Sample> pushed;
        StreamId id = 0;
        std::vector<std::string> errors;
    };
    const MocapScript walk = CaseTwoConfig::crossing_human();
    const std::vector<StimulusEvent> scr = {{10, 0.5}, {30, 0.8}};
    std::vector<Device> devices(4);
    devices[0].info = gsr_stream_info("gsr-sensor", 32);
    devices[0].gen = [&](double t) { return std::vector{gen_gsr(t, 2.0, scr)}; };
    devices[1].info = ppg_stream_info("ppg-sensor", 64);
    devices[1].gen = [](double t) { return std::vector{gen_ppg(t, 72)}; };
    devices[2].info = ecg_stream_info("ecg-sensor", 256);
    devices[2].gen = [](double t) { return std::vector{gen_ecg(t, 72)}; };
    devices[3].info = mocap_stream_info("mocap", 100);
    devices[3].gen = [&](double t) {
        std::vector<double> out;
        for (const auto& p : gen_mocap(t, walk))
            for (int a = 0; a < 3; ++a) out.push_back(p.position[a]);
        return out;
    };

    std::vector<std::thread> threads;
    for (auto& d : devices) {
        threads.emplace_back([&d, &endpoint] {
            try {
                ProducerClient client(endpoint, d.info.source_id);
                d.id = client.declare(d.info);
                client.sync(kInitialProbeCount);
                const int n = static_cast<int>(std::lround(60 * d.info.nominal_rate_hz));
                const int per_chunk = static_cast<int>(d.info.nominal_rate_hz / 4);
                std::vector<Sample> chunk;
                for (int k = 0; k < n; ++k) {
                    const double t = k / d.info.nominal_rate_hz;
                    chunk.push_back({t, d.gen(t)});
                    if (static_cast<int>(chunk.size()) == per_chunk || k == n - 1) {
                        client.push(d.id, chunk);
                        d.pushed.insert(d.pushed.end(), chunk.begin(), chunk.end());
                        chunk.clear();
                    }
                }
                client.bye();
                d.errors = client.take_errors();
            } catch (const std::exception& e) {
                d.errors.push_back(e.what());
            }
        });
    }
    for (auto& t : threads) t.join();
    recorder->set_metadata("experiment", "acceptance");
    recorder->stop();
    v.require(!recorder->overflowed(), "recorder overflowed");
    recorder.reset();
    server.stop();

    const auto rec = read_recording(path);
    v.require(!rec.truncated, "recording truncated");
    std::uint64_t total = 0;
    const auto hub_counts = hub.pushed_counts();
    const auto scanned = rec.scanned_counts();
    for (const auto& d : devices) {
        for (const auto& e : d.errors) v.require(false, d.info.source_id + ": " + e);
        const std::uint64_t pushed = d.pushed.size();
        total += pushed;
        const auto expected = static_cast<std::uint64_t>(std::lround(60 * d.info.nominal_rate_hz));
        v.require(pushed == expected, d.info.name + " pushed " + std::to_string(pushed));
        v.require(rec.footer.counts.count(d.id) && rec.footer.counts.at(d.id) == pushed,
                  d.info.name + " footer count differs");
        v.require(scanned.count(d.id) && scanned.at(d.id) == pushed, d.info.name + " scanned count differs");
        v.require(hub_counts.count(d.id) && hub_counts.at(d.id) == pushed, d.info.name + " hub count differs");
        const auto got = rec.samples(d.id);
        bool same = got.size() == d.pushed.size();
        for (std::size_t i = 0; same && i < got.size(); ++i) {
            same = got[i].raw_timestamp == d.pushed[i].raw_timestamp && got[i].values.size() == d.pushed[i].values.size();
            for (std::size_t c = 0; same && c < got[i].values.size(); ++c)
                same = got[i].values[c] == static_cast<double>(static_cast<float>(d.pushed[i].values[c]));
        }
        v.require(same, d.info.name + " content differs");
        const auto decl = rec.declaration(d.id);
        v.require(decl && decl->info == d.info, d.info.name + " declaration differs");
    }

    // Roundtrip: re-serialising what was read gives the same bytes back.
    std::ifstream in(path, std::ios::binary);
    const std::vector<std::uint8_t> file_bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto rewritten = write_recording(rec.records, rec.footer.metadata);
    v.require(rewritten == file_bytes, "re-serialised bytes differ from the file");
    v.require(read_recording(rewritten) == rec, "roundtrip read differs");
    std::filesystem::remove(path);
    if (v.pass)
        v.detail = std::to_string(total) + " samples from 4 devices, counts exact, " + std::to_string(file_bytes.size()) +
                   " bytes roundtrip identical";
    return v;
}

// Regular 32 Hz stream; windows [-1, +2] around on-grid and off-grid markers.
Verdict epoching_bound() {
    Verdict v;
    const double rate = 32.0;
    std::vector<RecordEvent> events;
    StreamInfo info = gsr_stream_info("hub", rate);
    events.push_back(StreamDecl{1, kHubSourceRef, info});
    std::vector<Sample> samples;
    for (int k = 0; k < 32 * 120; ++k) samples.push_back({k / rate, {static_cast<double>(k)}});
    events.push_back(NumericChunk{1, samples});
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> at(5.0, 110.0);
    std::vector<double> marker_times;
    for (int i = 0; i < 300; ++i) marker_times.push_back(i % 3 == 0 ? std::round(at(rng) * rate) / rate : at(rng));
    std::sort(marker_times.begin(), marker_times.end());
    for (double t : marker_times) events.push_back(MarkerRecord{{t, "stim", MarkerOrigin::Auto}, kHubSourceRef});
    const auto rec = Recording::from_events(events);

    const auto epochs = extract_epochs(rec, "stim", 1.0, 2.0);
    v.require(epochs.size() == marker_times.size(), "epoch count " + std::to_string(epochs.size()));
    std::map<std::size_t, std::size_t> lengths;
    for (std::size_t e = 0; e < epochs.size() && e < marker_times.size(); ++e) {
        const auto& ep = epochs[e];
        v.require(ep.marker_t == marker_times[e], "marker time moved");
        v.require(ep.slices.size() == 1, "expected one slice");
        if (ep.slices.empty()) continue;
        const auto& slice = ep.slices[0];
        const std::size_t n = slice.relative_t.size();
        ++lengths[n];
        v.require(n >= 96 && n <= 98, "slice length " + std::to_string(n));
        // Brute-force containment: exactly the samples with t - marker in [-pre, +post].
        std::size_t inside = 0;
        for (const auto& s : samples) {
            const double rel = s.raw_timestamp - ep.marker_t;
            inside += rel >= -1.0 && rel <= 2.0;
        }
        v.require(inside == n, "window holds " + std::to_string(n) + " samples, brute force " + std::to_string(inside));
        for (double rel : slice.relative_t) v.require(rel >= -1.0 && rel <= 2.0, "sample outside window");
    }
    if (v.pass) {
        v.detail = std::to_string(epochs.size()) + " epochs, lengths";
        for (const auto& [n, count] : lengths) v.detail += " " + std::to_string(n) + "x" + std::to_string(count);
        v.detail += ", containment exact";
    }
    return v;
}

double point_segment_distance(const Segment& s, const Eigen::Vector3d& p) {
    return (closest_point_on_segment(s, p) - p).norm();
}

Verdict min_distance_oracle() {
    Verdict v;
    const auto robot = CaseTwoConfig::defaults().robot;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI), coord(-1.5, 1.5), height(0.0, 1.8);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> q(robot.joints.size());
        for (auto& x : q) x = angle(rng);
        std::vector<Eigen::Vector3d> human;
        for (int p = 0; p < 4; ++p) human.emplace_back(coord(rng), coord(rng), height(rng));
        const auto segments = robot_segments(robot, q);
        std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> pairs;
        for (const auto& s : segments) pairs.emplace_back(s.a, s.b);
        const double dense = oracle::dense_min_distance(pairs, human);
        const double exact = min_distance(segments, human).min_distance;
        worst = std::max(worst, std::abs(dense - exact));
    }
    v.require(worst <= 1e-4, "random configurations disagree by " + fmt("%.2e", worst) + " m");

    // Closed forms: interior foot, both clamped ends, degenerate segment.
    const Segment unit{{0, 0, 0}, {1, 0, 0}};
    const std::pair<Eigen::Vector3d, double> closed[] = {
        {{0.5, 3, 4}, 5.0}, {{-3, 4, 0}, 5.0}, {{4, 0, 4}, std::sqrt(25.0)}, {{0.25, 0, 0}, 0.0}, {{1, 1, 1}, std::sqrt(2.0)}};
    double closed_worst = 0;
    for (const auto& [p, d] : closed) {
        closed_worst = std::max(closed_worst, std::abs(point_segment_distance(unit, p) - d));
        const std::vector<Segment> one{unit};
        const std::vector<Eigen::Vector3d> pts{p};
        closed_worst = std::max(closed_worst, std::abs(min_distance(one, pts).min_distance - d));
    }
    const Segment dot{{1, 2, 3}, {1, 2, 3}};
    closed_worst = std::max(closed_worst, std::abs(point_segment_distance(dot, {1, 2, 5}) - 2.0));
    const Segment slanted{{0, 0, 0}, {3, 4, 0}};
    closed_worst = std::max(closed_worst, std::abs(point_segment_distance(slanted, {-4, 3, 0}) - 5.0));
    closed_worst = std::max(closed_worst, std::abs(point_segment_distance(slanted, {3 - 4, 4 + 3, 12}) - 13.0));
    v.require(closed_worst <= 1e-9, "closed-form error " + fmt("%.2e", closed_worst));
    if (v.pass)
        v.detail = "100 configurations within " + fmt("%.2e", worst) + " m of dense sampling, closed forms within " +
                   fmt("%.1e", closed_worst);
    return v;
}

// A human point walking straight at the arm and back out, 2.0 -> 0.1 -> 2.0 m.
Verdict ssm_markers() {
    Verdict v;
    const auto robot = CaseTwoConfig::defaults().robot;
    const SsmConfig cfg;
    const std::vector<double> q(robot.joints.size(), 0.3);
    const auto segments = robot_segments(robot, q);
    // Direction along which the distance grows one-for-one: away from the
    // tool point, perpendicular to the last segment and clear of the chain.
    const Eigen::Vector3d tool = segments.back().b;
    Eigen::Vector3d dir = (segments.back().b - segments.back().a).normalized();
    const auto at_offset = [&](double s) { return Eigen::Vector3d(tool + dir * s); };

    std::vector<double> targets;
    for (int i = 200; i >= 10; --i) targets.push_back(i / 100.0);
    for (int i = 11; i <= 200; ++i) targets.push_back(i / 100.0);

    Zone zone = Zone::Normal;
    std::vector<std::string> markers;
    std::size_t violations = 0;
    double d_min = 1e9, d_max = 0;
    std::optional<SeparationState> previous;
    for (double s : targets) {
        const std::vector<Eigen::Vector3d> human{at_offset(s)};
        auto sep = min_distance(segments, human);
        sep.directed_speed = previous ? directed_speed(*previous, sep, 0.01) : 0.0;
        const auto tr = ssm_step(zone, sep, cfg);
        zone = tr.zone;
        markers.insert(markers.end(), tr.markers.begin(), tr.markers.end());
        if (sep.min_distance < cfg.d_stop && zone != Zone::Stop) ++violations;
        d_min = std::min(d_min, sep.min_distance);
        d_max = std::max(d_max, sep.min_distance);
        previous = sep;
    }
    v.require(std::abs(d_min - 0.1) < 1e-9 && std::abs(d_max - 2.0) < 1e-9, "fixture did not sweep 2.0 -> 0.1 m");
    std::vector<std::string> specific;
    for (std::size_t i = 0; i < markers.size(); ++i) {
        if (markers[i] == "Robot state change") continue;
        specific.push_back(markers[i]);
        v.require(i > 0 && markers[i - 1] == "Robot state change", "'" + markers[i] + "' not paired with a state change");
    }
    v.require(specific == std::vector<std::string>{"Robot is slowing down", "Robot is stopping", "Robot is speeding up"},
              "unexpected transition sequence");
    v.require(violations == 0, std::to_string(violations) + " steps below D_stop outside Stop");
    if (v.pass) {
        v.detail = "sequence:";
        for (const auto& m : markers) v.detail += " [" + m + "]";
        v.detail += ", 0 stop violations";
    }
    return v;
}

std::size_t robot_stream(const Recording& rec) {
    for (const auto& d : rec.declarations())
        if (d.info.name == "joints") return d.stream_id;
    return 0;
}

Verdict case_one_fidelity() {
    Verdict v;
    const std::pair<AccelMode, TrajectoryMode> table[4] = {{AccelMode::Normal, TrajectoryMode::Fixed},
                                                           {AccelMode::High, TrajectoryMode::Fixed},
                                                           {AccelMode::Normal, TrajectoryMode::Random},
                                                           {AccelMode::High, TrajectoryMode::Random}};
    double fastest = 0, worst_cadence = 0;
    std::size_t polls = 0;
    for (int n = 1; n <= 4; ++n) {
        const std::string task = "task " + std::to_string(n) + ": ";
        InProcessBackend backend;
        const auto result = run_case1(CaseOneConfig::defaults(n), backend);
        v.require(result.acceleration == table[n - 1].first && result.trajectory == table[n - 1].second,
                  task + "wrong acceleration/trajectory pair");
        const auto rec = backend.recording();
        v.require(rec.footer.metadata.at("acceleration") == to_string(table[n - 1].first) &&
                      rec.footer.metadata.at("trajectory") == to_string(table[n - 1].second),
                  task + "metadata disagrees with the task table");

        // Joint speeds (deg/s) straight from the recorded robot stream.
        const auto id = robot_stream(rec);
        const auto decl = rec.declaration(static_cast<StreamId>(id));
        v.require(decl.has_value(), task + "no robot stream");
        if (!decl) continue;
        const std::size_t dof = decl->info.channel_count / 2;
        std::size_t count = 0;
        for (const auto& s : rec.samples(decl->stream_id)) {
            for (std::size_t j = 0; j < dof; ++j) fastest = std::max(fastest, std::abs(s.values[dof + j]));
            ++count;
        }
        v.require(count > 1000, task + "robot stream nearly empty");

        const auto corrected = correct_recording(rec);
        v.require(!corrected.markers.empty() && corrected.markers.front().label == "Experiment start",
                  task + "first marker is not Experiment start");
        v.require(!corrected.markers.empty() && corrected.markers.back().label == "Experiment end",
                  task + "last marker is not Experiment end");
        std::optional<double> previous_failed;
        for (const auto& m : corrected.markers) {
            if (m.label != "Pick up failed" && m.label != "Pick up successful") continue;
            ++polls;
            worst_cadence = std::max(worst_cadence, std::abs(m.time - 5.0 * std::round(m.time / 5.0)));
            if (previous_failed) worst_cadence = std::max(worst_cadence, std::abs(m.time - *previous_failed - 5.0));
            previous_failed = m.label == "Pick up failed" ? std::optional(m.time) : std::nullopt;
        }
    }
    v.require(fastest <= 100.0 + 1e-3, "joint speed " + fmt("%.4f", fastest) + " deg/s");
    v.require(worst_cadence <= 0.010, "poll cadence off by " + fmt("%.4f", worst_cadence) + " s");
    v.require(polls >= 16, "only " + std::to_string(polls) + " polls");
    if (v.pass)
        v.detail = "tasks 1-4 match the table, peak joint speed " + fmt("%.3f", fastest) + " deg/s, " +
                   std::to_string(polls) + " polls within " + fmt("%.1e", worst_cadence) + " s of the 5 s grid";
    return v;
}

Verdict case_two_fidelity() {
    Verdict v;
    const double start = wall_seconds();
    auto far_cfg = CaseTwoConfig::defaults();
    far_cfg.human = CaseTwoConfig::far_human();
    InProcessBackend far_backend;
    const auto far = run_case2(far_cfg, far_backend);
    InProcessBackend crossing_backend;
    const auto crossing = run_case2(CaseTwoConfig::defaults(), crossing_backend);
    const double runtime = wall_seconds() - start;

    v.require(std::abs(CaseTwoConfig::defaults().base_rotation - M_PI) < 1e-12, "base rotation is not pi");
    for (const auto* r : {&far, &crossing}) v.require(r->place_times.size() == 10, "place events != 10");

    // Base joint excursion in the recording: pick to place is a half turn.
    const auto rec = crossing_backend.recording();
    const auto id = robot_stream(rec);
    double lo = 1e9, hi = -1e9;
    for (const auto& s : rec.samples(static_cast<StreamId>(id))) {
        lo = std::min(lo, s.values[0]);
        hi = std::max(hi, s.values[0]);
    }
    v.require(std::abs((hi - lo) - 180.0) < 1e-3, "base joint travel " + fmt("%.4f", hi - lo) + " deg");

    std::size_t far_changes = 0;
    for (const auto& m : far.markers) far_changes += m.label == "Robot state change";
    v.require(far_changes == 0, std::to_string(far_changes) + " state changes with a far human");

    const std::vector<std::string> cycle = {"Robot is slowing down", "Robot is stopping", "Robot is speeding up"};
    std::size_t cycles = 0, next = 0;
    for (const auto& m : crossing.markers) {
        if (m.label == cycle[next]) {
            if (++next == cycle.size()) {
                ++cycles;
                next = 0;
            }
        }
    }
    v.require(cycles >= 1, "no full slow/stop/resume cycle");
    v.require(crossing.stop_violations == 0, "stop zone violated");
    v.require(runtime < 60.0, "runtime " + fmt("%.1f", runtime) + " s");
    if (v.pass)
        v.detail = "10 cycles, base travel 180 deg, far human 0 state changes, crossing human " + std::to_string(cycles) +
                   " slow/stop/resume cycle(s), both runs in " + fmt("%.2f", runtime) + " s";
    return v;
}

std::string epoch_bytes(const Recording& rec, std::string_view label) {
    std::ostringstream out;
    const auto epochs = extract_epochs(rec, label, 1.0, 2.0);
    export_epochs(epochs, out);
    return out.str();
}

Verdict determinism() {
    Verdict v;
    std::size_t runs = 0, bytes = 0;
    auto compare = [&](const std::string& name, auto run, std::string_view label) {
        InProcessBackend a, b;
        const auto ra = run(a);
        const auto rb = run(b);
        std::vector<std::string> la, lb;
        for (const auto& m : ra.markers) la.push_back(m.label);
        for (const auto& m : rb.markers) lb.push_back(m.label);
        v.require(la == lb, name + " marker sequences differ");
        const auto ea = epoch_bytes(a.recording(), label);
        const auto eb = epoch_bytes(b.recording(), label);
        v.require(!ea.empty() && ea == eb, name + " epoch exports differ");
        runs += 2;
        bytes += ea.size();
    };
    for (int n = 1; n <= 4; ++n)
        compare("case1 task " + std::to_string(n), [n](InProcessBackend& be) { return run_case1(CaseOneConfig::defaults(n), be); },
                "Robot approaching");
    compare("case2", [](InProcessBackend& be) { return run_case2(CaseTwoConfig::defaults(), be); }, "Robot state change");
    auto seeded = CaseOneConfig::defaults(3);
    seeded.devices.seed = 12345;
    compare("case1 seed 12345", [&](InProcessBackend& be) { return run_case1(seeded, be); }, "Robot approaching");
    if (v.pass) v.detail = std::to_string(runs) + " runs, " + std::to_string(bytes) + " epoch bytes per side identical";
    return v;
}

} // namespace

int main() {
    const std::pair<const char*, Verdict (*)()> criteria[] = {
        {"clock_sync_recovery", clock_sync_recovery}, {"lossless_pipeline", lossless_pipeline},
        {"epoching_count_bound", epoching_bound},     {"min_distance_oracle", min_distance_oracle},
        {"ssm_marker_correctness", ssm_markers},      {"case1_fidelity", case_one_fidelity},
        {"case2_fidelity", case_two_fidelity},        {"determinism", determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict verdict;
        try {
            verdict = check();
        } catch (const std::exception& e) {
            verdict.require(false, std::string("exception: ") + e.what());
        }
        std::printf("%s %s: %s\n", verdict.pass ? "PASS" : "FAIL", name, verdict.detail.c_str());
        std::fflush(stdout);
        failures += !verdict.pass;
    }
    return failures == 0 ? 0 : 1;
}
