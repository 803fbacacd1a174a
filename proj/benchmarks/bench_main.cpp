#include "syncrec/digital_twin.hpp"
#include "syncrec/epocher.hpp"
#include "syncrec/orchestrator.hpp"
#include "syncrec/wire_protocol.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace syncrec;

namespace {

std::vector<Sample> make_chunk(std::size_t n, std::size_t channels) {
    std::vector<Sample> chunk;
    for (std::size_t i = 0; i < n; ++i) chunk.push_back({i / 256.0, std::vector<double>(channels, 0.5 * i)});
    return chunk;
}

void BM_EncodeChunk(benchmark::State& state) {
    const auto chunk = make_chunk(static_cast<std::size_t>(state.range(0)), 12);
    for (auto _ : state) benchmark::DoNotOptimize(wire::encode_sample_chunk(1, chunk, 12));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeChunk)->Arg(64)->Arg(1024);

void BM_DecodeChunk(benchmark::State& state) {
    const auto bytes = wire::encode_sample_chunk(1, make_chunk(static_cast<std::size_t>(state.range(0)), 12), 12);
    for (auto _ : state) benchmark::DoNotOptimize(wire::decode_sample_chunk(bytes, 12));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DecodeChunk)->Arg(64)->Arg(1024);

void BM_FrameDecoder(benchmark::State& state) {
    wire::Bytes stream;
    const auto payload = wire::encode_sample_chunk(1, make_chunk(32, 4), 4);
    for (int i = 0; i < 100; ++i) {
        const auto frame = wire::encode_frame(wire::MsgType::SampleChunk, payload);
        stream.insert(stream.end(), frame.begin(), frame.end());
    }
    for (auto _ : state) {
        wire::FrameDecoder decoder;
        decoder.feed(stream);
        std::size_t frames = 0;
        while (std::holds_alternative<wire::Decoded>(decoder.next())) ++frames;
        benchmark::DoNotOptimize(frames);
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
}
BENCHMARK(BM_FrameDecoder);

void BM_MinDistance(benchmark::State& state) {
    const auto robot = CaseTwoConfig::defaults().robot;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> angle(-3.0, 3.0), coord(-1.5, 1.5);
    std::vector<double> q(robot.joints.size());
    for (auto& x : q) x = angle(rng);
    const auto segments = robot_segments(robot, q);
    std::vector<Eigen::Vector3d> human;
    for (int i = 0; i < state.range(0); ++i) human.emplace_back(coord(rng), coord(rng), coord(rng));
    for (auto _ : state) benchmark::DoNotOptimize(min_distance(segments, human).min_distance);
}
BENCHMARK(BM_MinDistance)->Arg(4)->Arg(64);

void BM_TwinStep(benchmark::State& state) {
    const auto robot = CaseTwoConfig::defaults().robot;
    const std::vector<double> q(robot.joints.size(), 0.4);
    const auto human = gen_mocap(0.0, CaseTwoConfig::far_human());
    std::vector<Eigen::Vector3d> points;
    for (const auto& p : human) points.push_back(p.position);
    const SsmConfig cfg;
    for (auto _ : state) {
        const auto segments = robot_segments(robot, q);
        const auto sep = min_distance(segments, points);
        benchmark::DoNotOptimize(ssm_step(Zone::Normal, sep, cfg));
    }
}
BENCHMARK(BM_TwinStep);

void BM_ExtractEpochs(benchmark::State& state) {
    std::vector<RecordEvent> events;
    events.push_back(StreamDecl{1, 0, ecg_stream_info("hub", 256)});
    std::vector<Sample> samples;
    for (int k = 0; k < 256 * 600; ++k) samples.push_back({k / 256.0, {gen_ecg(k / 256.0, 70)}});
    events.push_back(NumericChunk{1, std::move(samples)});
    for (int i = 0; i < state.range(0); ++i)
        events.push_back(MarkerRecord{{5.0 + i * (590.0 / state.range(0)), "stim", MarkerOrigin::Auto}, 0});
    const auto corrected = correct_recording(Recording::from_events(events));
    for (auto _ : state) benchmark::DoNotOptimize(extract_epochs(corrected, "stim", 1.0, 2.0));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExtractEpochs)->Arg(10)->Arg(200);

void BM_CaseTwoRun(benchmark::State& state) {
    for (auto _ : state) {
        InProcessBackend backend;
        benchmark::DoNotOptimize(run_case2(CaseTwoConfig::defaults(), backend).twin_steps);
    }
}
BENCHMARK(BM_CaseTwoRun)->Unit(benchmark::kMillisecond)->Iterations(3);

} // namespace
BENCHMARK_MAIN();
