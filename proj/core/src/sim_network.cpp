#include "syncrec/sim_network.hpp"

#include "syncrec/error.hpp"

namespace syncrec {

SimulatedProducer::SimulatedProducer(Hub& hub, const SimClock& clock, std::string source_id, ClockModel clock_model,
                                     DelayModel delays, std::uint64_t seed)
    : hub_(hub), clock_(clock), session_(hub.connect(std::move(source_id))), model_(clock_model), delays_(delays),
      rng_(seed) {
    if (delays_.min < 0.0 || delays_.max < delays_.min) throw Error("bad-delay", "delay range must satisfy 0 <= min <= max");
}

SimulatedProducer::~SimulatedProducer() {
    try {
        close();
    } catch (...) {
    }
}

StreamId SimulatedProducer::declare(const StreamInfo& info) { return hub_.register_stream(session_, info); }

void SimulatedProducer::push(StreamId stream_id, std::vector<Sample> samples) {
    hub_.route_chunk(session_, stream_id, std::move(samples));
}

void SimulatedProducer::marker(std::string_view label, MarkerOrigin origin, double raw_t) {
    hub_.inject_marker(std::string(label), origin, raw_t, session_);
}

double SimulatedProducer::draw_delay() {
    if (delays_.max == delays_.min) return delays_.min;
    return std::uniform_real_distribution<double>(delays_.min, delays_.max)(rng_);
}

OffsetMeasurement SimulatedProducer::sync(std::size_t probes) {
    std::vector<OffsetMeasurement> train;
    double t = clock_.now();
    for (std::size_t i = 0; i < std::max<std::size_t>(probes, 1); ++i) {
        const double t0 = model_.local(t);
        const double arrive = t + draw_delay();
        const double back = arrive + draw_delay();
        train.push_back(measure_offset(t0, arrive, arrive, model_.local(back)));
        t = back;
    }
    const auto best = select_measurement(train);
    hub_.report_exchange(session_, {best.t0, best.t1, best.t2, best.t3});
    return best;
}

void SimulatedProducer::close() {
    if (!open_) return;
    open_ = false;
    hub_.close_session(session_, true);
}

void SimulatedProducer::abort() {
    if (!open_) return;
    open_ = false;
    hub_.close_session(session_, false);
}

NetworkProducer::NetworkProducer(const net::Endpoint& hub, std::string source_id, double origin, ClockModel clock_model)
    : origin_(origin), model_(clock_model) {
    const ClockModel model = model_;
    client_ = std::make_unique<ProducerClient>(hub, std::move(source_id),
                                               [model] { return model.local(steady_seconds()); });
}

NetworkProducer::~NetworkProducer() {
    try {
        close();
    } catch (...) {
    }
}

StreamId NetworkProducer::declare(const StreamInfo& info) { return client_->declare(info); }

void NetworkProducer::push(StreamId stream_id, std::vector<Sample> samples) { client_->push(stream_id, samples); }

void NetworkProducer::marker(std::string_view label, MarkerOrigin origin, double raw_t) {
    client_->marker(label, origin, raw_t);
}

OffsetMeasurement NetworkProducer::sync(std::size_t probes) { return client_->sync(probes); }

void NetworkProducer::close() {
    if (!client_) return;
    client_->bye();
    client_.reset();
}

} // namespace syncrec
