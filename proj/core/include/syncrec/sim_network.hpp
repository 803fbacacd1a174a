/**
 * @file sim_network.hpp
 * @brief Producer links: a deterministic in-process session with a modelled
 *        clock and network delay, and the same interface over TCP.
 */
#pragma once

#include "syncrec/clock_sync.hpp"
#include "syncrec/hub.hpp"
#include "syncrec/hub_server.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace syncrec {

/// Producer clock as a function of hub time: local = hub * (1 + drift) + offset.
struct ClockModel {
    double offset = 0.0; ///< s
    double drift = 0.0;  ///< s/s

    double local(double hub_t) const { return hub_t * (1.0 + drift) + offset; }
    /// The hub - producer offset the estimator should recover at hub time t.
    double true_offset(double hub_t) const { return hub_t - local(hub_t); }
};

/// Independent one-way delays drawn from U(min, max).
struct DelayModel {
    double min = 0.0;
    double max = 0.0;
};

/// Manually advanced hub clock for simulated runs.
class SimClock {
public:
    double now() const { return now_.load(); }
    void set(double t) { now_.store(t); }
    HubClock hub_clock() const {
        return [this] { return now(); };
    }

private:
    std::atomic<double> now_{0.0};
};

/// What a simulated device needs from its connection to the hub.
class ProducerLink {
public:
    virtual ~ProducerLink() = default;

    virtual StreamId declare(const StreamInfo& info) = 0;
    virtual void push(StreamId stream_id, std::vector<Sample> samples) = 0;
    virtual void marker(std::string_view label, MarkerOrigin origin, double raw_t) = 0;
    /// One sync round of `probes` exchanges.
    virtual OffsetMeasurement sync(std::size_t probes) = 0;
    /// Producer clock reading at scenario time t.
    virtual double local_time(double scenario_t) const = 0;
    virtual void close() = 0;
};

/// Session on an in-process hub whose clock is a SimClock. Exchanges are
/// resolved instantly in simulated time with seeded delays.
class SimulatedProducer final : public ProducerLink {
public:
    SimulatedProducer(Hub& hub, const SimClock& clock, std::string source_id, ClockModel clock_model = {},
                      DelayModel delays = {}, std::uint64_t seed = 0);
    ~SimulatedProducer() override;

    StreamId declare(const StreamInfo& info) override;
    void push(StreamId stream_id, std::vector<Sample> samples) override;
    void marker(std::string_view label, MarkerOrigin origin, double raw_t) override;
    /// The train starts at the current simulated time; probes run back to back.
    OffsetMeasurement sync(std::size_t probes) override;
    double local_time(double scenario_t) const override { return model_.local(scenario_t); }
    void close() override;
    /// Drops the session without BYE.
    void abort();

    SessionId session() const { return session_; }
    const ClockModel& clock_model() const { return model_; }

private:
    double draw_delay();

    Hub& hub_;
    const SimClock& clock_;
    SessionId session_;
    ClockModel model_;
    DelayModel delays_;
    std::mt19937_64 rng_;
    bool open_ = true;
};

/// Real TCP session; the local clock is the host steady clock passed
/// through `clock_model`. Scenario time t maps to steady time origin + t.
class NetworkProducer final : public ProducerLink {
public:
    NetworkProducer(const net::Endpoint& hub, std::string source_id, double origin, ClockModel clock_model = {});
    ~NetworkProducer() override;

    StreamId declare(const StreamInfo& info) override;
    void push(StreamId stream_id, std::vector<Sample> samples) override;
    void marker(std::string_view label, MarkerOrigin origin, double raw_t) override;
    OffsetMeasurement sync(std::size_t probes) override;
    double local_time(double scenario_t) const override { return model_.local(origin_ + scenario_t); }
    void close() override;

    double local_now() const { return model_.local(steady_seconds()); }

private:
    double origin_;
    ClockModel model_;
    std::unique_ptr<ProducerClient> client_;
};

} // namespace syncrec
