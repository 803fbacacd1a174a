#include "syncrec/orchestrator.hpp"

#include "syncrec/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>
#include <thread>

namespace syncrec {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr std::size_t kFlushTicks = 10;

JointConfig degrees(std::initializer_list<double> values) {
    JointConfig q;
    for (double v : values) q.push_back(v * kDeg);
    return q;
}

KinematicModel generic_arm() {
    KinematicModel m;
    const double half_pi = std::numbers::pi / 2;
    m.joints = {
        {0.0, half_pi, 0.15, 0.0}, {0.40, 0.0, 0.0, 0.0}, {0.35, 0.0, 0.0, 0.0},
        {0.0, half_pi, 0.12, 0.0}, {0.0, -half_pi, 0.10, 0.0}, {0.0, 0.0, 0.08, 0.0},
    };
    return m;
}

} // namespace

// ---------------------------------------------------------------- backends

InProcessBackend::InProcessBackend(std::optional<std::filesystem::path> path, DelayModel delays)
    : hub_(clock_.hub_clock()), path_(std::move(path)), delays_(delays) {
    subscription_ = hub_.subscribe(wire::SubscribeFilter::All, std::numeric_limits<std::size_t>::max());
    writer_ = path_ ? std::make_unique<RecordingWriter>(*path_) : std::make_unique<RecordingWriter>();
}

InProcessBackend::~InProcessBackend() {
    if (subscription_) hub_.unsubscribe(subscription_);
}

std::unique_ptr<ProducerLink> InProcessBackend::open_producer(const std::string& source_id, const ClockModel& clock,
                                                              std::uint64_t seed) {
    return std::make_unique<SimulatedProducer>(hub_, clock_, source_id, clock, delays_, seed);
}

void InProcessBackend::marker(std::string_view label, MarkerOrigin origin, double t) {
    hub_.inject_marker(std::string(label), origin, t, kHubSourceRef);
}

void InProcessBackend::advance_to(double t) {
    clock_.set(t);
    drain();
}

void InProcessBackend::drain() {
    for (const auto& event : subscription_->drain()) writer_->write(to_record_event(event));
}

void InProcessBackend::finish(const Metadata& metadata) {
    drain();
    hub_.unsubscribe(subscription_);
    subscription_.reset();
    writer_->finish(metadata);
}

Recording InProcessBackend::recording() const {
    if (!writer_->finished()) throw Error("not-finished", "recording is still open");
    return path_ ? read_recording(*path_) : read_recording(writer_->bytes());
}

NetworkBackend::NetworkBackend(net::Endpoint hub, std::string controller_id)
    : endpoint_(std::move(hub)), origin_(steady_seconds()) {
    controller_ = std::make_unique<NetworkProducer>(endpoint_, std::move(controller_id), origin_);
    controller_->sync(kInitialProbeCount);
    next_sync_ = kPingIntervalSeconds;
}

NetworkBackend::~NetworkBackend() = default;

std::unique_ptr<ProducerLink> NetworkBackend::open_producer(const std::string& source_id, const ClockModel& clock,
                                                            std::uint64_t) {
    return std::make_unique<NetworkProducer>(endpoint_, source_id, origin_, clock);
}

void NetworkBackend::marker(std::string_view label, MarkerOrigin origin, double t) {
    controller_->marker(label, origin, controller_->local_time(t));
}

void NetworkBackend::advance_to(double t) {
    const double wait = origin_ + t - steady_seconds();
    if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    if (t >= next_sync_) {
        controller_->sync(kProbesPerRound);
        next_sync_ += kPingIntervalSeconds;
    }
}

void NetworkBackend::finish(const Metadata&) { controller_->close(); }

// ---------------------------------------------------------------- devices

DeviceSetup DeviceSetup::defaults() {
    DeviceSetup d;
    d.clocks = {
        {"gsr-sensor", {0.25, 2e-5}}, {"ppg-sensor", {-0.4, -1.5e-5}}, {"ecg-sensor", {1.7, 5e-6}},
        {"mocap", {0.05, 0.0}},       {"robot", {-0.08, 1e-5}},
    };
    return d;
}

double compliance_hook(const ComplianceFeatures& features, const ComplianceRule& rule) {
    auto it = features.find("gsr");
    if (it == features.end() || it->second.count == 0) return 1.0;
    return it->second.phasic_amplitude > rule.gsr_threshold ? rule.reduced_scale : 1.0;
}

PlateState master_pin_poll(int inserts_on_plate) { return inserts_on_plate > 0 ? PlateState::Loaded : PlateState::Empty; }

namespace {

/// Tick-driven scenario clock shared by all producers of one run.
class World {
public:
    World(ExperimentBackend& backend, const DeviceSetup& setup)
        : backend_(backend), setup_(setup), tick_(1.0 / setup.robot_rate) {
        if (!(setup.robot_rate > 0)) throw Error("bad-config", "robot_rate must be positive");
    }

    double tick() const { return tick_; }
    double now() const { return static_cast<double>(k_) * tick_; }

    ProducerLink& link(const std::string& source_id) {
        for (auto& [id, l] : links_)
            if (id == source_id) return *l;
        auto it = setup_.clocks.find(source_id);
        const ClockModel clock = it == setup_.clocks.end() ? ClockModel{} : it->second;
        const std::uint64_t seed = setup_.seed * 7919 + links_.size();
        links_.emplace_back(source_id, backend_.open_producer(source_id, clock, seed));
        return *links_.back().second;
    }

    /// Returns a slot index for push().
    std::size_t declare(const std::string& source_id, const StreamInfo& info) {
        ProducerLink& l = link(source_id);
        const StreamId id = l.declare(info);
        buffers_.push_back({&l, id, {}});
        return buffers_.size() - 1;
    }

    void add_periodic(const std::string& source_id, const StreamInfo& info,
                      std::function<std::vector<double>(double)> generate) {
        const std::size_t slot = declare(source_id, info);
        periodic_.push_back({slot, info.nominal_rate_hz, 0, std::move(generate)});
    }

    /// Pushes a sample taken at scenario time t.
    void push(std::size_t slot, double t, std::vector<double> values) {
        auto& b = buffers_.at(slot);
        b.samples.push_back({b.link->local_time(t), std::move(values)});
    }

    void marker(std::string_view label) {
        backend_.marker(label, MarkerOrigin::Auto, now());
        log_.push_back({now(), std::string(label)});
    }

    const std::vector<MarkerLogEntry>& log() const { return log_; }

    void start() {
        backend_.advance_to(0.0);
        for (auto& [id, l] : links_) l->sync(kInitialProbeCount);
        next_sync_ = kPingIntervalSeconds;
        step_devices();
        if (on_tick) on_tick(0.0);
    }

    /// Runs every tick up to and including t.
    void advance(double t) {
        while (static_cast<double>(k_ + 1) * tick_ <= t + 1e-9) {
            ++k_;
            backend_.advance_to(now());
            if (now() >= next_sync_ - 1e-9) {
                for (auto& [id, l] : links_) l->sync(kProbesPerRound);
                next_sync_ += kPingIntervalSeconds;
            }
            step_devices();
            if (on_tick) on_tick(now());
            if (k_ % kFlushTicks == 0) flush();
        }
    }

    /// First tick strictly after t.
    double tick_after(double t) const { return (std::floor(t / tick_ + 1e-9) + 1.0) * tick_; }

    void finish(const Metadata& metadata) {
        flush();
        for (auto& [id, l] : links_) l->close();
        backend_.finish(metadata);
    }

    std::function<void(double)> on_tick;

private:
    struct Buffer {
        ProducerLink* link;
        StreamId id;
        std::vector<Sample> samples;
    };
    struct Periodic {
        std::size_t slot;
        double rate;
        std::uint64_t next;
        std::function<std::vector<double>(double)> generate;
    };

    void step_devices() {
        for (auto& p : periodic_) {
            while (static_cast<double>(p.next) / p.rate <= now() + 1e-9) {
                const double t = static_cast<double>(p.next) / p.rate;
                push(p.slot, t, p.generate(t));
                ++p.next;
            }
        }
    }

    void flush() {
        for (auto& b : buffers_) {
            if (b.samples.empty()) continue;
            b.link->push(b.id, std::move(b.samples));
            b.samples.clear();
        }
    }

    ExperimentBackend& backend_;
    DeviceSetup setup_;
    double tick_;
    std::uint64_t k_ = 0;
    double next_sync_ = kPingIntervalSeconds;
    std::vector<std::pair<std::string, std::unique_ptr<ProducerLink>>> links_;
    std::vector<Buffer> buffers_;
    std::vector<Periodic> periodic_;
    std::vector<MarkerLogEntry> log_;
};

std::vector<double> to_degrees(const JointConfig& q) {
    std::vector<double> out(q.size());
    std::transform(q.begin(), q.end(), out.begin(), [](double v) { return v / kDeg; });
    return out;
}

/// Joint-space arm that streams its state: hold samples on idle ticks,
/// profile samples while moving.
class Arm {
public:
    Arm(World& world, std::size_t slot, JointConfig start) : world_(world), slot_(slot), q_(std::move(start)) {}

    const JointConfig& q() const { return q_; }
    double max_speed() const { return max_speed_; }

    void on_tick(double t) {
        if (moving_ || t <= last_t_ + 1e-9) return;
        emit(t, q_, JointConfig(q_.size(), 0.0));
    }

    /// Advances to the first tick on which a new motion can start.
    void ready() {
        if (world_.now() < last_t_ + 1e-9) world_.advance(world_.tick_after(last_t_));
    }

    /// Executes the plan from the next free tick; returns (start, end).
    std::pair<double, double> execute(const TrajectoryPlan& plan) {
        ready();
        const double t0 = world_.now();
        const auto samples = execute_profile(plan, world_.tick());
        moving_ = true;
        for (const auto& s : samples) {
            world_.advance(t0 + s.t);
            emit(t0 + s.t, s.q, s.qd);
        }
        moving_ = false;
        if (!samples.empty()) q_ = samples.back().q;
        return {t0, std::max(t0, last_t_)};
    }

    /// Streams an externally integrated state at tick t.
    void set_state(double t, JointConfig q, const JointConfig& qd) {
        q_ = std::move(q);
        emit(t, q_, qd);
    }

private:
    void emit(double t, const JointConfig& q, const JointConfig& qd) {
        std::vector<double> values = to_degrees(q);
        const auto speed = to_degrees(qd);
        for (double v : speed) max_speed_ = std::max(max_speed_, std::abs(v));
        values.insert(values.end(), speed.begin(), speed.end());
        world_.push(slot_, t, std::move(values));
        last_t_ = t;
    }

    World& world_;
    std::size_t slot_;
    JointConfig q_;
    double last_t_ = -1.0;
    double max_speed_ = 0.0;
    bool moving_ = false;
};

void add_physio(World& world, const DeviceSetup& setup, const std::vector<StimulusEvent>& scr_events) {
    const auto& p = setup.physio;
    world.add_periodic("gsr-sensor", gsr_stream_info("gsr-sensor", setup.rates.gsr), [&scr_events, p](double t) {
        return std::vector<double>{gen_gsr(t, p.gsr_tonic, scr_events)};
    });
    world.add_periodic("ppg-sensor", ppg_stream_info("ppg-sensor", setup.rates.ppg),
                       [p](double t) { return std::vector<double>{gen_ppg(t, p.heart_rate)}; });
    world.add_periodic("ecg-sensor", ecg_stream_info("ecg-sensor", setup.rates.ecg),
                       [p](double t) { return std::vector<double>{gen_ecg(t, p.heart_rate)}; });
}

std::vector<double> mocap_values(double t, const MocapScript& script) {
    std::vector<double> values;
    for (const auto& point : gen_mocap(t, script))
        values.insert(values.end(), point.position.data(), point.position.data() + 3);
    return values;
}

StreamSummary summarize(const std::vector<double>& values) {
    StreamSummary s;
    if (values.empty()) return s;
    s.count = values.size();
    s.first = values.front();
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    double sum = 0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    s.phasic_amplitude = s.max - s.first;
    return s;
}

void check_dof(const KinematicModel& robot, const JointConfig& q, const char* what) {
    if (q.size() != robot.joints.size())
        throw Error("bad-config", std::string(what) + " has " + std::to_string(q.size()) + " joints, the robot has " +
                                      std::to_string(robot.joints.size()));
}

std::string format_double(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.6f", v);
    return buffer;
}

} // namespace

// ---------------------------------------------------------------- Case I

CaseOneConfig::CaseOneConfig(int task_id) : task_id_(task_id) {
    switch (task_id) {
    case 1: accel_ = AccelMode::Normal, trajectory_ = TrajectoryMode::Fixed; break;
    case 2: accel_ = AccelMode::High, trajectory_ = TrajectoryMode::Fixed; break;
    case 3: accel_ = AccelMode::Normal, trajectory_ = TrajectoryMode::Random; break;
    case 4: accel_ = AccelMode::High, trajectory_ = TrajectoryMode::Random; break;
    default: throw Error("bad-task", "task must be 1..4");
    }
}

CaseOneConfig CaseOneConfig::defaults(int task_id) {
    CaseOneConfig cfg(task_id);
    cfg.robot = generic_arm();
    cfg.home = degrees({180, 60, -120, -30, 0, 0});
    cfg.pick = degrees({0, 30, -60, -60, 0, 0});
    cfg.slot_step = degrees({-3, 0, 0, 0, 0, 0});
    cfg.place = degrees({90, 30, -60, -60, 0, 0});
    const double offsets[4][2] = {{10, -20}, {-10, 10}, {20, -30}, {0, -10}};
    for (double f : {0.25, 0.5, 0.75}) {
        std::vector<JointConfig> plane;
        for (const auto& o : offsets) plane.push_back(degrees({90 * f, 30 + o[0], -60 + o[1], -60, 0, 0}));
        cfg.planes.push_back(std::move(plane));
    }
    return cfg;
}

CaseOneResult run_case1(const CaseOneConfig& cfg, ExperimentBackend& backend) {
    if (cfg.insert_count < 1) throw Error("bad-config", "insert_count must be positive");
    if (!(cfg.poll_period > 0)) throw Error("bad-config", "poll_period must be positive");
    validate(cfg.robot);
    for (const auto* q : {&cfg.home, &cfg.pick, &cfg.slot_step, &cfg.place}) check_dof(cfg.robot, *q, "a pose");
    const int capacity = cfg.plate_capacity > 0 ? cfg.plate_capacity : cfg.insert_count;
    const int n = cfg.task_id();
    const auto& dev = cfg.devices;

    CaseOneResult result;
    result.acceleration = cfg.acceleration();
    result.trajectory = cfg.trajectory();

    World world(backend, dev);
    std::vector<StimulusEvent> scr_events;
    add_physio(world, dev, scr_events);
    const std::size_t robot_slot =
        world.declare("robot", robot_stream_info("robot", dev.robot_rate, cfg.robot.joints.size()));
    Arm arm(world, robot_slot, cfg.home);

    // Plate and the simulated subject who loads it.
    int plate = 0;
    int scheduled = 0;
    std::vector<std::pair<double, int>> loads;
    auto schedule_load = [&](double at, int count) {
        count = std::min(count, cfg.insert_count - scheduled);
        if (count <= 0) return;
        scheduled += count;
        loads.emplace_back(at, count);
    };
    schedule_load(cfg.load_latency, capacity);

    world.on_tick = [&](double t) {
        for (auto it = loads.begin(); it != loads.end();) {
            if (it->first <= t + 1e-9) {
                plate += it->second;
                it = loads.erase(it);
            } else {
                ++it;
            }
        }
        arm.on_tick(t);
    };

    std::mt19937_64 rng(dev.seed);
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    std::uint64_t motion_index = 0;
    std::optional<double> last_approach;

    auto tool_point = [&](const JointConfig& q) { return forward_kinematics(cfg.robot, q).back(); };
    auto features_now = [&]() {
        ComplianceFeatures features;
        if (!last_approach) return features;
        const double from = *last_approach;
        const double to = std::min(world.now(), from + cfg.compliance.window);
        std::vector<double> gsr;
        for (double k = std::ceil(from * dev.rates.gsr - 1e-9); k / dev.rates.gsr <= to + 1e-9; k += 1)
            gsr.push_back(gen_gsr(k / dev.rates.gsr, dev.physio.gsr_tonic, scr_events));
        features["gsr"] = summarize(gsr);
        return features;
    };

    auto move = [&](TrajectoryPlan plan) {
        double scale = 1.0;
        if (cfg.compliance_enabled) {
            const auto features = features_now();
            scale = cfg.hook ? cfg.hook(features) : compliance_hook(features, cfg.compliance);
            scale = std::clamp(scale, 1e-3, 1.0);
        }
        plan.v_max = cfg.v_max * scale;
        assign_acceleration(plan, cfg.acceleration(), cfg.accel_limits, dev.seed * 104729 + motion_index++);

        const auto& from = plan.waypoints.front();
        const auto& to = plan.waypoints.back();
        const bool approaching = (tool_point(to) - cfg.human_region).norm() < (tool_point(from) - cfg.human_region).norm();
        arm.ready();
        if (approaching) {
            world.marker(labels::kRobotApproaching);
            last_approach = world.now();
            ++result.approach_count;
            double magnitude = dev.physio.scr_magnitude * jitter(rng);
            if (cfg.acceleration() == AccelMode::High) magnitude *= 1.5;
            if (cfg.trajectory() == TrajectoryMode::Random) magnitude *= 1.25;
            scr_events.push_back({world.now() + dev.physio.scr_latency, magnitude});
        }
        const auto [start, end] = arm.execute(plan);
        double peak = 0;
        for (std::size_t i = 0; i + 1 < plan.waypoints.size(); ++i) {
            double excursion = 0;
            for (std::size_t j = 0; j < plan.waypoints[i].size(); ++j)
                excursion = std::max(excursion, std::abs(plan.waypoints[i + 1][j] - plan.waypoints[i][j]));
            peak = std::max(peak, SegmentProfile(excursion / kDeg, plan.v_max, plan.accel_for(i)).peak_speed());
        }
        result.motions.push_back({start, end, scale, approaching, peak});
    };
    auto direct = [&](const JointConfig& to) {
        return plan_trajectory(arm.q(), to, {}, TrajectoryMode::Fixed, 0);
    };
    auto reversed_planes = [&] {
        auto planes = cfg.planes;
        std::reverse(planes.begin(), planes.end());
        return planes;
    };

    world.marker(labels::kExperimentStart);
    world.marker(labels::task_init(n));
    world.start();

    int unloaded = 0;
    bool started = false;
    bool at_home = true;
    double last_poll = -std::numeric_limits<double>::infinity();
    while (true) {
        double next = std::ceil(world.now() / cfg.poll_period - 1e-9) * cfg.poll_period;
        if (next < last_poll + cfg.poll_period - 1e-9) next = last_poll + cfg.poll_period;
        if (next > cfg.timeout) throw Error("timeout", "case I did not finish within the timeout");
        world.advance(next);
        last_poll = world.now();
        result.poll_times.push_back(last_poll);
        if (master_pin_poll(plate) == PlateState::Empty) {
            world.marker(labels::kPickUpFailed);
            continue;
        }
        world.marker(labels::kPickUpSuccessful);
        if (!started) {
            world.marker(labels::task_start(n));
            started = true;
        }
        while (plate > 0 && unloaded < cfg.insert_count) {
            const int slot = unloaded % capacity;
            JointConfig target = cfg.pick;
            for (std::size_t j = 0; j < target.size(); ++j) target[j] += slot * cfg.slot_step[j];
            if (at_home)
                move(direct(target));
            else
                move(plan_trajectory(arm.q(), target, reversed_planes(), cfg.trajectory(), dev.seed * 31 + motion_index));
            at_home = false;

            --plate;
            if (cfg.strategy == HumanStrategy::ConcurrentReload)
                schedule_load(world.now() + cfg.reload_delay, 1);
            else if (plate == 0)
                schedule_load(world.now() + cfg.load_latency, capacity);

            move(plan_trajectory(arm.q(), cfg.place, cfg.planes, cfg.trajectory(), dev.seed * 31 + motion_index));
            ++unloaded;
        }
        if (unloaded == cfg.insert_count) {
            world.marker(labels::task_end(n));
            move(direct(cfg.home));
            world.advance(world.tick_after(world.now()));
            world.marker(labels::kExperimentEnd);
            break;
        }
        move(direct(cfg.home));
        at_home = true;
    }
    result.duration = world.now();
    world.advance(world.now() + cfg.tail);
    result.markers = world.log();
    result.max_joint_speed = arm.max_speed();

    Metadata meta{
        {"experiment", "case1"},
        {"task", std::to_string(n)},
        {"subject", cfg.subject_id},
        {"acceleration", std::string(to_string(cfg.acceleration()))},
        {"trajectory", std::string(to_string(cfg.trajectory()))},
        {"seed", std::to_string(dev.seed)},
        {"approach_count", std::to_string(result.approach_count)},
        {"duration_s", format_double(result.duration)},
        {"config_hash", cfg.config_hash.empty() ? "builtin" : cfg.config_hash},
    };
    world.finish(meta);
    return result;
}

// ---------------------------------------------------------------- Case II

MocapScript CaseTwoConfig::far_human() {
    const Eigen::Vector3d spot(0.0, 3.0, 0.5);
    return {{0.0, spot, spot, 1.0}};
}

MocapScript CaseTwoConfig::crossing_human() {
    const Eigen::Vector3d far(0.0, 3.0, 0.5);
    const Eigen::Vector3d near(0.0, 0.55, 0.5);
    return {{4.0, far, near, 1.0}, {9.0, near, far, 1.0}};
}

CaseTwoConfig CaseTwoConfig::defaults() {
    CaseTwoConfig cfg;
    cfg.robot = generic_arm();
    cfg.pick = degrees({0, 30, -60, -60, 0, 0});
    cfg.human = crossing_human();
    return cfg;
}

CaseTwoResult run_case2(const CaseTwoConfig& cfg, ExperimentBackend& backend) {
    if (cfg.product_count < 1) throw Error("bad-config", "product_count must be at least 1");
    if (!(cfg.v_max > 0) || cfg.v_max > kMaxJointSpeedDegPerSec || !(cfg.a_max > 0))
        throw Error("bad-config", "v_max must be in (0, 100] deg/s and a_max positive");
    validate(cfg.robot);
    validate(cfg.ssm);
    validate(cfg.human);
    check_dof(cfg.robot, cfg.pick, "pick");
    const auto& dev = cfg.devices;

    CaseTwoResult result;
    result.min_separation = std::numeric_limits<double>::infinity();

    World world(backend, dev);
    std::vector<StimulusEvent> no_events;
    add_physio(world, dev, no_events);
    world.add_periodic("mocap", mocap_stream_info("mocap", dev.rates.mocap),
                       [&cfg](double t) { return mocap_values(t, cfg.human); });
    const std::size_t robot_slot =
        world.declare("robot", robot_stream_info("robot", dev.robot_rate, cfg.robot.joints.size()));
    StreamInfo sep_info;
    sep_info.name = "separation";
    sep_info.source_id = "twin";
    sep_info.nominal_rate_hz = dev.robot_rate;
    sep_info.channel_labels = {"min_distance", "directed_speed", "zone", "d_stop", "d_reduced"};
    sep_info.units = {"m", "m/s", "level", "m", "m"};
    sep_info.channel_count = 5;
    const std::size_t sep_slot = world.declare("twin", sep_info);
    Arm arm(world, robot_slot, cfg.pick);

    JointConfig place = cfg.pick;
    place[0] += cfg.base_rotation;

    // Motion state.
    enum class Phase { Dwell, Move, Done };
    Phase phase = Phase::Dwell;
    double dwell_until = cfg.dwell;
    JointConfig from = cfg.pick;
    JointConfig to = place;
    bool to_place = true;
    double distance = 0, pos = 0, speed = 0;
    int placed = 0;

    Zone zone = Zone::Normal;
    std::optional<SeparationState> previous;
    bool ended = false;

    auto begin_move = [&](JointConfig target) {
        from = arm.q();
        to = std::move(target);
        distance = 0;
        for (std::size_t j = 0; j < from.size(); ++j) distance = std::max(distance, std::abs(to[j] - from[j]) / kDeg);
        pos = 0;
        speed = 0;
        phase = Phase::Move;
    };

    auto step_robot = [&](double t) {
        const double dt = world.tick();
        JointConfig qd(arm.q().size(), 0.0);
        if (phase == Phase::Dwell && t >= dwell_until - 1e-9) {
            if (to_place)
                begin_move(place);
            else
                begin_move(cfg.pick);
        }
        if (phase == Phase::Move) {
            const double limit = cfg.v_max * cfg.zone_scale.at(zone);
            const double brake = std::sqrt(2.0 * cfg.a_max * std::max(distance - pos, 0.0));
            const double target = std::min(limit, brake);
            speed += std::clamp(target - speed, -cfg.a_max * dt, cfg.a_max * dt);
            speed = std::max(speed, 0.0);
            pos += speed * dt;
            bool arrived = pos >= distance - 1e-9;
            if (arrived) {
                pos = distance;
                speed = 0;
            }
            JointConfig q(from.size());
            for (std::size_t j = 0; j < q.size(); ++j) {
                const double frac = distance > 0 ? pos / distance : 1.0;
                q[j] = from[j] + (to[j] - from[j]) * frac;
                if (distance > 0) qd[j] = (to[j] - from[j]) / (distance * kDeg) * speed * kDeg;
            }
            arm.set_state(t, std::move(q), qd);
            if (arrived) {
                if (to_place) {
                    ++placed;
                    result.place_times.push_back(t);
                }
                to_place = !to_place;
                if (placed == cfg.product_count) {
                    phase = Phase::Done;
                } else {
                    phase = Phase::Dwell;
                    dwell_until = t + cfg.dwell;
                }
            }
            return;
        }
        arm.set_state(t, arm.q(), qd);
    };

    auto step_twin = [&](double t) {
        const auto segments = robot_segments(cfg.robot, arm.q());
        std::vector<Eigen::Vector3d> human;
        for (const auto& p : gen_mocap(t, cfg.human)) human.push_back(p.position);
        auto sep = min_distance(segments, human, cfg.inflation_radius);
        sep.directed_speed = previous ? directed_speed(*previous, sep, world.tick()) : 0.0;
        const auto transition = ssm_step(zone, sep, cfg.ssm);
        zone = transition.zone;
        sep.zone = zone;
        if (!ended)
            for (const auto& label : transition.markers) world.marker(label);
        const auto th = effective_thresholds(sep, cfg.ssm);
        if (sep.min_distance < th.stop && zone != Zone::Stop) ++result.stop_violations;
        result.min_separation = std::min(result.min_separation, sep.min_distance);
        ++result.twin_steps;
        world.push(sep_slot, t, {sep.min_distance, sep.directed_speed, static_cast<double>(zone), th.stop, th.reduced});
        previous = sep;
    };

    world.on_tick = [&](double t) {
        if (phase != Phase::Done) step_robot(t);
        else arm.set_state(t, arm.q(), JointConfig(arm.q().size(), 0.0));
        step_twin(t);
    };

    world.marker(labels::kExperimentStart);
    world.start();
    while (phase != Phase::Done) {
        if (world.now() > cfg.timeout) throw Error("timeout", "case II did not finish within the timeout");
        world.advance(world.now() + world.tick());
    }
    world.marker(labels::kExperimentEnd);
    ended = true;
    result.duration = result.place_times.back();
    world.advance(world.now() + cfg.tail);
    result.markers = world.log();

    Metadata meta{
        {"experiment", "case2"},
        {"subject", cfg.subject_id},
        {"seed", std::to_string(dev.seed)},
        {"place_events", std::to_string(result.place_times.size())},
        {"duration_s", format_double(result.duration)},
        {"config_hash", cfg.config_hash.empty() ? "builtin" : cfg.config_hash},
    };
    world.finish(meta);
    return result;
}

// ---------------------------------------------------------------- single device

DeviceKind device_kind_from_string(std::string_view name) {
    if (name == "gsr") return DeviceKind::Gsr;
    if (name == "ppg") return DeviceKind::Ppg;
    if (name == "ecg") return DeviceKind::Ecg;
    if (name == "mocap") return DeviceKind::Mocap;
    if (name == "robot") return DeviceKind::Robot;
    throw Error("bad-device", "unknown device '" + std::string(name) + "'");
}

void run_device(DeviceKind kind, ExperimentBackend& backend, double rate, std::uint64_t seed, double duration,
                const std::function<bool()>& stop) {
    DeviceSetup setup = DeviceSetup::defaults();
    setup.seed = seed;
    if (rate > 0) {
        setup.rates = {rate, rate, rate, rate};
        if (kind == DeviceKind::Robot) setup.robot_rate = rate;
    }
    World world(backend, setup);
    std::mt19937_64 rng(seed);
    std::vector<StimulusEvent> events;
    for (double t = 5.0; t < (duration > 0 ? duration : 3600.0); t += 10.0)
        events.push_back({t + std::uniform_real_distribution<double>(0.0, 5.0)(rng), 0.5});
    const auto physio = setup.physio;
    const MocapScript walk = CaseTwoConfig::crossing_human();

    std::optional<Arm> arm;
    auto cfg = CaseOneConfig::defaults(4);
    switch (kind) {
    case DeviceKind::Gsr:
        world.add_periodic("gsr-sensor", gsr_stream_info("gsr-sensor", setup.rates.gsr), [&](double t) {
            return std::vector<double>{gen_gsr(t, physio.gsr_tonic, events)};
        });
        break;
    case DeviceKind::Ppg:
        world.add_periodic("ppg-sensor", ppg_stream_info("ppg-sensor", setup.rates.ppg),
                           [&](double t) { return std::vector<double>{gen_ppg(t, physio.heart_rate)}; });
        break;
    case DeviceKind::Ecg:
        world.add_periodic("ecg-sensor", ecg_stream_info("ecg-sensor", setup.rates.ecg),
                           [&](double t) { return std::vector<double>{gen_ecg(t, physio.heart_rate)}; });
        break;
    case DeviceKind::Mocap:
        world.add_periodic("mocap", mocap_stream_info("mocap", setup.rates.mocap),
                           [&](double t) { return mocap_values(t, walk); });
        break;
    case DeviceKind::Robot: {
        const auto slot = world.declare("robot", robot_stream_info("robot", setup.robot_rate, cfg.robot.joints.size()));
        arm.emplace(world, slot, cfg.pick);
        world.on_tick = [&](double t) { arm->on_tick(t); };
        break;
    }
    }

    auto done = [&] { return (duration > 0 && world.now() >= duration - 1e-9) || (stop && stop()); };
    world.start();
    std::uint64_t i = 0;
    while (!done()) {
        if (arm) {
            const JointConfig& target = (i % 2 == 0) ? cfg.place : cfg.pick;
            auto planes = cfg.planes;
            if (i % 2 == 1) std::reverse(planes.begin(), planes.end());
            const auto mode = std::bernoulli_distribution(0.5)(rng) ? TrajectoryMode::Random : TrajectoryMode::Fixed;
            auto plan = plan_trajectory(arm->q(), target, planes, mode, seed + i);
            assign_acceleration(plan, AccelMode::Random, AccelLimits{}, seed + i);
            arm->execute(plan);
            ++i;
        } else {
            world.advance(world.now() + world.tick());
        }
    }
    world.finish({{"experiment", "sim"}, {"seed", std::to_string(seed)}});
}

// ---------------------------------------------------------------- configuration

std::string config_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
    return buffer;
}

namespace {

using nlohmann::json;

JointConfig joint_degrees(const json& j) {
    JointConfig q;
    for (double v : j.get<std::vector<double>>()) q.push_back(v * kDeg);
    return q;
}

Eigen::Vector3d vec3(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3) throw Error("bad-config", "expected a 3-vector");
    return {v[0], v[1], v[2]};
}

void read_devices(const json& doc, DeviceSetup& d) {
    if (!doc.contains("devices")) return;
    const auto& j = doc.at("devices");
    d.seed = j.value("seed", d.seed);
    if (j.contains("rates")) {
        const auto& r = j.at("rates");
        d.rates.gsr = r.value("gsr", d.rates.gsr);
        d.rates.ppg = r.value("ppg", d.rates.ppg);
        d.rates.ecg = r.value("ecg", d.rates.ecg);
        d.rates.mocap = r.value("mocap", d.rates.mocap);
        d.robot_rate = r.value("robot", d.robot_rate);
    }
    if (j.contains("clocks")) {
        for (const auto& [source, c] : j.at("clocks").items())
            d.clocks[source] = {c.value("offset", 0.0), c.value("drift", 0.0)};
    }
    if (j.contains("physio")) {
        const auto& p = j.at("physio");
        d.physio.gsr_tonic = p.value("gsr_tonic", d.physio.gsr_tonic);
        d.physio.heart_rate = p.value("heart_rate", d.physio.heart_rate);
        d.physio.scr_magnitude = p.value("scr_magnitude", d.physio.scr_magnitude);
        d.physio.scr_latency = p.value("scr_latency", d.physio.scr_latency);
    }
    for (double r : {d.rates.gsr, d.rates.ppg, d.rates.ecg, d.rates.mocap, d.robot_rate})
        if (!(r > 0)) throw Error("bad-config", "sampling rates must be positive");
}

KinematicModel read_kinematics(const json& robot, KinematicModel fallback) {
    if (!robot.contains("kinematics")) return fallback;
    return parse_kinematic_model(robot.at("kinematics").dump());
}

MocapScript read_script(const json& j) {
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "far") return CaseTwoConfig::far_human();
        if (name == "crossing") return CaseTwoConfig::crossing_human();
        throw Error("bad-config", "unknown human preset '" + name + "'");
    }
    MocapScript script;
    for (const auto& s : j) script.push_back({s.at("start").get<double>(), vec3(s.at("from")), vec3(s.at("to")), s.at("speed").get<double>()});
    validate(script);
    return script;
}

} // namespace

CaseOneConfig parse_case1_config(std::string_view text, int task_id) {
    CaseOneConfig cfg = CaseOneConfig::defaults(task_id);
    try {
        const auto doc = json::parse(text);
        cfg.subject_id = doc.value("subject_id", cfg.subject_id);
        cfg.insert_count = doc.value("insert_count", cfg.insert_count);
        cfg.plate_capacity = doc.value("plate_capacity", cfg.plate_capacity);
        cfg.poll_period = doc.value("poll_period", cfg.poll_period);
        cfg.tail = doc.value("tail", cfg.tail);
        if (doc.contains("human")) {
            const auto& h = doc.at("human");
            const auto strategy = h.value("strategy", std::string("wait_then_reload"));
            if (strategy == "wait_then_reload") cfg.strategy = HumanStrategy::WaitThenReload;
            else if (strategy == "concurrent_reload") cfg.strategy = HumanStrategy::ConcurrentReload;
            else throw Error("bad-config", "unknown strategy '" + strategy + "'");
            cfg.load_latency = h.value("load_latency", cfg.load_latency);
            cfg.reload_delay = h.value("reload_delay", cfg.reload_delay);
            if (h.contains("region")) cfg.human_region = vec3(h.at("region"));
        }
        if (doc.contains("robot")) {
            const auto& r = doc.at("robot");
            cfg.robot = read_kinematics(r, cfg.robot);
            if (r.contains("home_deg")) cfg.home = joint_degrees(r.at("home_deg"));
            if (r.contains("pick_deg")) cfg.pick = joint_degrees(r.at("pick_deg"));
            if (r.contains("slot_step_deg")) cfg.slot_step = joint_degrees(r.at("slot_step_deg"));
            if (r.contains("place_deg")) cfg.place = joint_degrees(r.at("place_deg"));
            if (r.contains("planes_deg")) {
                cfg.planes.clear();
                for (const auto& plane : r.at("planes_deg")) {
                    std::vector<JointConfig> candidates;
                    for (const auto& q : plane) candidates.push_back(joint_degrees(q));
                    cfg.planes.push_back(std::move(candidates));
                }
            }
            cfg.v_max = r.value("v_max", cfg.v_max);
            cfg.accel_limits.normal = r.value("accel_normal", cfg.accel_limits.normal);
            cfg.accel_limits.high = r.value("accel_high", cfg.accel_limits.high);
        }
        if (doc.contains("compliance")) {
            const auto& c = doc.at("compliance");
            cfg.compliance_enabled = c.value("enabled", cfg.compliance_enabled);
            cfg.compliance.gsr_threshold = c.value("gsr_threshold", cfg.compliance.gsr_threshold);
            cfg.compliance.reduced_scale = c.value("reduced_scale", cfg.compliance.reduced_scale);
            cfg.compliance.window = c.value("window", cfg.compliance.window);
        }
        read_devices(doc, cfg.devices);
    } catch (const json::exception& e) {
        throw Error("bad-config", e.what());
    }
    if (!(cfg.v_max > 0) || cfg.v_max > kMaxJointSpeedDegPerSec) throw Error("bad-config", "v_max must be in (0, 100] deg/s");
    if (!(cfg.compliance.reduced_scale > 0) || cfg.compliance.reduced_scale > 1)
        throw Error("bad-config", "reduced_scale must be in (0, 1]");
    cfg.config_hash = config_hash(text);
    return cfg;
}

CaseTwoConfig parse_case2_config(std::string_view text) {
    CaseTwoConfig cfg = CaseTwoConfig::defaults();
    try {
        const auto doc = json::parse(text);
        cfg.subject_id = doc.value("subject_id", cfg.subject_id);
        cfg.product_count = doc.value("product_count", cfg.product_count);
        if (doc.contains("base_rotation_deg")) cfg.base_rotation = doc.at("base_rotation_deg").get<double>() * kDeg;
        cfg.tail = doc.value("tail", cfg.tail);
        if (doc.contains("ssm")) cfg.ssm = parse_ssm_config(doc.at("ssm").dump());
        if (doc.contains("human")) cfg.human = read_script(doc.at("human"));
        if (doc.contains("robot")) {
            const auto& r = doc.at("robot");
            cfg.robot = read_kinematics(r, cfg.robot);
            if (r.contains("pick_deg")) cfg.pick = joint_degrees(r.at("pick_deg"));
            cfg.v_max = r.value("v_max", cfg.v_max);
            cfg.a_max = r.value("a_max", cfg.a_max);
            cfg.dwell = r.value("dwell", cfg.dwell);
            cfg.inflation_radius = r.value("inflation_radius", cfg.inflation_radius);
        }
        if (doc.contains("zone_scale")) {
            const auto& z = doc.at("zone_scale");
            cfg.zone_scale[Zone::Normal] = z.value("normal", cfg.zone_scale[Zone::Normal]);
            cfg.zone_scale[Zone::Reduced] = z.value("reduced", cfg.zone_scale[Zone::Reduced]);
            cfg.zone_scale[Zone::Stop] = z.value("stop", cfg.zone_scale[Zone::Stop]);
        }
        read_devices(doc, cfg.devices);
    } catch (const json::exception& e) {
        throw Error("bad-config", e.what());
    }
    cfg.config_hash = config_hash(text);
    return cfg;
}

} // namespace syncrec
