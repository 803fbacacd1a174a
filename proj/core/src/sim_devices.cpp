#include "syncrec/sim_devices.hpp"

#include "syncrec/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace syncrec {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

void check_dof(const JointConfig& reference, const JointConfig& other) {
    if (other.size() != reference.size())
        throw Error("dof-mismatch", "joint configuration has " + std::to_string(other.size()) + " values, expected " +
                                        std::to_string(reference.size()));
}

void validate_plan(const TrajectoryPlan& plan) {
    if (plan.waypoints.empty()) throw Error("bad-plan", "plan has no waypoints");
    for (const auto& w : plan.waypoints) check_dof(plan.waypoints.front(), w);
    if (!(plan.v_max > 0.0) || plan.v_max > kMaxJointSpeedDegPerSec)
        throw Error("bad-plan", "v_max must be in (0, 100] deg/s");
    const std::size_t segments = plan.waypoints.size() - 1;
    if (!plan.segment_a_max.empty() && plan.segment_a_max.size() != segments)
        throw Error("bad-plan", "segment_a_max needs one entry per segment");
    for (std::size_t i = 0; i < segments; ++i)
        if (!(plan.accel_for(i) > 0.0) || !std::isfinite(plan.accel_for(i)))
            throw Error("bad-plan", "a_max must be positive");
}

double max_excursion(const JointConfig& a, const JointConfig& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) d = std::max(d, std::abs(b[j] - a[j]));
    return d;
}

} // namespace

std::string_view to_string(TrajectoryMode mode) { return mode == TrajectoryMode::Fixed ? "Fixed" : "Random"; }

std::string_view to_string(AccelMode mode) {
    switch (mode) {
    case AccelMode::Normal: return "Normal";
    case AccelMode::High: return "High";
    case AccelMode::Random: return "Random";
    }
    return "Normal";
}

double TrajectoryPlan::accel_for(std::size_t segment) const {
    return segment_a_max.empty() ? a_max : segment_a_max.at(segment);
}

TrajectoryPlan plan_trajectory(const JointConfig& pick, const JointConfig& place,
                               const std::vector<std::vector<JointConfig>>& planes, TrajectoryMode mode,
                               std::uint64_t seed) {
    check_dof(pick, place);
    TrajectoryPlan plan;
    plan.mode = mode;
    plan.waypoints.push_back(pick);
    if (mode == TrajectoryMode::Random) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < planes.size(); ++i) {
            const auto& plane = planes[i];
            if (plane.empty()) throw Error("empty-plane", "plane " + std::to_string(i) + " has no candidates");
            std::uniform_int_distribution<std::size_t> pick_index(0, plane.size() - 1);
            const auto& w = plane[pick_index(rng)];
            check_dof(pick, w);
            plan.waypoints.push_back(w);
        }
    }
    plan.waypoints.push_back(place);
    return plan;
}

void assign_acceleration(TrajectoryPlan& plan, AccelMode mode, const AccelLimits& limits, std::uint64_t seed) {
    const std::size_t segments = plan.waypoints.empty() ? 0 : plan.waypoints.size() - 1;
    plan.segment_a_max.assign(segments, mode == AccelMode::High ? limits.high : limits.normal);
    plan.a_max = plan.segment_a_max.empty() ? limits.normal : plan.segment_a_max.front();
    if (mode != AccelMode::Random) return;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> draw(limits.normal, limits.high);
    for (auto& a : plan.segment_a_max) a = draw(rng);
}

SegmentProfile::SegmentProfile(double distance, double v_max, double a_max)
    : distance_(distance), accel_(a_max), peak_(0), t_accel_(0), t_cruise_(0), duration_(0) {
    if (!(distance_ > 0.0)) return;
    if (distance_ >= v_max * v_max / a_max) {
        peak_ = v_max;
        t_accel_ = v_max / a_max;
        t_cruise_ = (distance_ - v_max * v_max / a_max) / v_max;
    } else {
        peak_ = std::sqrt(distance_ * a_max);
        t_accel_ = peak_ / a_max;
    }
    duration_ = 2 * t_accel_ + t_cruise_;
}

std::pair<double, double> SegmentProfile::at(double t) const {
    if (duration_ == 0.0) return {1.0, 0.0};
    double p = 0, v = 0;
    if (t <= 0) {
        p = 0;
        v = 0;
    } else if (t < t_accel_) {
        p = 0.5 * accel_ * t * t;
        v = accel_ * t;
    } else if (t < t_accel_ + t_cruise_) {
        p = 0.5 * accel_ * t_accel_ * t_accel_ + peak_ * (t - t_accel_);
        v = peak_;
    } else if (t < duration_) {
        const double tau = duration_ - t;
        p = distance_ - 0.5 * accel_ * tau * tau;
        v = accel_ * tau;
    } else {
        p = distance_;
        v = 0;
    }
    return {p / distance_, v / distance_};
}

std::vector<ProfileSample> execute_profile(const TrajectoryPlan& plan, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error("bad-dt", "dt must be positive");
    validate_plan(plan);

    std::vector<ProfileSample> out;
    double t0 = 0.0;
    for (std::size_t i = 0; i + 1 < plan.waypoints.size(); ++i) {
        const auto& from = plan.waypoints[i];
        const auto& to = plan.waypoints[i + 1];
        const double excursion = max_excursion(from, to);
        const SegmentProfile profile(excursion * kDegPerRad, plan.v_max, plan.accel_for(i));
        const double duration = profile.duration();
        if (duration == 0.0) continue;

        auto emit = [&](double local_t) {
            const auto [s, sd] = profile.at(local_t);
            ProfileSample sample{t0 + local_t, JointConfig(from.size()), JointConfig(from.size())};
            for (std::size_t j = 0; j < from.size(); ++j) {
                const double delta = to[j] - from[j];
                sample.q[j] = local_t >= duration ? to[j] : from[j] + delta * s;
                sample.qd[j] = delta * sd;
            }
            out.push_back(std::move(sample));
        };
        for (std::size_t k = 1;; ++k) {
            const double local_t = static_cast<double>(k) * dt;
            if (local_t >= duration - 1e-9) break;
            emit(local_t);
        }
        emit(duration);
        t0 += duration;
    }
    return out;
}

double profile_duration(const TrajectoryPlan& plan) {
    validate_plan(plan);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < plan.waypoints.size(); ++i) {
        const double excursion = max_excursion(plan.waypoints[i], plan.waypoints[i + 1]);
        total += SegmentProfile(excursion * kDegPerRad, plan.v_max, plan.accel_for(i)).duration();
    }
    return total;
}

double gen_gsr(double t, double tonic, std::span<const StimulusEvent> events) {
    double value = tonic;
    for (const auto& e : events) {
        if (e.at > t) continue;
        const double dt = t - e.at;
        value += e.magnitude * (std::exp(-dt / kScrTau1) - std::exp(-dt / kScrTau2));
    }
    return std::max(value, 0.0);
}

double scr_peak_delay() { return kScrTau1 * kScrTau2 / (kScrTau1 - kScrTau2) * std::log(kScrTau1 / kScrTau2); }

double gen_ppg(double t, double hr) {
    if (!(hr > 0.0)) throw Error("bad-rate", "heart rate must be positive");
    const double period = 60.0 / hr;
    const double x = t - period * std::round(t / period);
    const double width = 0.3 * period;
    if (std::abs(x) >= width / 2) return 0.0;
    return 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * x / width));
}

const std::array<EcgWave, 5>& ecg_waves() {
    static const std::array<EcgWave, 5> waves{{
        {-0.20, 0.15, 0.025},
        {-0.03, -0.15, 0.010},
        {0.00, 1.00, 0.012},
        {0.03, -0.25, 0.010},
        {0.30, 0.30, 0.040},
    }};
    return waves;
}

double gen_ecg(double t, double hr) {
    if (!(hr > 0.0)) throw Error("bad-rate", "heart rate must be positive");
    const double period = 60.0 / hr;
    const double x = t - period * std::round(t / period);
    double value = 0.0;
    for (int k = -1; k <= 1; ++k) {
        for (const auto& w : ecg_waves()) {
            const double u = x - k * period - w.position * period;
            const double sigma = w.width * period;
            value += w.amplitude * std::exp(-u * u / (2 * sigma * sigma));
        }
    }
    return value;
}

double arrival_time(const MocapSegment& seg) { return seg.start + (seg.to - seg.from).norm() / seg.speed; }

void validate(const MocapScript& script) {
    if (script.empty()) throw Error("bad-script", "mocap script is empty");
    for (std::size_t i = 0; i < script.size(); ++i) {
        const auto& s = script[i];
        if (!std::isfinite(s.start) || !s.from.allFinite() || !s.to.allFinite())
            throw Error("bad-script", "segment " + std::to_string(i) + " is not finite");
        if (!(s.speed > 0.0) || !std::isfinite(s.speed))
            throw Error("bad-script", "segment " + std::to_string(i) + " needs a positive speed");
        if (i == 0) continue;
        const auto& prev = script[i - 1];
        if ((s.from - prev.to).norm() > 1e-9)
            throw Error("bad-script", "segment " + std::to_string(i) + " does not start where the previous one ends");
        if (s.start < arrival_time(prev) - 1e-9)
            throw Error("bad-script", "segment " + std::to_string(i) + " starts before the previous one arrives");
    }
}

Eigen::Vector3d mocap_reference(double t, const MocapScript& script) {
    validate(script);
    if (t <= script.front().start) return script.front().from;
    auto it = std::upper_bound(script.begin(), script.end(), t,
                               [](double value, const MocapSegment& s) { return value < s.start; });
    const auto& seg = *std::prev(it);
    const double arrive = arrival_time(seg);
    if (t >= arrive || arrive == seg.start) return seg.to;
    return seg.from + (seg.to - seg.from) * ((t - seg.start) / (arrive - seg.start));
}

std::vector<LabeledPoint> gen_mocap(double t, const MocapScript& script) {
    const Eigen::Vector3d torso = mocap_reference(t, script);
    return {
        {"torso", torso},
        {"head", torso + Eigen::Vector3d(0, 0, 0.3)},
        {"left_hand", torso + Eigen::Vector3d(0, 0.3, 0)},
        {"right_hand", torso + Eigen::Vector3d(0, -0.3, 0)},
    };
}

namespace {

StreamInfo scalar_stream(std::string name, const std::string& source_id, double rate, std::string unit) {
    StreamInfo info;
    info.name = name;
    info.source_id = source_id;
    info.channel_count = 1;
    info.nominal_rate_hz = rate;
    info.channel_labels = {std::move(name)};
    info.units = {std::move(unit)};
    return info;
}

} // namespace

StreamInfo gsr_stream_info(const std::string& source_id, double rate) {
    return scalar_stream("gsr", source_id, rate, "uS");
}

StreamInfo ppg_stream_info(const std::string& source_id, double rate) {
    return scalar_stream("ppg", source_id, rate, "a.u.");
}

StreamInfo ecg_stream_info(const std::string& source_id, double rate) {
    return scalar_stream("ecg", source_id, rate, "mV");
}

StreamInfo mocap_stream_info(const std::string& source_id, double rate) {
    StreamInfo info;
    info.name = "mocap";
    info.source_id = source_id;
    info.nominal_rate_hz = rate;
    for (const char* point : {"torso", "head", "left_hand", "right_hand"}) {
        for (const char* axis : {"x", "y", "z"}) {
            info.channel_labels.push_back(std::string(point) + "_" + axis);
            info.units.emplace_back("m");
        }
    }
    info.channel_count = static_cast<std::uint32_t>(info.channel_labels.size());
    return info;
}

StreamInfo robot_stream_info(const std::string& source_id, double rate, std::size_t dof) {
    StreamInfo info;
    info.name = "joints";
    info.source_id = source_id;
    info.nominal_rate_hz = rate;
    for (std::size_t j = 1; j <= dof; ++j) {
        info.channel_labels.push_back("q" + std::to_string(j));
        info.units.emplace_back("deg");
    }
    for (std::size_t j = 1; j <= dof; ++j) {
        info.channel_labels.push_back("qd" + std::to_string(j));
        info.units.emplace_back("deg/s");
    }
    info.channel_count = static_cast<std::uint32_t>(info.channel_labels.size());
    return info;
}

} // namespace syncrec
