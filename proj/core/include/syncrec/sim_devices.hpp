/**
 * @file sim_devices.hpp
 * @brief Seeded stand-ins for the sensors and the robot arm.
 *
 * All generators are pure functions of their arguments. Joint angles are
 * in radians; speed and acceleration limits are given in deg/s and deg/s^2.
 */
#pragma once

#include "syncrec/stream_model.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace syncrec {

using JointConfig = std::vector<double>;

inline constexpr double kMaxJointSpeedDegPerSec = 100.0;

enum class TrajectoryMode { Fixed, Random };
enum class AccelMode { Normal, High, Random };

std::string_view to_string(TrajectoryMode mode);
std::string_view to_string(AccelMode mode);

struct AccelLimits {
    double normal = 150.0; ///< deg/s^2
    double high = 600.0;   ///< deg/s^2
};

struct TrajectoryPlan {
    std::vector<JointConfig> waypoints;
    double v_max = kMaxJointSpeedDegPerSec; ///< deg/s
    double a_max = AccelLimits{}.normal;    ///< deg/s^2, used when segment_a_max is empty
    std::vector<double> segment_a_max;      ///< optional per-segment override
    TrajectoryMode mode = TrajectoryMode::Fixed;

    double accel_for(std::size_t segment) const;
};

/// Fixed: [pick, place]. Random: [pick, one uniformly drawn candidate per
/// plane, place]. Throws Error("empty-plane") or Error("dof-mismatch").
TrajectoryPlan plan_trajectory(const JointConfig& pick, const JointConfig& place,
                               const std::vector<std::vector<JointConfig>>& planes, TrajectoryMode mode,
                               std::uint64_t seed);

/// Fills segment_a_max: Normal/High use the fixed limits, Random draws each
/// segment uniformly from [normal, high].
void assign_acceleration(TrajectoryPlan& plan, AccelMode mode, const AccelLimits& limits, std::uint64_t seed);

/// Time-optimal rest-to-rest profile along one straight joint-space segment.
/// Trapezoidal, or triangular when the cruise speed is never reached.
class SegmentProfile {
public:
    /// `distance` in the same unit as `v_max`/`a_max`.
    SegmentProfile(double distance, double v_max, double a_max);

    double duration() const { return duration_; }
    double peak_speed() const { return peak_; }
    /// Travelled fraction s in [0, 1] and its rate ds/dt at time t (clamped).
    std::pair<double, double> at(double t) const;

private:
    double distance_;
    double accel_;
    double peak_;
    double t_accel_;
    double t_cruise_;
    double duration_;
};

struct ProfileSample {
    double t = 0;
    JointConfig q;  ///< rad
    JointConfig qd; ///< rad/s
};

/// Synchronised profile through every waypoint: the joint with the largest
/// excursion moves at (v_max, a_max) and the rest scale along. Each segment
/// emits samples at k*dt after its start plus its exact end point; t = 0 is
/// not emitted. Throws Error("bad-dt"), Error("bad-plan").
std::vector<ProfileSample> execute_profile(const TrajectoryPlan& plan, double dt);

/// Total duration of execute_profile(plan, .) without sampling.
double profile_duration(const TrajectoryPlan& plan);

struct StimulusEvent {
    double at = 0;        ///< s
    double magnitude = 0; ///< >= 0
};

inline constexpr double kScrTau1 = 10.0;
inline constexpr double kScrTau2 = 1.0;

/// tonic + sum of bi-exponential skin conductance responses, in microsiemens.
double gen_gsr(double t, double tonic, std::span<const StimulusEvent> events);
/// Time of the maximum of a single response after its onset.
double scr_peak_delay();

/// Raised-cosine pulse of width 0.3 * period, peaks at k * 60 / hr.
double gen_ppg(double t, double hr);

struct EcgWave {
    double position;  ///< fraction of the period relative to the R peak
    double amplitude; ///< mV
    double width;     ///< fraction of the period (Gaussian sigma)
};
/// P, Q, R, S, T.
const std::array<EcgWave, 5>& ecg_waves();
double gen_ecg(double t, double hr);

struct MocapSegment {
    double start = 0; ///< s
    Eigen::Vector3d from = Eigen::Vector3d::Zero();
    Eigen::Vector3d to = Eigen::Vector3d::Zero();
    double speed = 1.0; ///< m/s
};
using MocapScript = std::vector<MocapSegment>;

/// Throws Error("bad-script") for an empty script, a gap in position, a
/// segment starting before the previous one arrives, or a non-positive speed.
void validate(const MocapScript& script);
/// Arrival time of segment i.
double arrival_time(const MocapSegment& seg);

struct LabeledPoint {
    std::string name;
    Eigen::Vector3d position;
};

/// Torso follows the script; head and hands sit at fixed offsets from it.
std::vector<LabeledPoint> gen_mocap(double t, const MocapScript& script);
/// Torso position only.
Eigen::Vector3d mocap_reference(double t, const MocapScript& script);

struct DeviceRates {
    double gsr = 32.0;
    double ppg = 64.0;
    double ecg = 256.0;
    double mocap = 100.0;
};

StreamInfo gsr_stream_info(const std::string& source_id, double rate);
StreamInfo ppg_stream_info(const std::string& source_id, double rate);
StreamInfo ecg_stream_info(const std::string& source_id, double rate);
StreamInfo mocap_stream_info(const std::string& source_id, double rate);
/// Joint angles (deg) then joint speeds (deg/s) for `dof` joints.
StreamInfo robot_stream_info(const std::string& source_id, double rate, std::size_t dof);

} // namespace syncrec
