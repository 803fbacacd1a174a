/**
 * @file digital_twin.hpp
 * @brief Virtual workspace: robot geometry from joint angles, human points
 *        from motion capture, separation metrics and the SSM zone machine.
 *
 * The robot is modelled as the polyline through its joint-frame origins
 * (standard Denavit-Hartenberg chaining); the human as a set of points.
 */
#pragma once

#include <Eigen/Geometry>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace syncrec {

/// Standard DH row: Rz(theta + theta_offset) Tz(d) Tx(a) Rx(alpha).
struct DhJoint {
    double a = 0;     ///< m
    double alpha = 0; ///< rad
    double d = 0;     ///< m
    double theta_offset = 0;
};

struct KinematicModel {
    std::vector<DhJoint> joints;
    Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
    /// Tool point in the last joint frame; appended to the chain when non-zero.
    Eigen::Vector3d tool_offset = Eigen::Vector3d::Zero();
};

/// Throws Error("bad-model") for an empty or non-finite model.
void validate(const KinematicModel& model);

/// Frame of every joint (base * T1 * ... * Ti), i = 1..n.
std::vector<Eigen::Isometry3d> joint_frames(const KinematicModel& model, std::span<const double> q);

/// Origins of joint frames 1..n, then the tool point if one is configured.
/// Throws Error("dof-mismatch") when q does not match the joint count.
std::vector<Eigen::Vector3d> forward_kinematics(const KinematicModel& model, std::span<const double> q);

struct Segment {
    Eigen::Vector3d a;
    Eigen::Vector3d b;
};

/// Polyline base origin -> joint origins -> tool point.
std::vector<Segment> robot_segments(const KinematicModel& model, std::span<const double> q);

/// Closest point to `p` on segment [a, b].
Eigen::Vector3d closest_point_on_segment(const Segment& s, const Eigen::Vector3d& p);

enum class Zone { Normal = 0, Reduced = 1, Stop = 2 };
std::string_view to_string(Zone zone);

struct SeparationState {
    double min_distance = 0;
    Eigen::Vector3d closest_robot_point = Eigen::Vector3d::Zero();
    Eigen::Vector3d closest_human_point = Eigen::Vector3d::Zero();
    double directed_speed = 0; ///< m/s, positive when approaching
    Zone zone = Zone::Normal;
    std::size_t segment_index = 0;
    std::size_t point_index = 0;
};

/// Exact minimum over all point-to-segment distances; the first (segment,
/// point) pair wins ties. `inflation_radius` treats segments as capsules.
/// Throws Error("empty-input").
SeparationState min_distance(std::span<const Segment> robot, std::span<const Eigen::Vector3d> human,
                             double inflation_radius = 0.0);

/// (prev.min_distance - curr.min_distance) / dt. Throws Error("bad-dt").
double directed_speed(const SeparationState& prev, const SeparationState& curr, double dt);

struct SsmConfig {
    double d_stop = 0.5;    ///< m
    double d_reduced = 1.0; ///< m
    double hysteresis = 0.05;
    bool use_dynamic = false;
    double v_h_gain = 0.0; ///< s; multiplies the approach speed
    double c_margin = 0.0; ///< m
};

/// Throws Error("bad-config") unless 0 < d_stop < d_reduced and hysteresis >= 0.
void validate(const SsmConfig& cfg);

struct Thresholds {
    double stop = 0;
    double reduced = 0;
};

Thresholds effective_thresholds(const SeparationState& sep, const SsmConfig& cfg);

struct SsmTransition {
    Zone zone = Zone::Normal;
    std::vector<std::string> markers;
};

/// Tightening is immediate; relaxing out of a zone needs the distance to
/// clear that zone's threshold by `hysteresis`. Each change emits
/// "Robot state change" plus the specific marker for the new state:
/// ->Stop "Robot is stopping", Normal->Reduced "Robot is slowing down",
/// ->Normal "Robot is speeding up". Stop->Reduced has no specific marker.
SsmTransition ssm_step(Zone zone, const SeparationState& sep, const SsmConfig& cfg);

/// JSON documents, see docs/config.md. Throw Error("bad-config").
KinematicModel parse_kinematic_model(std::string_view json);
SsmConfig parse_ssm_config(std::string_view json);

} // namespace syncrec
