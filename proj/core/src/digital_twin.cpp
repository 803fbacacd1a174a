#include "syncrec/digital_twin.hpp"

#include "syncrec/error.hpp"
#include "syncrec/stream_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

namespace syncrec {

namespace {

Eigen::Isometry3d dh_transform(const DhJoint& j, double q) {
    const double theta = q + j.theta_offset;
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.rotate(Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitZ()));
    t.translate(Eigen::Vector3d(0, 0, j.d));
    t.translate(Eigen::Vector3d(j.a, 0, 0));
    t.rotate(Eigen::AngleAxisd(j.alpha, Eigen::Vector3d::UnitX()));
    return t;
}

bool finite(const DhJoint& j) {
    return std::isfinite(j.a) && std::isfinite(j.alpha) && std::isfinite(j.d) && std::isfinite(j.theta_offset);
}

} // namespace

void validate(const KinematicModel& model) {
    if (model.joints.empty()) throw Error("bad-model", "kinematic model has no joints");
    if (!std::all_of(model.joints.begin(), model.joints.end(), finite))
        throw Error("bad-model", "non-finite DH parameter");
    if (!model.base.matrix().allFinite() || !model.tool_offset.allFinite())
        throw Error("bad-model", "non-finite base pose or tool offset");
}

std::vector<Eigen::Isometry3d> joint_frames(const KinematicModel& model, std::span<const double> q) {
    if (q.size() != model.joints.size())
        throw Error("dof-mismatch", "got " + std::to_string(q.size()) + " joint values for " +
                                        std::to_string(model.joints.size()) + " joints");
    std::vector<Eigen::Isometry3d> frames;
    frames.reserve(q.size());
    Eigen::Isometry3d t = model.base;
    for (std::size_t i = 0; i < q.size(); ++i) {
        t = t * dh_transform(model.joints[i], q[i]);
        frames.push_back(t);
    }
    return frames;
}

std::vector<Eigen::Vector3d> forward_kinematics(const KinematicModel& model, std::span<const double> q) {
    const auto frames = joint_frames(model, q);
    std::vector<Eigen::Vector3d> points;
    points.reserve(frames.size() + 1);
    for (const auto& f : frames) points.push_back(f.translation());
    if (!model.tool_offset.isZero(0.0)) points.push_back(frames.back() * model.tool_offset);
    return points;
}

std::vector<Segment> robot_segments(const KinematicModel& model, std::span<const double> q) {
    const auto points = forward_kinematics(model, q);
    std::vector<Segment> segments;
    Eigen::Vector3d previous = model.base.translation();
    for (const auto& p : points) {
        segments.push_back({previous, p});
        previous = p;
    }
    return segments;
}

Eigen::Vector3d closest_point_on_segment(const Segment& s, const Eigen::Vector3d& p) {
    const Eigen::Vector3d ab = s.b - s.a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return s.a;
    const double u = std::clamp((p - s.a).dot(ab) / len2, 0.0, 1.0);
    return s.a + u * ab;
}

std::string_view to_string(Zone zone) {
    switch (zone) {
    case Zone::Normal: return "Normal";
    case Zone::Reduced: return "Reduced";
    case Zone::Stop: return "Stop";
    }
    return "Normal";
}

SeparationState min_distance(std::span<const Segment> robot, std::span<const Eigen::Vector3d> human,
                             double inflation_radius) {
    if (robot.empty() || human.empty()) throw Error("empty-input", "min_distance needs robot segments and human points");
    SeparationState best;
    best.min_distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < robot.size(); ++i) {
        for (std::size_t j = 0; j < human.size(); ++j) {
            const Eigen::Vector3d c = closest_point_on_segment(robot[i], human[j]);
            const double d = (c - human[j]).norm();
            if (d < best.min_distance) {
                best.min_distance = d;
                best.closest_robot_point = c;
                best.closest_human_point = human[j];
                best.segment_index = i;
                best.point_index = j;
            }
        }
    }
    if (inflation_radius > 0.0) {
        if (best.min_distance > inflation_radius) {
            const Eigen::Vector3d dir = (best.closest_human_point - best.closest_robot_point) / best.min_distance;
            best.closest_robot_point += inflation_radius * dir;
            best.min_distance = (best.closest_human_point - best.closest_robot_point).norm();
        } else {
            best.closest_robot_point = best.closest_human_point;
            best.min_distance = 0.0;
        }
    }
    return best;
}

double directed_speed(const SeparationState& prev, const SeparationState& curr, double dt) {
    if (!(dt > 0.0)) throw Error("bad-dt", "dt must be positive");
    return (prev.min_distance - curr.min_distance) / dt;
}

void validate(const SsmConfig& cfg) {
    if (!(cfg.d_stop > 0.0) || !(cfg.d_stop < cfg.d_reduced))
        throw Error("bad-config", "SSM thresholds must satisfy 0 < d_stop < d_reduced");
    if (!(cfg.hysteresis >= 0.0)) throw Error("bad-config", "hysteresis must be non-negative");
    if (cfg.use_dynamic && (!(cfg.v_h_gain >= 0.0) || !std::isfinite(cfg.c_margin)))
        throw Error("bad-config", "dynamic term needs a non-negative gain and finite margin");
}

Thresholds effective_thresholds(const SeparationState& sep, const SsmConfig& cfg) {
    double extra = 0.0;
    if (cfg.use_dynamic) extra = cfg.v_h_gain * std::max(sep.directed_speed, 0.0) + cfg.c_margin;
    return {cfg.d_stop + extra, cfg.d_reduced + extra};
}

SsmTransition ssm_step(Zone zone, const SeparationState& sep, const SsmConfig& cfg) {
    const auto th = effective_thresholds(sep, cfg);
    const double d = sep.min_distance;
    const int raw = d < th.stop ? 2 : (d < th.reduced ? 1 : 0);
    const int current = static_cast<int>(zone);
    int next = current;
    if (raw >= current) {
        next = raw;
    } else {
        auto threshold = [&](int level) { return level == 2 ? th.stop : th.reduced; };
        while (next > raw && d > threshold(next) + cfg.hysteresis) --next;
    }

    SsmTransition out{static_cast<Zone>(next), {}};
    if (next == current) return out;
    out.markers.emplace_back(labels::kRobotStateChange);
    if (next == 2) out.markers.emplace_back(labels::kRobotStopping);
    else if (next == 0) out.markers.emplace_back(labels::kRobotSpeedingUp);
    else if (current == 0) out.markers.emplace_back(labels::kRobotSlowingDown);
    return out;
}

namespace {

Eigen::Vector3d vec3(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3) throw Error("bad-config", "expected a 3-vector");
    return {v[0], v[1], v[2]};
}

} // namespace

KinematicModel parse_kinematic_model(std::string_view json) {
    try {
        const auto doc = nlohmann::json::parse(json);
        KinematicModel model;
        for (const auto& row : doc.at("joints")) {
            DhJoint j;
            j.a = row.value("a", 0.0);
            j.alpha = row.value("alpha", 0.0);
            j.d = row.value("d", 0.0);
            j.theta_offset = row.value("theta_offset", 0.0);
            model.joints.push_back(j);
        }
        if (doc.contains("base_position")) model.base.translation() = vec3(doc.at("base_position"));
        if (doc.contains("base_yaw"))
            model.base.linear() =
                Eigen::AngleAxisd(doc.at("base_yaw").get<double>(), Eigen::Vector3d::UnitZ()).toRotationMatrix();
        if (doc.contains("tool_offset")) model.tool_offset = vec3(doc.at("tool_offset"));
        validate(model);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad-config", e.what());
    } catch (const Error& e) {
        throw Error("bad-config", e.what());
    }
}

SsmConfig parse_ssm_config(std::string_view json) {
    try {
        const auto doc = nlohmann::json::parse(json);
        SsmConfig cfg;
        cfg.d_stop = doc.value("d_stop", cfg.d_stop);
        cfg.d_reduced = doc.value("d_reduced", cfg.d_reduced);
        cfg.hysteresis = doc.value("hysteresis", cfg.hysteresis);
        cfg.use_dynamic = doc.value("use_dynamic", cfg.use_dynamic);
        cfg.v_h_gain = doc.value("v_h_gain", cfg.v_h_gain);
        cfg.c_margin = doc.value("c_margin", cfg.c_margin);
        validate(cfg);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw Error("bad-config", e.what());
    }
}

} // namespace syncrec
