/**
 * @file orchestrator.hpp
 * @brief Scripted Case I / Case II experiments on simulated devices.
 *
 * A run is a single control loop over scenario time with a 10 ms tick.
 * Devices are separate producer sessions; the orchestrator's own markers
 * go to the hub. With InProcessBackend the whole run is simulated and
 * deterministic; NetworkBackend paces it in real time against a live hub.
 */
#pragma once

#include "syncrec/digital_twin.hpp"
#include "syncrec/recorder.hpp"
#include "syncrec/sim_devices.hpp"
#include "syncrec/sim_network.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace syncrec {

/// Where a scenario's producers and markers go.
class ExperimentBackend {
public:
    virtual ~ExperimentBackend() = default;

    virtual std::unique_ptr<ProducerLink> open_producer(const std::string& source_id, const ClockModel& clock,
                                                        std::uint64_t seed) = 0;
    /// Orchestrator marker at scenario time t.
    virtual void marker(std::string_view label, MarkerOrigin origin, double t) = 0;
    /// Called with non-decreasing t before anything happens at t.
    virtual void advance_to(double t) = 0;
    virtual void finish(const Metadata& metadata) = 0;
};

/// Private hub plus recorder; simulated time, no sleeping.
class InProcessBackend final : public ExperimentBackend {
public:
    /// Records to `path`, or to memory when empty.
    explicit InProcessBackend(std::optional<std::filesystem::path> path = std::nullopt, DelayModel delays = {0.0005, 0.003});
    ~InProcessBackend() override;

    std::unique_ptr<ProducerLink> open_producer(const std::string& source_id, const ClockModel& clock,
                                                std::uint64_t seed) override;
    void marker(std::string_view label, MarkerOrigin origin, double t) override;
    void advance_to(double t) override;
    void finish(const Metadata& metadata) override;

    Hub& hub() { return hub_; }
    /// The finished recording (read back from disk in file mode).
    Recording recording() const;
    const std::optional<std::filesystem::path>& path() const { return path_; }

private:
    void drain();

    SimClock clock_;
    Hub hub_;
    std::shared_ptr<Subscription> subscription_;
    std::optional<std::filesystem::path> path_;
    std::unique_ptr<RecordingWriter> writer_;
    DelayModel delays_;
};

/// Live hub over TCP, paced against the steady clock.
class NetworkBackend final : public ExperimentBackend {
public:
    explicit NetworkBackend(net::Endpoint hub, std::string controller_id = "orchestrator");
    ~NetworkBackend() override;

    std::unique_ptr<ProducerLink> open_producer(const std::string& source_id, const ClockModel& clock,
                                                std::uint64_t seed) override;
    void marker(std::string_view label, MarkerOrigin origin, double t) override;
    void advance_to(double t) override;
    void finish(const Metadata& metadata) override;

private:
    net::Endpoint endpoint_;
    double origin_;
    std::unique_ptr<NetworkProducer> controller_;
    double next_sync_ = 0.0;
};

struct PhysioConfig {
    double gsr_tonic = 2.0;  ///< uS
    double heart_rate = 72;  ///< bpm
    double scr_magnitude = 0.6;
    double scr_latency = 1.5; ///< s from stimulus to response onset
};

struct DeviceSetup {
    DeviceRates rates;
    double robot_rate = 100.0; ///< also the control tick
    /// Clock model per source id; missing sources run on the hub clock.
    std::map<std::string, ClockModel> clocks;
    PhysioConfig physio;
    std::uint64_t seed = 1;

    static DeviceSetup defaults();
};

/// Summary of one stream inside a feature window.
struct StreamSummary {
    double first = 0;
    double min = 0;
    double max = 0;
    double mean = 0;
    /// max - first: rise above the value at the window start.
    double phasic_amplitude = 0;
    std::size_t count = 0;
};

using ComplianceFeatures = std::map<std::string, StreamSummary>;

struct ComplianceRule {
    double gsr_threshold = 0.3; ///< uS
    double reduced_scale = 0.5;
    double window = 3.0; ///< s after "Robot approaching"
};

/// Default rule: reduced_scale when the GSR rise exceeds the threshold,
/// otherwise 1.0. Always in (0, 1].
double compliance_hook(const ComplianceFeatures& features, const ComplianceRule& rule = {});

using ComplianceHook = std::function<double(const ComplianceFeatures&)>;

enum class PlateState { Empty, Loaded };
/// Loaded iff the master pin holds an insert.
PlateState master_pin_poll(int inserts_on_plate);

enum class HumanStrategy { WaitThenReload, ConcurrentReload };

struct MarkerLogEntry {
    double t = 0; ///< scenario time
    std::string label;
    bool operator==(const MarkerLogEntry&) const = default;
};

/// Case I: the robot unloads inserts the (simulated) subject loads.
/// The acceleration/trajectory pair is fixed by the task id.
class CaseOneConfig {
public:
    /// Throws Error("bad-task", "task must be 1..4").
    explicit CaseOneConfig(int task_id);

    int task_id() const { return task_id_; }
    AccelMode acceleration() const { return accel_; }
    TrajectoryMode trajectory() const { return trajectory_; }

    int insert_count = 8;
    int plate_capacity = 0; ///< 0 means insert_count
    double poll_period = 5.0;
    std::string subject_id = "S00";

    HumanStrategy strategy = HumanStrategy::WaitThenReload;
    double load_latency = 12.0;  ///< s until the subject has loaded the plate
    double reload_delay = 4.0;   ///< s per insert under ConcurrentReload

    KinematicModel robot;
    JointConfig home;             ///< rad
    JointConfig pick;             ///< first slot, rad
    JointConfig slot_step;        ///< added per slot, rad
    JointConfig place;            ///< rad
    std::vector<std::vector<JointConfig>> planes; ///< Random-mode candidates, pick -> place order
    Eigen::Vector3d human_region = Eigen::Vector3d(1.1, -0.2, 0.2);
    double v_max = kMaxJointSpeedDegPerSec;
    AccelLimits accel_limits;

    bool compliance_enabled = false;
    ComplianceRule compliance;
    ComplianceHook hook; ///< overrides the default rule when set

    DeviceSetup devices = DeviceSetup::defaults();
    double tail = 2.0; ///< s recorded after "Experiment end"
    double timeout = 1800.0;
    std::string config_hash; ///< of the scenario file; "builtin" when empty

    static CaseOneConfig defaults(int task_id);

private:
    int task_id_;
    AccelMode accel_;
    TrajectoryMode trajectory_;
};

struct MotionRecord {
    double start = 0;
    double end = 0;
    double speed_scale = 1.0;
    bool approaching = false;
    double peak_speed = 0; ///< deg/s, fastest joint
};

struct CaseOneResult {
    AccelMode acceleration = AccelMode::Normal;
    TrajectoryMode trajectory = TrajectoryMode::Fixed;
    std::vector<MarkerLogEntry> markers;
    std::vector<double> poll_times;
    std::vector<MotionRecord> motions;
    double max_joint_speed = 0; ///< deg/s over every emitted robot sample
    std::size_t approach_count = 0;
    double duration = 0;
};

CaseOneResult run_case1(const CaseOneConfig& cfg, ExperimentBackend& backend);

/// Case II: pick-and-place with a base rotation while the digital twin
/// watches the separation to a moving human.
struct CaseTwoConfig {
    int product_count = 10;
    double base_rotation = 3.14159265358979323846;
    SsmConfig ssm;
    MocapScript human;
    std::string subject_id = "S00";

    KinematicModel robot;
    JointConfig pick; ///< rad; place is pick with the base rotated
    double v_max = 90.0;  ///< deg/s
    double a_max = 150.0; ///< deg/s^2
    double dwell = 0.5;   ///< s at each pick and place
    double inflation_radius = 0.0;
    std::map<Zone, double> zone_scale = {{Zone::Normal, 1.0}, {Zone::Reduced, 0.5}, {Zone::Stop, 0.0}};

    DeviceSetup devices = DeviceSetup::defaults();
    double tail = 2.0;
    double timeout = 1800.0;
    std::string config_hash;

    static CaseTwoConfig defaults();
    /// Human standing well outside the reduced-speed distance.
    static MocapScript far_human();
    /// Human walking up to the robot, pausing inside the stop distance, leaving.
    static MocapScript crossing_human();
};

struct CaseTwoResult {
    std::vector<MarkerLogEntry> markers;
    std::vector<double> place_times;
    double duration = 0; ///< first pick to last place
    double min_separation = 0;
    std::size_t twin_steps = 0;
    /// Twin steps with d < effective D_stop but zone != Stop (must be 0).
    std::size_t stop_violations = 0;
};

CaseTwoResult run_case2(const CaseTwoConfig& cfg, ExperimentBackend& backend);

/// Stand-alone device session for `syncrec sim`; runs until `duration`
/// (or forever when <= 0) or until `stop` returns true.
enum class DeviceKind { Gsr, Ppg, Ecg, Mocap, Robot };
DeviceKind device_kind_from_string(std::string_view name);
void run_device(DeviceKind kind, ExperimentBackend& backend, double rate, std::uint64_t seed, double duration,
                const std::function<bool()>& stop = {});

/// Scenario files (docs/config.md). Throw Error("bad-config").
CaseOneConfig parse_case1_config(std::string_view json, int task_id);
CaseTwoConfig parse_case2_config(std::string_view json);

/// FNV-1a of the text, as 16 hex digits.
std::string config_hash(std::string_view text);

} // namespace syncrec
