#pragma once

// Relative planar pose from a downward-looking flow camera: analytic flow
// over a ground plane, gyro unrotation, gating, and dead-reckoning.
//
// Body frame: x forward, y left, z up. The flow camera looks down with its
// x axis along body x and its y axis along body -y.

#include "rhc/common.hpp"
#include "rhc/sim_world.hpp"

#include <cstdint>
#include <vector>

namespace rhc {

struct FlowGridConfig {
  int grid{5};               // grid x grid tracked points around the image centre
  double spacing_px{16.0};
};

struct FlowNoiseConfig {
  double sigma_px{0.2};
  double p_out{0.05};            // probability a vector is replaced by an outlier
  double outlier_sigma_px{1.5};  // outliers: true flow plus N(0, outlier_sigma) per axis
};

struct BodyMotion {
  Vec2 velocity{0.0, 0.0};           // m/s, body frame
  Vec3 angular_velocity{0.0, 0.0, 0.0};  // roll, pitch, yaw rates (rad/s)
};

struct FlowSample {
  std::vector<Vec2> points;  // pixel offsets from the principal point (camera x, y)
  std::vector<Vec2> flow;    // pixels per frame
  double timestamp{0.0};
  double rate{100.0};        // frames per second
};

/// First-order image motion of ground points seen from `altitude`, over one frame.
FlowSample simulate_flow(const BodyMotion& motion, double altitude, const CameraModel& camera,
                         const FlowGridConfig& grid, const FlowNoiseConfig& noise, double rate, std::uint64_t seed,
                         double timestamp);

struct ImuConfig {
  double rate{200.0};
  double noise_sigma{0.005};  // rad/s per axis
  double bias{0.01};          // rad/s per axis, sign drawn from the seed
};

struct ImuReading {
  double timestamp{0.0};
  Vec3 angular_velocity{0.0, 0.0, 0.0};
};

ImuReading simulate_imu(const Vec3& true_rates, double timestamp, const ImuConfig& config, std::uint64_t seed);

/// Reading closest in time (earlier on ties). Throws on an empty list.
const ImuReading& nearest_reading(const std::vector<ImuReading>& readings, double t);

/// Removes the rotation-induced flow predicted from the gyro rates.
FlowSample unrotate(const FlowSample& flow, const ImuReading& imu, const CameraModel& camera);

struct GateConfig {
  double sigma_gate_px{0.6};  // 3x the flow noise by default
  double gamma{0.9};          // decay of the previous velocity when gated
};

struct VelocityEstimate {
  Vec2 velocity{0.0, 0.0};  // body frame, m/s
  bool valid{false};
  Vec2 flow_std{0.0, 0.0};
  int inliers{0};
};

VelocityEstimate estimate_velocity(const FlowSample& unrotated, double altitude, const Vec2& prev_velocity,
                                   const CameraModel& camera, const GateConfig& gate = {});

struct PoseEstimate {
  Vec2 position{0.0, 0.0};
  double yaw{0.0};
  Vec2 velocity{0.0, 0.0};  // body frame
  bool valid{true};
  double time{0.0};
  double last_valid_time{0.0};

  [[nodiscard]] Pose2 pose() const { return {position.x(), position.y(), yaw}; }
};

/// Euler dead-reckoning of body velocity and gyro yaw rate.
class PoseIntegrator {
 public:
  explicit PoseIntegrator(const Pose2& start = {}, double time = 0.0) { reset(start, time); }
  void reset(const Pose2& start, double time);
  void update(const VelocityEstimate& v, double yaw_rate, double dt);
  [[nodiscard]] const PoseEstimate& estimate() const { return est_; }

 private:
  PoseEstimate est_;
};

struct PoseTrialConfig {
  double duration{3.0};
  double speed{1.5};
  double flow_rate{100.0};
  double altitude{2.0};
  double sonar_sigma{0.005};
  double yaw_rate_amplitude{0.6};  // rad/s, sinusoidal turning
  double wobble_rate{0.3};         // rad/s amplitude of roll/pitch rates
  FlowGridConfig grid;
  FlowNoiseConfig noise;
  ImuConfig imu;
  GateConfig gate;
  CameraModel camera{CameraModel::downward_default()};
};

struct PoseTrialResult {
  double distance{0.0};
  double position_error{0.0};
  int gated_frames{0};
  int frames{0};
};

/// Flies one seeded open-loop trajectory and integrates the flow odometry.
PoseTrialResult run_pose_trial(const PoseTrialConfig& config, std::uint64_t seed);

}  // namespace rhc
