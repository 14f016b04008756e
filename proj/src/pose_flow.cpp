#include "rhc/pose_flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rhc {

namespace {

// Camera-frame translation and rotation for a body-frame motion.
Vec3 camera_translation(const Vec2& v) { return {v.x(), -v.y(), 0.0}; }
Vec3 camera_rotation(const Vec3& w) { return {w.x(), -w.y(), -w.z()}; }

Vec2 rotational_flow(double x, double y, const Vec3& wc) {
  return {x * y * wc.x() - (1.0 + x * x) * wc.y() + y * wc.z(), (1.0 + y * y) * wc.x() - x * y * wc.y() - x * wc.z()};
}

double median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + n / 2));
}

}  // namespace

FlowSample simulate_flow(const BodyMotion& motion, double altitude, const CameraModel& camera,
                         const FlowGridConfig& grid, const FlowNoiseConfig& noise, double rate, std::uint64_t seed,
                         double timestamp) {
  if (!(altitude > 0.0) || !(rate > 0.0)) throw std::invalid_argument("simulate_flow: altitude and rate must be positive");
  if (grid.grid < 1) throw std::invalid_argument("simulate_flow: empty grid");
  const double f = camera.focal();
  const double dt = 1.0 / rate;
  const Vec3 T = camera_translation(motion.velocity);
  const Vec3 wc = camera_rotation(motion.angular_velocity);
  FlowSample out;
  out.timestamp = timestamp;
  out.rate = rate;
  const std::uint64_t key = hash_combine(seed, hash_double(timestamp));
  const double half = 0.5 * (grid.grid - 1);
  for (int i = 0; i < grid.grid; ++i) {
    for (int j = 0; j < grid.grid; ++j) {
      const Vec2 px((j - half) * grid.spacing_px, (i - half) * grid.spacing_px);
      const double x = px.x() / f;
      const double y = px.y() / f;
      Vec2 flow = Vec2((-T.x() + x * T.z()) / altitude, (-T.y() + y * T.z()) / altitude) + rotational_flow(x, y, wc);
      flow *= f * dt;
      const std::uint64_t h = hash_combine(key, static_cast<std::uint64_t>(i * grid.grid + j));
      const bool outlier = hash_unit(h ^ 0x0f0f0f0fULL) < noise.p_out;
      const double s = outlier ? std::hypot(noise.sigma_px, noise.outlier_sigma_px) : noise.sigma_px;
      flow += s * Vec2(hash_normal(h), hash_normal(h ^ 0x3c3c3c3c3c3cULL));
      out.points.push_back(px);
      out.flow.push_back(flow);
    }
  }
  return out;
}

ImuReading simulate_imu(const Vec3& true_rates, double timestamp, const ImuConfig& config, std::uint64_t seed) {
  ImuReading r;
  r.timestamp = timestamp;
  const std::uint64_t key = hash_combine(seed, hash_double(timestamp));
  for (int a = 0; a < 3; ++a) {
    const double sign = hash_unit(hash_combine(seed, 0xb1a5ULL + a)) < 0.5 ? -1.0 : 1.0;
    r.angular_velocity(a) = true_rates(a) + sign * config.bias +
                            config.noise_sigma * hash_normal(hash_combine(key, static_cast<std::uint64_t>(a)));
  }
  return r;
}

const ImuReading& nearest_reading(const std::vector<ImuReading>& readings, double t) {
  if (readings.empty()) throw std::invalid_argument("nearest_reading: no IMU readings");
  auto it = std::lower_bound(readings.begin(), readings.end(), t,
                             [](const ImuReading& r, double v) { return r.timestamp < v; });
  if (it == readings.end()) return readings.back();
  if (it == readings.begin()) return *it;
  auto prev = std::prev(it);
  return (t - prev->timestamp) <= (it->timestamp - t) ? *prev : *it;
}

FlowSample unrotate(const FlowSample& flow, const ImuReading& imu, const CameraModel& camera) {
  const double f = camera.focal();
  const double dt = 1.0 / flow.rate;
  const Vec3 wc = camera_rotation(imu.angular_velocity);
  FlowSample out = flow;
  for (std::size_t k = 0; k < flow.flow.size(); ++k) {
    const double x = flow.points[k].x() / f;
    const double y = flow.points[k].y() / f;
    out.flow[k] -= f * dt * rotational_flow(x, y, wc);
  }
  return out;
}

VelocityEstimate estimate_velocity(const FlowSample& flow, double altitude, const Vec2& prev_velocity,
                                   const CameraModel& camera, const GateConfig& gate) {
  if (flow.flow.empty()) throw std::invalid_argument("estimate_velocity: empty flow sample");
  const std::size_t n = flow.flow.size();
  Vec2 mean = Vec2::Zero();
  for (const auto& v : flow.flow) mean += v;
  mean /= static_cast<double>(n);
  Vec2 var = Vec2::Zero();
  for (const auto& v : flow.flow) var += (v - mean).cwiseAbs2();
  VelocityEstimate e;
  e.flow_std = (var / static_cast<double>(n)).cwiseSqrt();
  if (e.flow_std.x() > gate.sigma_gate_px || e.flow_std.y() > gate.sigma_gate_px) {
    e.velocity = gate.gamma * prev_velocity;
    e.valid = false;
    return e;
  }
  std::vector<double> xs, ys;
  for (const auto& v : flow.flow) {
    xs.push_back(v.x());
    ys.push_back(v.y());
  }
  const Vec2 med(median(xs), median(ys));
  Vec2 sum = Vec2::Zero();
  for (const auto& v : flow.flow) {
    if ((v - med).norm() <= gate.sigma_gate_px) {
      sum += v;
      ++e.inliers;
    }
  }
  const Vec2 m = e.inliers > 0 ? Vec2(sum / e.inliers) : mean;
  const Vec2 t_cam = -m * altitude * flow.rate / camera.focal();
  e.velocity = Vec2(t_cam.x(), -t_cam.y());
  e.valid = true;
  return e;
}

void PoseIntegrator::reset(const Pose2& start, double time) {
  est_ = PoseEstimate{};
  est_.position = start.position();
  est_.yaw = start.yaw;
  est_.time = time;
  est_.last_valid_time = time;
}

void PoseIntegrator::update(const VelocityEstimate& v, double yaw_rate, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("PoseIntegrator: dt must be positive");
  const double mid_yaw = est_.yaw + 0.5 * yaw_rate * dt;
  est_.position += rotate(v.velocity, mid_yaw) * dt;
  est_.yaw = wrap_angle(est_.yaw + yaw_rate * dt);
  est_.velocity = v.velocity;
  est_.time += dt;
  est_.valid = v.valid;
  if (v.valid) est_.last_valid_time = est_.time;
}

PoseTrialResult run_pose_trial(const PoseTrialConfig& c, std::uint64_t seed) {
  if (!(c.duration > 0.0) || !(c.flow_rate > 0.0)) throw std::invalid_argument("run_pose_trial: bad config");
  PoseTrialResult r;
  const double dt = 1.0 / c.flow_rate;
  const int steps = static_cast<int>(std::lround(c.duration * c.flow_rate));
  const double phase = 2.0 * kPi * hash_unit(hash_combine(seed, 11));
  const double turn_freq = 0.3 + 0.4 * hash_unit(hash_combine(seed, 12));
  auto yaw_rate_at = [&](double t) { return c.yaw_rate_amplitude * std::sin(2.0 * kPi * turn_freq * t + phase); };
  auto wobble_at = [&](double t) {
    return Vec2(c.wobble_rate * std::sin(2.0 * kPi * 1.3 * t + phase), c.wobble_rate * std::cos(2.0 * kPi * 0.9 * t));
  };

  VehicleState truth;
  PoseIntegrator integ;
  Vec2 prev_v = Vec2::Zero();
  const double imu_dt = 1.0 / c.imu.rate;
  std::vector<ImuReading> imu;
  double next_imu = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const double wz = yaw_rate_at(t);
    const Vec2 wob = wobble_at(t);
    const Vec3 rates(wob.x(), wob.y(), wz);
    while (next_imu <= t + 1e-12) {
      const Vec2 w = wobble_at(next_imu);
      imu.push_back(simulate_imu(Vec3(w.x(), w.y(), yaw_rate_at(next_imu)), next_imu, c.imu, seed));
      next_imu += imu_dt;
    }
    const BodyMotion motion{Vec2(c.speed, 0.0), rates};
    const FlowSample raw = simulate_flow(motion, c.altitude, c.camera, c.grid, c.noise, c.flow_rate, seed, t);
    const ImuReading& reading = nearest_reading(imu, t);
    const FlowSample flat = unrotate(raw, reading, c.camera);
    const double sonar = c.altitude + c.sonar_sigma * hash_normal(hash_combine(seed ^ 0x50a2ULL, hash_double(t)));
    const VelocityEstimate v = estimate_velocity(flat, sonar, prev_v, c.camera, c.gate);
    if (!v.valid) ++r.gated_frames;
    ++r.frames;
    prev_v = v.velocity;
    integ.update(v, reading.angular_velocity.z(), dt);
    truth = step_vehicle(truth, c.speed, wz, dt);
  }
  r.distance = c.speed * steps * dt;
  r.position_error = (integ.estimate().position - truth.position).norm();
  return r;
}

}  // namespace rhc
