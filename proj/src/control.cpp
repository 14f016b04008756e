#include "rhc/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rhc {

void PursuitConfig::validate() const {
  if (!(lookahead > 0.0)) throw std::invalid_argument("PursuitConfig: lookahead must be positive");
  if (!(kp >= 0.0) || !(kd >= 0.0)) throw std::invalid_argument("PursuitConfig: gains must be >= 0");
  if (!(control_rate > 0.0)) throw std::invalid_argument("PursuitConfig: control rate must be positive");
  if (!(v_cruise >= 0.0) || !(v_max >= v_cruise)) throw std::invalid_argument("PursuitConfig: need 0 <= v_cruise <= v_max");
  if (!(yaw_rate_max > 0.0)) throw std::invalid_argument("PursuitConfig: yaw rate limit must be positive");
}

PursuitResult pursuit_step(const std::vector<Pose2>& path, const Pose2& pose, const PursuitConfig& config,
                           double prev_error) {
  if (path.empty()) throw std::invalid_argument("pursuit_step: empty path");
  PursuitResult r;
  const Vec2 here = pose.position();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double d = (path[i].position() - here).squaredNorm();
    if (d < best) {
      best = d;
      r.closest = static_cast<int>(i);
    }
  }
  // Walk the lookahead arc length forward from the closest sample.
  double walked = 0.0;
  int target = r.closest;
  while (target + 1 < static_cast<int>(path.size()) && walked < config.lookahead) {
    walked += (path[target + 1].position() - path[target].position()).norm();
    ++target;
  }
  r.target = target;
  double remaining = 0.0;
  for (std::size_t i = r.closest; i + 1 < path.size(); ++i) remaining += (path[i + 1].position() - path[i].position()).norm();

  const Vec2 to_target = path[target].position() - here;
  r.heading_error = to_target.norm() > 1e-9 ? wrap_angle(std::atan2(to_target.y(), to_target.x()) - pose.yaw) : 0.0;
  const double derr = wrap_angle(r.heading_error - prev_error) * config.control_rate;
  const double w = config.kp * r.heading_error + config.kd * derr;
  r.command.yaw_rate = std::clamp(w, -config.yaw_rate_max, config.yaw_rate_max);
  const double taper = std::min(1.0, remaining / config.lookahead);
  r.command.forward_speed = std::clamp(config.v_cruise * taper, 0.0, config.v_max);
  return r;
}

PursuitResult pursuit_step(const std::vector<Pose2>& path, const Pose2& pose, const PursuitConfig& config,
                           double prev_error, double invalid_duration) {
  if (invalid_duration > config.invalid_hold) {
    PursuitResult r;
    r.heading_error = prev_error;
    return r;
  }
  return pursuit_step(path, pose, config, prev_error);
}

ControlCommand PursuitController::step(const std::vector<Pose2>& path, const Pose2& pose, double invalid_duration) {
  if (path.empty()) return {};
  if (!has_prev_) {
    prev_error_ = pursuit_step(path, pose, config_, 0.0).heading_error;
    has_prev_ = true;
  }
  const PursuitResult r = pursuit_step(path, pose, config_, prev_error_, invalid_duration);
  prev_error_ = r.heading_error;
  return r.command;
}

}  // namespace rhc
