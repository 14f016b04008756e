#pragma once

// Pure pursuit with PD steering on heading error.

#include "rhc/common.hpp"

#include <vector>

namespace rhc {

struct PursuitConfig {
  double lookahead{1.0};
  double kp{4.0};
  double kd{0.1};
  double v_cruise{1.5};
  double v_max{3.0};
  double control_rate{50.0};
  double yaw_rate_max{1.5};
  double invalid_hold{0.5};  // s of invalid pose before holding position

  void validate() const;
};

struct ControlCommand {
  double forward_speed{0.0};
  double yaw_rate{0.0};
};

struct PursuitResult {
  ControlCommand command;
  double heading_error{0.0};
  int closest{0};
  int target{0};
};

/// One control tick along a world-frame path. `prev_error` is the previous
/// heading error (use the current one on the first tick to get no D kick).
PursuitResult pursuit_step(const std::vector<Pose2>& path, const Pose2& pose, const PursuitConfig& config,
                           double prev_error);

/// Same, but returns a zero-speed hold if the pose has been invalid for longer
/// than config.invalid_hold.
PursuitResult pursuit_step(const std::vector<Pose2>& path, const Pose2& pose, const PursuitConfig& config,
                           double prev_error, double invalid_duration);

/// Stateful wrapper that carries the previous error across ticks and path swaps.
class PursuitController {
 public:
  explicit PursuitController(const PursuitConfig& config = {}) : config_(config) { config_.validate(); }
  ControlCommand step(const std::vector<Pose2>& path, const Pose2& pose, double invalid_duration = 0.0);
  void reset() { has_prev_ = false; }
  [[nodiscard]] const PursuitConfig& config() const { return config_; }

 private:
  PursuitConfig config_;
  bool has_prev_{false};
  double prev_error_{0.0};
};

}  // namespace rhc
