#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rhc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

/// Depth cap of the simulated scene. Anything farther is "open".
inline constexpr double kMaxDepth = 20.0;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Planar pose: position in metres, yaw in radians (CCW from +x).
struct Pose2 {
  double x{0.0};
  double y{0.0};
  double yaw{0.0};

  [[nodiscard]] Vec2 position() const { return {x, y}; }
  [[nodiscard]] Vec2 heading() const { return {std::cos(yaw), std::sin(yaw)}; }

  /// Maps a point expressed in this pose's body frame into the parent frame.
  [[nodiscard]] Vec2 to_world(const Vec2& body) const;
  /// Inverse of to_world.
  [[nodiscard]] Vec2 to_body(const Vec2& world) const;
  /// Composes a body-frame pose onto this pose.
  [[nodiscard]] Pose2 compose(const Pose2& body) const;
};

/// Rotates a vector by `yaw`.
Vec2 rotate(const Vec2& v, double yaw);

// Stateless hashing used wherever the simulation needs reproducible noise
// that is keyed by content (tree id, pixel, timestamp) rather than by call order.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_double(double v);
/// Uniform in [0, 1).
double hash_unit(std::uint64_t h);
/// Standard normal from two hashed uniforms (Box-Muller).
double hash_normal(std::uint64_t h);

/// sin(x)/x with the removable singularity handled.
double sinc(double x);

}  // namespace rhc
