#pragma once

// Synthetic planar forest: infinite vertical cylinders on a ground plane, a
// unicycle vehicle at fixed altitude and a pinhole camera that renders
// grayscale frames together with per-pixel obstacle depth.

#include "rhc/common.hpp"
#include "rhc/image.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rhc {

struct Tree {
  double x{0.0};
  double y{0.0};
  double radius{0.0};

  [[nodiscard]] Vec2 center() const { return {x, y}; }
  bool operator==(const Tree&) const = default;
};

struct Bounds {
  double x_min{0.0};
  double y_min{0.0};
  double x_max{0.0};
  double y_max{0.0};

  [[nodiscard]] double width() const { return x_max - x_min; }
  [[nodiscard]] double height() const { return y_max - y_min; }
  [[nodiscard]] double area() const { return width() * height(); }
  [[nodiscard]] bool contains(const Vec2& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }
  /// Width x height rectangle starting at x = 0 and centred on y = 0.
  static Bounds corridor(double width, double height) {
    return {0.0, -0.5 * height, width, 0.5 * height};
  }
  bool operator==(const Bounds&) const = default;
};

struct ForestScenario {
  std::vector<Tree> trees;
  Bounds bounds;
  double density{0.0};  // trees per m^2
  std::uint64_t seed{0};
  Vec2 goal_direction{1.0, 0.0};
  Vec2 start{0.0, 0.0};

  [[nodiscard]] double start_yaw() const { return std::atan2(goal_direction.y(), goal_direction.x()); }
  bool operator==(const ForestScenario&) const = default;
};

struct ScenarioOptions {
  double radius_min{0.06};
  double radius_max{0.45};
  /// Extra free space required between neighbouring trunks.
  double min_gap{0.6};
  /// Radius of the tree-free disk around the start position.
  double start_clearance{2.0};
  /// Start position as an offset from the left edge of the bounds (centred in y).
  double start_inset{2.5};
  Vec2 goal_direction{1.0, 0.0};
};

/// Dart-throwing placement of round(density * area) trunks.
/// Throws std::invalid_argument on bad inputs and std::runtime_error when the
/// requested density cannot be packed under the separation constraints.
ForestScenario generate_scenario(double density, const Bounds& bounds, std::uint64_t seed,
                                 const ScenarioOptions& options = {});

void write_scenario(std::ostream& os, const ForestScenario& scenario);
ForestScenario read_scenario(std::istream& is);
void save_scenario(const std::string& path, const ForestScenario& scenario);
ForestScenario load_scenario(const std::string& path);

struct VehicleState {
  Vec2 position{0.0, 0.0};
  double yaw{0.0};
  double speed{0.0};
  double time{0.0};

  [[nodiscard]] Pose2 pose() const { return {position.x(), position.y(), yaw}; }
  bool operator==(const VehicleState&) const = default;
};

/// Exact constant-curvature integration of a unicycle over `dt` in (0, 0.1].
VehicleState step_vehicle(const VehicleState& state, double forward_speed, double yaw_rate, double dt);

/// True iff any trunk disk strictly intersects the robot disk.
bool check_collision(const ForestScenario& scenario, const VehicleState& state, double robot_radius);
/// Index of the trunk in collision, if any (nearest surface first).
std::optional<std::size_t> colliding_tree(const ForestScenario& scenario, const Vec2& position,
                                          double robot_radius);

enum class CameraMount { forward, downward };

struct CameraModel {
  int width{320};
  int height{240};
  double horizontal_fov{75.0 * kPi / 180.0};
  CameraMount mount{CameraMount::forward};
  double altitude{1.5};

  [[nodiscard]] double focal() const { return 0.5 * width / std::tan(0.5 * horizontal_fov); }
  [[nodiscard]] double cx() const { return 0.5 * width; }
  [[nodiscard]] double cy() const { return 0.5 * height; }
  /// Bearing of the ray through the centre of pixel column `u`, positive to the left.
  [[nodiscard]] double column_bearing(double u) const;
  /// Validates the invariants; throws std::invalid_argument.
  void validate() const;

  static CameraModel forward_default() { return {}; }
  /// Downward flow camera: 320x240 with a 300 px focal length.
  static CameraModel downward_default();
};

struct Frame {
  ImageF pixels;       // grayscale in [0, 1]
  ImageD true_depth;   // planar range to the obstacle seen in each pixel column, capped at kMaxDepth
  Pose2 camera_pose;
  double timestamp{0.0};

  [[nodiscard]] int width() const { return pixels.width(); }
  [[nodiscard]] int height() const { return pixels.height(); }
};

/// Distance along a unit ray to the first crossing of a trunk boundary, or
/// nullopt. An origin inside the trunk reports 0.
std::optional<double> ray_trunk_distance(const Vec2& origin, const Vec2& unit_dir, const Tree& tree);

/// Ray-casts every pixel column against the trunks and shades the frame.
Frame render(const ForestScenario& scenario, const Pose2& camera_pose, const CameraModel& camera,
             double timestamp = 0.0);

}  // namespace rhc
