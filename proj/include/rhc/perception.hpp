#pragma once

// Runtime depth pipeline: frame -> budgeted features -> per-patch depth ->
// scene interpretations -> world-frame obstacle points.

#include "rhc/features.hpp"
#include "rhc/learn.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace rhc {

struct DepthGrid {
  int rows{0};
  int cols{0};
  std::vector<double> depth;  // row-major, metres in [kMinDepth, kMaxDepth]
  double timestamp{0.0};
  Pose2 camera_pose;

  DepthGrid() = default;
  DepthGrid(int rows_, int cols_, double fill = kMaxDepth) : rows(rows_), cols(cols_), depth(rows_ * cols_, fill) {}
  [[nodiscard]] double at(int r, int c) const { return depth[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return depth[static_cast<std::size_t>(r) * cols + c]; }
  [[nodiscard]] int count() const { return rows * cols; }
};

enum class Interpretation : int { near = 0, point = 1, far = 2 };
enum class InterpretationMode { single, multiple };

std::string_view interpretation_name(Interpretation i);

struct InterpretationSet {
  InterpretationMode mode{InterpretationMode::single};
  std::vector<DepthGrid> grids;           // (point) or (near, point, far)
  std::vector<Interpretation> tags;
};

/// Reusable predictor bound to one model; extracts only the model's groups.
class DepthPredictor {
 public:
  DepthPredictor(const DepthModel& model, const CameraModel& camera, const FlowNoise& flow_noise = {});
  DepthGrid predict(const Frame& frame, const Frame* prev);
  [[nodiscard]] const PatchGrid& grid() const { return extractor_.grid(); }

 private:
  const DepthModel* model_;
  FeatureExtractor extractor_;
};

/// One-shot prediction. The plan must select exactly the model's groups;
/// an empty plan means "use the model's layout". Throws std::invalid_argument
/// on a layout mismatch.
DepthGrid predict_depth(const Frame& frame, const Frame* prev, const DepthModel& model, const BudgetPlan& plan,
                        const CameraModel& camera);

/// Per-patch minimum of the true depth column values.
DepthGrid true_patch_depth(const Frame& frame, const PatchGrid& grid);

/// True patch depth times exp(sigma * N(0, 1)) keyed by (seed, patch), clamped.
DepthGrid oracle_predict(const Frame& frame, const PatchGrid& grid, double log_sigma = 0.0, std::uint64_t seed = 0);

InterpretationSet expand_interpretations(const DepthGrid& grid, const ErrorLUT& lut, InterpretationMode mode);

struct ObstaclePoint {
  Vec2 position;      // world frame, metres
  double z{0.0};      // height above ground of the patch centre ray at that range
  double weight{1.0}; // patch solid angle relative to a patch on the optical axis
  int patch{0};
};

/// Fraction of kMaxDepth at and beyond which a patch counts as open space.
inline constexpr double kOpenSpaceFraction = 0.95;

/// One point per `stride`-th patch row and column. Throws std::invalid_argument
/// if the grid does not tile the camera image with `patch_size`.
std::vector<ObstaclePoint> project_to_points(const DepthGrid& grid, const CameraModel& camera, const Pose2& pose,
                                             int patch_size = 16, int stride = 1);

/// Patch (row, col) whose centre ray passes through the point; -1s if outside the image.
std::pair<int, int> back_project(const ObstaclePoint& point, const CameraModel& camera, const Pose2& pose,
                                 int patch_size = 16);

}  // namespace rhc
