#include "rhc/perception.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rhc {

std::string_view interpretation_name(Interpretation i) {
  switch (i) {
    case Interpretation::near: return "near";
    case Interpretation::point: return "point";
    case Interpretation::far: return "far";
  }
  return "?";
}

DepthPredictor::DepthPredictor(const DepthModel& model, const CameraModel& camera, const FlowNoise& flow_noise)
    : model_(&model),
      extractor_(camera, PatchGrid::for_image(camera.width, camera.height, model.patch_size), model.layout.groups(),
                 flow_noise) {
  if (!extractor_.layout().same_shape(model.layout) || model.regressor.dims() != model.layout.dims())
    throw std::invalid_argument("DepthPredictor: model layout does not match its feature groups");
  if (model.regressor.n_stages() == 0) throw std::invalid_argument("DepthPredictor: untrained model");
}

DepthGrid DepthPredictor::predict(const Frame& frame, const Frame* prev) {
  const PatchFeatures pf = extractor_.extract(frame, prev);
  const Eigen::VectorXd raw = model_->regressor.predict(pf.values);
  DepthGrid g(pf.grid.rows, pf.grid.cols);
  g.timestamp = frame.timestamp;
  g.camera_pose = frame.camera_pose;
  for (int i = 0; i < g.count(); ++i) {
    const double v = raw(i);
    g.depth[i] = std::isfinite(v) ? std::clamp(v, kMinDepth, kMaxDepth) : kMaxDepth;
  }
  return g;
}

DepthGrid predict_depth(const Frame& frame, const Frame* prev, const DepthModel& model, const BudgetPlan& plan,
                        const CameraModel& camera) {
  if (!plan.steps.empty()) {
    GroupSet planned;
    for (const auto& s : plan.steps) planned.insert(parse_group(s.name));
    if (!(planned == model.layout.groups()))
      throw std::invalid_argument("predict_depth: budget plan groups (" + planned.to_string() +
                                  ") differ from the model layout (" + model.layout.groups().to_string() + ")");
  }
  DepthPredictor p(model, camera);
  return p.predict(frame, prev);
}

DepthGrid true_patch_depth(const Frame& frame, const PatchGrid& grid) {
  grid.check_fits(frame.width(), frame.height());
  DepthGrid g(grid.rows, grid.cols);
  g.timestamp = frame.timestamp;
  g.camera_pose = frame.camera_pose;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Rect pr = grid.patch_rect(r, c);
      double m = kMaxDepth;
      for (int y = pr.y0; y < pr.y1(); ++y)
        for (int x = pr.x0; x < pr.x1(); ++x) m = std::min(m, frame.true_depth(x, y));
      g.at(r, c) = m;
    }
  }
  return g;
}

DepthGrid oracle_predict(const Frame& frame, const PatchGrid& grid, double log_sigma, std::uint64_t seed) {
  if (log_sigma < 0.0) throw std::invalid_argument("oracle_predict: noise sigma must be >= 0");
  DepthGrid g = true_patch_depth(frame, grid);
  const std::uint64_t key = hash_combine(seed, hash_double(frame.timestamp));
  for (int i = 0; i < g.count(); ++i) {
    double d = g.depth[i];
    if (log_sigma > 0.0) d *= std::exp(log_sigma * hash_normal(hash_combine(key, static_cast<std::uint64_t>(i))));
    g.depth[i] = std::clamp(d, kMinDepth, kMaxDepth);
  }
  return g;
}

InterpretationSet expand_interpretations(const DepthGrid& grid, const ErrorLUT& lut, InterpretationMode mode) {
  InterpretationSet set;
  set.mode = mode;
  if (mode == InterpretationMode::single) {
    set.grids.push_back(grid);
    set.tags.push_back(Interpretation::point);
    return set;
  }
  DepthGrid near = grid, far = grid;
  for (int i = 0; i < grid.count(); ++i) {
    const NearFar nf = apply_lut(lut, grid.depth[i]);
    near.depth[i] = nf.near;
    far.depth[i] = nf.far;
  }
  set.grids = {std::move(near), grid, std::move(far)};
  set.tags = {Interpretation::near, Interpretation::point, Interpretation::far};
  return set;
}

namespace {

void check_grid(const DepthGrid& grid, const CameraModel& camera, int patch_size) {
  const PatchGrid pg = PatchGrid::for_image(camera.width, camera.height, patch_size);
  if (pg.rows != grid.rows || pg.cols != grid.cols)
    throw std::invalid_argument("depth grid does not match the camera patch tiling");
}

}  // namespace

std::vector<ObstaclePoint> project_to_points(const DepthGrid& grid, const CameraModel& camera, const Pose2& pose,
                                             int patch_size, int stride) {
  if (stride < 1) throw std::invalid_argument("project_to_points: stride must be >= 1");
  check_grid(grid, camera, patch_size);
  const double f = camera.focal();
  const double cx = camera.cx();
  const double cy = camera.cy();
  const double open = kOpenSpaceFraction * kMaxDepth;
  std::vector<ObstaclePoint> out;
  for (int r = 0; r < grid.rows; r += stride) {
    for (int c = 0; c < grid.cols; c += stride) {
      const double d = grid.at(r, c);
      if (!(d < open)) continue;
      const double u = (c + 0.5) * patch_size;
      const double v = (r + 0.5) * patch_size;
      const double bearing = std::atan((cx - u) / f);
      const double x = u - cx;
      const double y = v - cy;
      const double k = f * f / (f * f + x * x + y * y);
      ObstaclePoint p;
      p.position = pose.position() + d * Vec2(std::cos(pose.yaw + bearing), std::sin(pose.yaw + bearing));
      p.z = camera.altitude + (cy - v) / f * d * std::cos(bearing);
      p.weight = k * std::sqrt(k);
      p.patch = r * grid.cols + c;
      out.push_back(p);
    }
  }
  return out;
}

std::pair<int, int> back_project(const ObstaclePoint& point, const CameraModel& camera, const Pose2& pose,
                                 int patch_size) {
  const PatchGrid pg = PatchGrid::for_image(camera.width, camera.height, patch_size);
  const Vec2 body = pose.to_body(point.position);
  if (body.x() <= 0.0) return {-1, -1};
  const double f = camera.focal();
  const double u = camera.cx() - f * body.y() / body.x();
  const double v = camera.cy() - (point.z - camera.altitude) * f / body.x();
  const int c = static_cast<int>(std::floor(u / patch_size));
  const int r = static_cast<int>(std::floor(v / patch_size));
  if (u < 0.0 || v < 0.0 || r >= pg.rows || c >= pg.cols) return {-1, -1};
  return {r, c};
}

}  // namespace rhc
