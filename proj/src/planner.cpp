#include "rhc/planner.hpp"

#include <cmath>
#include <stdexcept>

namespace rhc {

void PlannerConfig::validate() const {
  if (!(w_dir >= 0.0) || !(w_trans >= 0.0)) throw std::invalid_argument("PlannerConfig: weights must be >= 0");
  if (!(robot_radius > 0.0)) throw std::invalid_argument("PlannerConfig: robot radius must be positive");
  if (!(replan_period > 0.0)) throw std::invalid_argument("PlannerConfig: replan period must be positive");
  if (!(goal_direction.norm() > 0.0)) throw std::invalid_argument("PlannerConfig: goal direction must be non-zero");
}

std::vector<Pose2> to_world(const Trajectory& traj, const Pose2& vehicle_pose) {
  std::vector<Pose2> out;
  out.reserve(traj.samples.size());
  for (const auto& s : traj.samples) out.push_back(vehicle_pose.compose(s));
  return out;
}

TrajectoryScore score_trajectory(const Trajectory& traj, const std::vector<const ScoredCloud*>& clouds,
                                 const Pose2& vehicle_pose, const PlannerConfig& config, double now) {
  if (traj.samples.empty()) throw std::invalid_argument("score_trajectory: empty trajectory");
  TrajectoryScore s;
  s.traj_id = traj.id;
  const std::vector<Pose2> path = to_world(traj, vehicle_pose);
  for (const ScoredCloud* cloud : clouds) {
    double c = 0.0;
    if (cloud != nullptr && cloud->size() > 0)
      for (const auto& p : path) c += cloud->score_at(p.position(), config.robot_radius, now);
    s.collision_per_interpretation.push_back(c);
    s.collision += c;
  }
  if (!clouds.empty()) s.collision /= static_cast<double>(clouds.size());

  const Vec2 goal = config.goal_direction.normalized();
  const double goal_bearing = std::atan2(goal.y(), goal.x());
  s.direction_penalty = std::abs(wrap_angle(path.back().yaw - goal_bearing));
  const Vec2 rel = path.back().position() - vehicle_pose.position();
  s.translation_penalty = std::abs(goal.x() * rel.y() - goal.y() * rel.x());
  s.total = s.collision + config.w_dir * s.direction_penalty + config.w_trans * s.translation_penalty;
  return s;
}

const TrajectoryScore& PlanResult::chosen() const {
  for (const auto& s : scores)
    if (s.traj_id == traj_id) return s;
  throw std::logic_error("PlanResult: no chosen trajectory");
}

PlanResult plan(const TrajectoryLibrary& library, const std::vector<const ScoredCloud*>& clouds,
                const Pose2& vehicle_pose, const PlannerConfig& config, double now) {
  config.validate();
  if (library.selected.empty()) throw std::invalid_argument("plan: library has no selected trajectories");
  PlanResult r;
  r.scores.reserve(library.selected.size());
  const TrajectoryScore* best = nullptr;
  for (int id : library.selected) {
    r.scores.push_back(score_trajectory(library.dense.at(id), clouds, vehicle_pose, config, now));
  }
  for (const auto& s : r.scores) {
    if (best == nullptr || s.total < best->total || (s.total == best->total && s.traj_id < best->traj_id)) best = &s;
  }
  r.traj_id = best->traj_id;
  r.world_path = to_world(library.dense.at(r.traj_id), vehicle_pose);
  return r;
}

}  // namespace rhc
