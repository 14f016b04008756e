#pragma once

// Receding-horizon trajectory scoring: collision mass from the fading-memory
// clouds averaged over interpretations, plus goal-direction penalties.

#include "rhc/costmap.hpp"
#include "rhc/traj_lib.hpp"

#include <vector>

namespace rhc {

struct PlannerConfig {
  double w_dir{0.3};
  double w_trans{0.05};  // per metre
  double robot_radius{0.35};
  double replan_period{0.2};
  Vec2 goal_direction{1.0, 0.0};

  void validate() const;
};

struct TrajectoryScore {
  int traj_id{0};
  std::vector<double> collision_per_interpretation;
  double collision{0.0};
  double direction_penalty{0.0};
  double translation_penalty{0.0};
  double total{0.0};
};

/// Body-frame samples placed at the vehicle pose.
std::vector<Pose2> to_world(const Trajectory& traj, const Pose2& vehicle_pose);

TrajectoryScore score_trajectory(const Trajectory& traj, const std::vector<const ScoredCloud*>& clouds,
                                 const Pose2& vehicle_pose, const PlannerConfig& config, double now);

struct PlanResult {
  int traj_id{-1};
  std::vector<Pose2> world_path;
  std::vector<TrajectoryScore> scores;  // one per selected trajectory, library order
  [[nodiscard]] const TrajectoryScore& chosen() const;
};

/// Minimum total over the selected trajectories; ties go to the lower id.
PlanResult plan(const TrajectoryLibrary& library, const std::vector<const ScoredCloud*>& clouds,
                const Pose2& vehicle_pose, const PlannerConfig& config, double now);

}  // namespace rhc
