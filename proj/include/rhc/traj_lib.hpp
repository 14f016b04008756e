#pragma once

// Body-frame trajectory library: a dense grid of two-segment constant
// curvature paths and a greedy maximum-dispersion subset.

#include "rhc/common.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace rhc {

struct TrajLibConfig {
  int grid{49};            // curvature values per segment; dense size = grid^2
  double length{5.0};      // metres
  double ds{0.1};          // arc-length sample spacing
  double speed{1.5};       // m/s the library is designed for
  double yaw_rate_max{1.0};  // rad/s; kappa_max = yaw_rate_max / speed
  int select{78};

  [[nodiscard]] double kappa_max() const { return yaw_rate_max / speed; }
  void validate() const;
};

struct Trajectory {
  int id{0};
  double kappa1{0.0};  // first half
  double kappa2{0.0};  // second half
  double length{0.0};
  std::vector<Pose2> samples;  // s = 0, ds, ..., length; starts at the origin facing +x

  [[nodiscard]] const Pose2& end() const { return samples.back(); }
};

/// Pose reached from `start` after driving arc length s at constant curvature kappa.
Pose2 arc_pose(const Pose2& start, double kappa, double s);
/// Two-segment path sampled every ds; the curvature switches at length / 2.
Trajectory make_trajectory(int id, double kappa1, double kappa2, double length, double ds);

std::vector<Trajectory> generate_dense(const TrajLibConfig& config = {});

/// Largest distance between samples matched by arc length. Throws on unequal sample counts.
double trajectory_distance(const Trajectory& a, const Trajectory& b);

/// Farthest-point greedy order starting at `first`; ties go to the lower index.
std::vector<int> greedy_dispersion(int n, const std::function<double(int, int)>& dist, int first, int k);
/// Smallest pairwise distance within `set` (infinity for fewer than two members).
double min_pairwise_distance(const std::vector<int>& set, const std::function<double(int, int)>& dist);

/// Index of the path closest to straight (smallest |kappa1| + |kappa2|, lower id on ties).
int straightest(const std::vector<Trajectory>& dense);
/// Greedy dispersion selection seeded with the straightest path. Returns ids in pick order.
/// Throws std::invalid_argument unless 0 < k <= dense.size().
std::vector<int> select_dispersion(const std::vector<Trajectory>& dense, int k);

struct TrajectoryLibrary {
  TrajLibConfig config;
  std::vector<Trajectory> dense;
  std::vector<int> selected;  // ids into `dense`, greedy order

  [[nodiscard]] const Trajectory& selected_at(std::size_t i) const { return dense.at(selected.at(i)); }
};

TrajectoryLibrary build_library(const TrajLibConfig& config = {});

/// Text dump: header, config, one line per dense path (id kappa1 kappa2),
/// the selected ids, then the samples of every selected path.
void write_library(std::ostream& os, const TrajectoryLibrary& lib);
TrajectoryLibrary read_library(std::istream& is);
void save_library(const std::string& path, const TrajectoryLibrary& lib);
TrajectoryLibrary load_library(const std::string& path);

}  // namespace rhc
