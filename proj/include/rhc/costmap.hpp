#pragma once

// Fading-memory obstacle cloud. Each point's score decays as
// exp(-(now - birth) / tau); a point is deleted once that falls below theta,
// i.e. after -tau * ln(theta) seconds.

#include "rhc/common.hpp"
#include "rhc/perception.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace rhc {

struct ScoredPoint {
  Vec2 position;
  double birth_time{0.0};
  double weight{1.0};
  Interpretation tag{Interpretation::point};
};

struct CloudConfig {
  double tau{2.0};             // s; tau <= 0 keeps only points born at the query time
  double theta{0.1353352832366127};  // e^-2
  std::size_t capacity{50000};
  double cell{0.35};           // spatial index cell size, m
};

/// Not thread-safe: queries reuse an internal cache of decayed scores.
class ScoredCloud {
 public:
  explicit ScoredCloud(const CloudConfig& config = {});

  void insert(const std::vector<ScoredPoint>& points, double now);
  /// Sum of weight * decay over live points within `radius` (inclusive).
  [[nodiscard]] double score_at(const Vec2& position, double radius, double now) const;
  /// Removes every point whose decay is below theta.
  void prune(double now);
  void clear();

  /// Decay factor of a point at `now`; 0 before birth and after the memory horizon.
  [[nodiscard]] double decay(const ScoredPoint& p, double now) const;
  /// Age beyond which a point is gone.
  [[nodiscard]] double max_age() const;
  /// Indices of live points within `radius`, ascending (spatial index).
  [[nodiscard]] std::vector<std::size_t> query(const Vec2& position, double radius, double now) const;

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] const std::vector<ScoredPoint>& points() const { return points_; }
  [[nodiscard]] const CloudConfig& config() const { return config_; }

  /// CSV rows: x,y,score,tag.
  void write_csv(std::ostream& os, double now) const;

 private:
  void rebuild_index() const;
  void refresh_scores(double now) const;

  CloudConfig config_;
  std::vector<ScoredPoint> points_;

  // Lazily built CSR grid over the current points.
  mutable bool index_dirty_{true};
  mutable double x0_{0.0}, y0_{0.0};
  mutable int nx_{0}, ny_{0};
  mutable std::vector<std::size_t> cell_start_;
  mutable std::vector<std::size_t> cell_items_;
  // weight * decay for each point, valid for scores_time_.
  mutable bool scores_valid_{false};
  mutable double scores_time_{0.0};
  mutable std::vector<double> scores_;
};

/// Convenience: obstacle points tagged with an interpretation, all born now.
std::vector<ScoredPoint> to_scored(const std::vector<ObstaclePoint>& points, Interpretation tag, double now);

}  // namespace rhc
