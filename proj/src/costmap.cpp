#include "rhc/costmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace rhc {

ScoredCloud::ScoredCloud(const CloudConfig& config) : config_(config) {
  if (!(config_.theta > 0.0 && config_.theta <= 1.0)) throw std::invalid_argument("ScoredCloud: theta must be in (0, 1]");
  if (config_.capacity == 0) throw std::invalid_argument("ScoredCloud: capacity must be positive");
  if (!(config_.cell > 0.0)) throw std::invalid_argument("ScoredCloud: cell size must be positive");
}

double ScoredCloud::max_age() const {
  return config_.tau > 0.0 ? -config_.tau * std::log(config_.theta) : 0.0;
}

double ScoredCloud::decay(const ScoredPoint& p, double now) const {
  const double age = now - p.birth_time;
  if (age < 0.0 || age > max_age()) return 0.0;
  if (config_.tau <= 0.0) return 1.0;
  return std::exp(-age / config_.tau);
}

void ScoredCloud::insert(const std::vector<ScoredPoint>& points, double now) {
  for (const auto& p : points) {
    if (!(p.weight > 0.0) || !p.position.allFinite()) throw std::invalid_argument("ScoredCloud: bad point");
    ScoredPoint q = p;
    q.birth_time = now;
    points_.push_back(q);
  }
  if (points_.size() > config_.capacity) {
    // Evict the lowest current scores; older first among equals.
    std::vector<std::size_t> order(points_.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> s(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) s[i] = points_[i].weight * decay(points_[i], now);
    const std::size_t drop = points_.size() - config_.capacity;
    std::nth_element(order.begin(), order.begin() + drop, order.end(), [&](std::size_t a, std::size_t b) {
      if (s[a] != s[b]) return s[a] < s[b];
      if (points_[a].birth_time != points_[b].birth_time) return points_[a].birth_time < points_[b].birth_time;
      return a < b;
    });
    std::vector<char> keep(points_.size(), 1);
    for (std::size_t i = 0; i < drop; ++i) keep[order[i]] = 0;
    std::vector<ScoredPoint> kept;
    kept.reserve(config_.capacity);
    for (std::size_t i = 0; i < points_.size(); ++i)
      if (keep[i]) kept.push_back(points_[i]);
    points_ = std::move(kept);
  }
  index_dirty_ = true;
  scores_valid_ = false;
}

void ScoredCloud::prune(double now) {
  const double horizon = max_age();
  const auto before = points_.size();
  points_.erase(std::remove_if(points_.begin(), points_.end(),
                               [&](const ScoredPoint& p) { return now - p.birth_time > horizon; }),
                points_.end());
  if (points_.size() != before) {
    index_dirty_ = true;
    scores_valid_ = false;
  }
}

void ScoredCloud::clear() {
  points_.clear();
  index_dirty_ = true;
  scores_valid_ = false;
}

void ScoredCloud::rebuild_index() const {
  index_dirty_ = false;
  cell_start_.clear();
  cell_items_.clear();
  nx_ = ny_ = 0;
  if (points_.empty()) return;
  double x1 = points_[0].position.x(), y1 = points_[0].position.y();
  x0_ = x1;
  y0_ = y1;
  for (const auto& p : points_) {
    x0_ = std::min(x0_, p.position.x());
    y0_ = std::min(y0_, p.position.y());
    x1 = std::max(x1, p.position.x());
    y1 = std::max(y1, p.position.y());
  }
  const double c = config_.cell;
  nx_ = static_cast<int>(std::floor((x1 - x0_) / c)) + 1;
  ny_ = static_cast<int>(std::floor((y1 - y0_) / c)) + 1;
  const std::size_t ncell = static_cast<std::size_t>(nx_) * ny_;
  cell_start_.assign(ncell + 1, 0);
  std::vector<std::size_t> cell_of(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const int ix = std::min(nx_ - 1, static_cast<int>((points_[i].position.x() - x0_) / c));
    const int iy = std::min(ny_ - 1, static_cast<int>((points_[i].position.y() - y0_) / c));
    cell_of[i] = static_cast<std::size_t>(iy) * nx_ + ix;
    ++cell_start_[cell_of[i] + 1];
  }
  for (std::size_t k = 0; k < ncell; ++k) cell_start_[k + 1] += cell_start_[k];
  cell_items_.resize(points_.size());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points_.size(); ++i) cell_items_[fill[cell_of[i]]++] = i;
}

void ScoredCloud::refresh_scores(double now) const {
  if (scores_valid_ && scores_time_ == now) return;
  scores_.resize(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) scores_[i] = points_[i].weight * decay(points_[i], now);
  scores_valid_ = true;
  scores_time_ = now;
}

std::vector<std::size_t> ScoredCloud::query(const Vec2& position, double radius, double now) const {
  if (index_dirty_) rebuild_index();
  std::vector<std::size_t> out;
  if (points_.empty() || radius < 0.0) return out;
  const double c = config_.cell;
  const int ix0 = std::max(0, static_cast<int>(std::floor((position.x() - radius - x0_) / c)));
  const int ix1 = std::min(nx_ - 1, static_cast<int>(std::floor((position.x() + radius - x0_) / c)));
  const int iy0 = std::max(0, static_cast<int>(std::floor((position.y() - radius - y0_) / c)));
  const int iy1 = std::min(ny_ - 1, static_cast<int>(std::floor((position.y() + radius - y0_) / c)));
  const double r2 = radius * radius;
  for (int iy = iy0; iy <= iy1; ++iy) {
    for (int ix = ix0; ix <= ix1; ++ix) {
      const std::size_t cell = static_cast<std::size_t>(iy) * nx_ + ix;
      for (std::size_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
        const std::size_t i = cell_items_[k];
        if ((points_[i].position - position).squaredNorm() <= r2 && decay(points_[i], now) > 0.0) out.push_back(i);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double ScoredCloud::score_at(const Vec2& position, double radius, double now) const {
  if (points_.empty() || radius < 0.0) return 0.0;
  if (index_dirty_) rebuild_index();
  refresh_scores(now);
  const double c = config_.cell;
  const int ix0 = std::max(0, static_cast<int>(std::floor((position.x() - radius - x0_) / c)));
  const int ix1 = std::min(nx_ - 1, static_cast<int>(std::floor((position.x() + radius - x0_) / c)));
  const int iy0 = std::max(0, static_cast<int>(std::floor((position.y() - radius - y0_) / c)));
  const int iy1 = std::min(ny_ - 1, static_cast<int>(std::floor((position.y() + radius - y0_) / c)));
  const double r2 = radius * radius;
  double total = 0.0;
  for (int iy = iy0; iy <= iy1; ++iy) {
    for (int ix = ix0; ix <= ix1; ++ix) {
      const std::size_t cell = static_cast<std::size_t>(iy) * nx_ + ix;
      for (std::size_t k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
        const std::size_t i = cell_items_[k];
        if ((points_[i].position - position).squaredNorm() <= r2) total += scores_[i];
      }
    }
  }
  return total;
}

void ScoredCloud::write_csv(std::ostream& os, double now) const {
  os << "x,y,score,tag\n";
  for (const auto& p : points_)
    os << p.position.x() << ',' << p.position.y() << ',' << p.weight * decay(p, now) << ','
       << interpretation_name(p.tag) << '\n';
}

std::vector<ScoredPoint> to_scored(const std::vector<ObstaclePoint>& points, Interpretation tag, double now) {
  std::vector<ScoredPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back({p.position, now, p.weight, tag});
  return out;
}

}  // namespace rhc
