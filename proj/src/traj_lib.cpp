#include "rhc/traj_lib.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rhc {

void TrajLibConfig::validate() const {
  if (grid < 1) throw std::invalid_argument("TrajLibConfig: grid must be >= 1");
  if (!(length > 0.0) || !(ds > 0.0) || ds > length) throw std::invalid_argument("TrajLibConfig: bad length/ds");
  if (!(speed > 0.0) || !(yaw_rate_max >= 0.0)) throw std::invalid_argument("TrajLibConfig: bad speed/yaw rate");
  if (select < 1 || select > grid * grid) throw std::invalid_argument("TrajLibConfig: select must be in [1, grid^2]");
}

Pose2 arc_pose(const Pose2& start, double kappa, double s) {
  const double dtheta = kappa * s;
  const double chord = s * sinc(0.5 * dtheta);
  const double mid = start.yaw + 0.5 * dtheta;
  return {start.x + chord * std::cos(mid), start.y + chord * std::sin(mid), wrap_angle(start.yaw + dtheta)};
}

Trajectory make_trajectory(int id, double kappa1, double kappa2, double length, double ds) {
  if (!(length > 0.0) || !(ds > 0.0)) throw std::invalid_argument("make_trajectory: length and ds must be positive");
  Trajectory t{id, kappa1, kappa2, length, {}};
  const int n = static_cast<int>(std::lround(length / ds));
  const double half = 0.5 * length;
  const Pose2 origin{};
  const Pose2 mid = arc_pose(origin, kappa1, half);
  t.samples.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(i * ds, length);
    t.samples.push_back(s <= half ? arc_pose(origin, kappa1, s) : arc_pose(mid, kappa2, s - half));
  }
  return t;
}

std::vector<Trajectory> generate_dense(const TrajLibConfig& config) {
  config.validate();
  const double kmax = config.kappa_max();
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(config.grid) * config.grid);
  auto kappa = [&](int i) {
    return config.grid == 1 ? 0.0 : -kmax + 2.0 * kmax * i / (config.grid - 1);
  };
  for (int i1 = 0; i1 < config.grid; ++i1)
    for (int i2 = 0; i2 < config.grid; ++i2)
      out.push_back(make_trajectory(i1 * config.grid + i2, kappa(i1), kappa(i2), config.length, config.ds));
  return out;
}

double trajectory_distance(const Trajectory& a, const Trajectory& b) {
  if (a.samples.size() != b.samples.size()) throw std::invalid_argument("trajectory_distance: sample count mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const double dx = a.samples[i].x - b.samples[i].x;
    const double dy = a.samples[i].y - b.samples[i].y;
    m = std::max(m, dx * dx + dy * dy);
  }
  return std::sqrt(m);
}

std::vector<int> greedy_dispersion(int n, const std::function<double(int, int)>& dist, int first, int k) {
  if (k <= 0) throw std::invalid_argument("greedy_dispersion: k must be positive");
  if (k > n) throw std::invalid_argument("greedy_dispersion: k exceeds the number of candidates");
  if (first < 0 || first >= n) throw std::invalid_argument("greedy_dispersion: seed index out of range");
  std::vector<int> order{first};
  std::vector<double> gap(n, std::numeric_limits<double>::infinity());
  std::vector<char> used(n, 0);
  used[first] = 1;
  while (static_cast<int>(order.size()) < k) {
    const int last = order.back();
    int best = -1;
    double best_gap = -1.0;
    for (int i = 0; i < n; ++i) {
      if (used[i]) continue;
      gap[i] = std::min(gap[i], dist(i, last));
      if (gap[i] > best_gap + 1e-12) {
        best = i;
        best_gap = gap[i];
      }
    }
    used[best] = 1;
    order.push_back(best);
  }
  return order;
}

double min_pairwise_distance(const std::vector<int>& set, const std::function<double(int, int)>& dist) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j) m = std::min(m, dist(set[i], set[j]));
  return m;
}

int straightest(const std::vector<Trajectory>& dense) {
  if (dense.empty()) throw std::invalid_argument("straightest: empty library");
  int best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const double v = std::abs(dense[i].kappa1) + std::abs(dense[i].kappa2);
    if (v < best_v - 1e-12) {
      best_v = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<int> select_dispersion(const std::vector<Trajectory>& dense, int k) {
  if (k <= 0) throw std::invalid_argument("select_dispersion: k must be positive");
  if (k > static_cast<int>(dense.size())) throw std::invalid_argument("select_dispersion: k exceeds library size");
  auto dist = [&](int a, int b) { return trajectory_distance(dense[a], dense[b]); };
  std::vector<int> order = greedy_dispersion(static_cast<int>(dense.size()), dist, straightest(dense), k);
  for (int& i : order) i = dense[i].id;
  return order;
}

TrajectoryLibrary build_library(const TrajLibConfig& config) {
  TrajectoryLibrary lib;
  lib.config = config;
  lib.dense = generate_dense(config);
  lib.selected = select_dispersion(lib.dense, config.select);
  return lib;
}

void write_library(std::ostream& os, const TrajectoryLibrary& lib) {
  const auto prec = os.precision(17);
  const TrajLibConfig& c = lib.config;
  os << "# rhc-trajlib 1\n";
  os << "config " << c.grid << ' ' << c.length << ' ' << c.ds << ' ' << c.speed << ' ' << c.yaw_rate_max << ' '
     << c.select << '\n';
  os << "dense " << lib.dense.size() << '\n';
  for (const auto& t : lib.dense) os << t.id << ' ' << t.kappa1 << ' ' << t.kappa2 << '\n';
  os << "selected " << lib.selected.size() << '\n';
  for (std::size_t i = 0; i < lib.selected.size(); ++i) os << (i ? " " : "") << lib.selected[i];
  os << '\n';
  for (int id : lib.selected) {
    const Trajectory& t = lib.dense.at(id);
    os << "samples " << id << ' ' << t.samples.size() << '\n';
    for (const auto& p : t.samples) os << p.x << ' ' << p.y << ' ' << p.yaw << '\n';
  }
  os.precision(prec);
}

TrajectoryLibrary read_library(std::istream& is) {
  auto fail = [](const std::string& what) { throw std::runtime_error("trajectory library: " + what); };
  std::string line;
  if (!std::getline(is, line) || line != "# rhc-trajlib 1") fail("missing header");
  TrajectoryLibrary lib;
  std::string tag;
  std::size_t n = 0;
  TrajLibConfig& c = lib.config;
  if (!(is >> tag >> c.grid >> c.length >> c.ds >> c.speed >> c.yaw_rate_max >> c.select) || tag != "config")
    fail("bad config line");
  if (!(is >> tag >> n) || tag != "dense") fail("bad dense header");
  for (std::size_t i = 0; i < n; ++i) {
    int id;
    double k1, k2;
    if (!(is >> id >> k1 >> k2)) fail("truncated dense list");
    if (id != static_cast<int>(i)) fail("dense ids must be consecutive");
    lib.dense.push_back(make_trajectory(id, k1, k2, c.length, c.ds));
  }
  if (!(is >> tag >> n) || tag != "selected") fail("bad selected header");
  for (std::size_t i = 0; i < n; ++i) {
    int id;
    if (!(is >> id) || id < 0 || id >= static_cast<int>(lib.dense.size())) fail("bad selected id");
    lib.selected.push_back(id);
  }
  // Sample blocks are informational; the paths are rebuilt from curvatures.
  return lib;
}

void save_library(const std::string& path, const TrajectoryLibrary& lib) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_library(os, lib);
}

TrajectoryLibrary load_library(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_library(is);
}

}  // namespace rhc
