#include "rhc/sim_world.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rhc {

namespace {

constexpr double kFogLength = 35.0;
constexpr double kHaze = 0.78;
constexpr double kPixelNoise = 0.01;

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// 1D value noise in [-1, 1].
double band_noise(double x, std::uint64_t seed) {
  const double fl = std::floor(x);
  const auto i = static_cast<std::int64_t>(fl);
  const double a = hash_unit(hash_combine(seed, static_cast<std::uint64_t>(i)));
  const double b = hash_unit(hash_combine(seed, static_cast<std::uint64_t>(i + 1)));
  return 2.0 * (a + (b - a) * smoothstep(x - fl)) - 1.0;
}

// 2D value noise in [-1, 1].
double value_noise2(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  auto corner = [&](std::int64_t dx, std::int64_t dy) {
    return hash_unit(hash_combine(hash_combine(seed, static_cast<std::uint64_t>(ix + dx)),
                                  static_cast<std::uint64_t>(iy + dy)));
  };
  const double tx = smoothstep(x - fx);
  const double ty = smoothstep(y - fy);
  const double top = corner(0, 0) + (corner(1, 0) - corner(0, 0)) * tx;
  const double bot = corner(0, 1) + (corner(1, 1) - corner(0, 1)) * tx;
  return 2.0 * (top + (bot - top) * ty) - 1.0;
}

struct TrunkLook {
  double albedo;
  std::uint64_t stripe_seed;
  double stripe_freq;
  std::uint64_t ring_seed;
};

TrunkLook trunk_look(std::uint64_t scenario_seed, std::size_t index) {
  const std::uint64_t h = hash_combine(scenario_seed, 0x7472656500000000ULL + index);
  return {0.22 + 0.38 * hash_unit(h), hash_combine(h, 1), 5.0 + 6.0 * hash_unit(hash_combine(h, 2)),
          hash_combine(h, 3)};
}

double fog(double intensity, double range) {
  const double k = std::exp(-range / kFogLength);
  return intensity * k + kHaze * (1.0 - k);
}

}  // namespace

ForestScenario generate_scenario(double density, const Bounds& bounds, std::uint64_t seed,
                                 const ScenarioOptions& options) {
  if (!(density > 0.0)) throw std::invalid_argument("generate_scenario: density must be positive");
  if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0))
    throw std::invalid_argument("generate_scenario: degenerate bounds");
  if (!(options.radius_min > 0.0) || options.radius_max < options.radius_min)
    throw std::invalid_argument("generate_scenario: bad radius range");

  ForestScenario sc;
  sc.bounds = bounds;
  sc.density = density;
  sc.seed = seed;
  sc.goal_direction = options.goal_direction.normalized();
  sc.start = {bounds.x_min + options.start_inset, 0.5 * (bounds.y_min + bounds.y_max)};

  const auto target = static_cast<std::size_t>(std::llround(density * bounds.area()));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(bounds.x_min, bounds.x_max);
  std::uniform_real_distribution<double> uy(bounds.y_min, bounds.y_max);
  std::uniform_real_distribution<double> ur(options.radius_min, options.radius_max);

  const std::size_t max_attempts = 400 * target + 1000;
  std::size_t attempts = 0;
  sc.trees.reserve(target);
  while (sc.trees.size() < target) {
    if (++attempts > max_attempts) {
      std::ostringstream msg;
      msg << "generate_scenario: density " << density << " infeasible for bounds (placed "
          << sc.trees.size() << " of " << target << ")";
      throw std::runtime_error(msg.str());
    }
    const Tree t{ux(rng), uy(rng), ur(rng)};
    if (t.x - t.radius < bounds.x_min || t.x + t.radius > bounds.x_max || t.y - t.radius < bounds.y_min ||
        t.y + t.radius > bounds.y_max)
      continue;
    if ((t.center() - sc.start).norm() < options.start_clearance + t.radius) continue;
    const bool overlaps = std::any_of(sc.trees.begin(), sc.trees.end(), [&](const Tree& o) {
      return (o.center() - t.center()).norm() < o.radius + t.radius + options.min_gap;
    });
    if (!overlaps) sc.trees.push_back(t);
  }
  return sc;
}

void write_scenario(std::ostream& os, const ForestScenario& sc) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# rhc-forest 1\n";
  os << "bounds " << sc.bounds.x_min << ' ' << sc.bounds.y_min << ' ' << sc.bounds.x_max << ' '
     << sc.bounds.y_max << '\n';
  os << "density " << sc.density << '\n';
  os << "seed " << sc.seed << '\n';
  os << "goal " << sc.goal_direction.x() << ' ' << sc.goal_direction.y() << '\n';
  os << "start " << sc.start.x() << ' ' << sc.start.y() << '\n';
  os << "trees " << sc.trees.size() << '\n';
  for (const Tree& t : sc.trees) os << t.x << ' ' << t.y << ' ' << t.radius << '\n';
}

ForestScenario read_scenario(std::istream& is) {
  ForestScenario sc;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# rhc-forest 1", 0) != 0)
    throw std::runtime_error("read_scenario: missing '# rhc-forest 1' header");
  std::size_t n_trees = 0;
  bool have_trees = false;
  while (!have_trees && std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "bounds") ls >> sc.bounds.x_min >> sc.bounds.y_min >> sc.bounds.x_max >> sc.bounds.y_max;
    else if (key == "density") ls >> sc.density;
    else if (key == "seed") ls >> sc.seed;
    else if (key == "goal") ls >> sc.goal_direction.x() >> sc.goal_direction.y();
    else if (key == "start") ls >> sc.start.x() >> sc.start.y();
    else if (key == "trees") {
      ls >> n_trees;
      have_trees = true;
    } else if (!key.empty() && key[0] != '#') {
      throw std::runtime_error("read_scenario: unknown key '" + key + "'");
    }
    if (ls.fail()) throw std::runtime_error("read_scenario: malformed line '" + line + "'");
  }
  if (!have_trees) throw std::runtime_error("read_scenario: missing 'trees' record");
  sc.trees.resize(n_trees);
  for (Tree& t : sc.trees) {
    if (!(is >> t.x >> t.y >> t.radius)) throw std::runtime_error("read_scenario: truncated tree list");
    if (!(t.radius > 0.0)) throw std::runtime_error("read_scenario: non-positive radius");
  }
  return sc;
}

void save_scenario(const std::string& path, const ForestScenario& scenario) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_scenario(os, scenario);
}

ForestScenario load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  return read_scenario(is);
}

VehicleState step_vehicle(const VehicleState& s, double forward_speed, double yaw_rate, double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) throw std::invalid_argument("step_vehicle: dt must lie in (0, 0.1]");
  // Chord form of the arc: exact for constant speed and yaw rate, and stable as yaw_rate -> 0.
  const double half_turn = 0.5 * yaw_rate * dt;
  const double chord = forward_speed * dt * sinc(half_turn);
  const double mid_yaw = s.yaw + half_turn;
  VehicleState out = s;
  out.position = s.position + chord * Vec2(std::cos(mid_yaw), std::sin(mid_yaw));
  out.yaw = wrap_angle(s.yaw + yaw_rate * dt);
  out.speed = std::max(0.0, forward_speed);
  out.time = s.time + dt;
  return out;
}

std::optional<std::size_t> colliding_tree(const ForestScenario& scenario, const Vec2& position,
                                          double robot_radius) {
  std::optional<std::size_t> best;
  double best_gap = 0.0;
  for (std::size_t i = 0; i < scenario.trees.size(); ++i) {
    const Tree& t = scenario.trees[i];
    const double gap = (t.center() - position).norm() - (t.radius + robot_radius);
    if (gap < 0.0 && (!best || gap < best_gap)) {
      best = i;
      best_gap = gap;
    }
  }
  return best;
}

bool check_collision(const ForestScenario& scenario, const VehicleState& state, double robot_radius) {
  if (!(robot_radius > 0.0)) throw std::invalid_argument("check_collision: robot_radius must be positive");
  return colliding_tree(scenario, state.position, robot_radius).has_value();
}

double CameraModel::column_bearing(double u) const { return std::atan((cx() - u) / focal()); }

void CameraModel::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("CameraModel: non-positive image size");
  if (!(horizontal_fov > 0.0 && horizontal_fov < kPi))
    throw std::invalid_argument("CameraModel: field of view must lie in (0, pi)");
}

CameraModel CameraModel::downward_default() {
  CameraModel cam;
  cam.mount = CameraMount::downward;
  cam.horizontal_fov = 2.0 * std::atan(160.0 / 300.0);
  cam.altitude = 2.0;
  return cam;
}

std::optional<double> ray_trunk_distance(const Vec2& origin, const Vec2& unit_dir, const Tree& tree) {
  const Vec2 oc = tree.center() - origin;
  const double r2 = tree.radius * tree.radius;
  const double c2 = oc.squaredNorm();
  if (c2 <= r2) return 0.0;
  const double along = oc.dot(unit_dir);
  if (along <= 0.0) return std::nullopt;
  const double perp2 = c2 - along * along;
  if (perp2 >= r2) return std::nullopt;
  // Nearer root of |o + t d - c|^2 = r^2, written to avoid cancellation.
  const double half_chord = std::sqrt(r2 - perp2);
  return (c2 - r2) / (along + half_chord);
}

Frame render(const ForestScenario& scenario, const Pose2& pose, const CameraModel& camera, double timestamp) {
  camera.validate();
  const int W = camera.width;
  const int H = camera.height;
  Frame frame;
  frame.pixels.resize(W, H);
  frame.true_depth.resize(W, H, kMaxDepth);
  frame.camera_pose = pose;
  frame.timestamp = timestamp;

  const double f = camera.focal();
  const double cy = camera.cy();
  const double h = camera.altitude;
  const Vec2 origin = pose.position();
  const bool inside = scenario.bounds.contains(origin);

  // Trunks that can be seen at all.
  std::vector<std::size_t> nearby;
  if (inside) {
    for (std::size_t i = 0; i < scenario.trees.size(); ++i) {
      const Tree& t = scenario.trees[i];
      if ((t.center() - origin).norm() <= kMaxDepth + t.radius) nearby.push_back(i);
    }
  }

  const std::uint64_t noise_seed =
      hash_combine(hash_combine(scenario.seed, hash_double(pose.x)), hash_combine(hash_double(pose.y), hash_double(pose.yaw)));
  const std::uint64_t ground_seed = hash_combine(scenario.seed, 0x67726f756e64ULL);
  const Vec2 light = Vec2(-0.6, 0.8).normalized();

  for (int u = 0; u < W; ++u) {
    const double bearing = camera.column_bearing(u + 0.5);
    const double cos_b = std::cos(bearing);
    const Vec2 dir(std::cos(pose.yaw + bearing), std::sin(pose.yaw + bearing));

    double range = std::numeric_limits<double>::infinity();
    std::size_t hit = 0;
    for (std::size_t i : nearby) {
      if (auto t = ray_trunk_distance(origin, dir, scenario.trees[i]); t && *t < range) {
        range = *t;
        hit = i;
      }
    }
    const bool has_hit = range <= kMaxDepth;
    const double depth = has_hit ? std::max(range, 1e-6) : kMaxDepth;

    // Trunk base row: where the trunk meets the ground plane.
    double base_row = std::numeric_limits<double>::infinity();
    double stripe = 0.0;
    double shade = 1.0;
    TrunkLook look{};
    if (has_hit) {
      const Tree& t = scenario.trees[hit];
      const Vec2 p = origin + depth * dir;
      const Vec2 n = (p - t.center()) / t.radius;
      const double arc = std::atan2(n.y(), n.x()) * t.radius;
      look = trunk_look(scenario.seed, hit);
      stripe = band_noise(arc * look.stripe_freq, look.stripe_seed);
      shade = 0.55 + 0.45 * std::max(0.0, n.dot(light));
      const double forward = depth * cos_b;
      base_row = cy + h * f / std::max(forward, 1e-6);
    }

    for (int v = 0; v < H; ++v) {
      const double row = v + 0.5;
      double intensity;
      if (has_hit && row < base_row) {
        const double forward = depth * cos_b;
        const double height = h + (cy - row) / f * forward;
        const double rings = band_noise(height * 3.0, look.ring_seed);
        intensity = look.albedo * (0.78 + 0.22 * stripe) * (0.9 + 0.1 * rings) * shade;
        intensity = fog(intensity, depth);
      } else if (row > cy) {
        const double forward = h * f / (row - cy);
        const double ground_range = forward / cos_b;
        const Vec2 g = origin + ground_range * dir;
        intensity = 0.36 + 0.10 * value_noise2(g.x() * 1.5, g.y() * 1.5, ground_seed) +
                    0.05 * value_noise2(g.x() * 6.0, g.y() * 6.0, ground_seed + 1);
        intensity = fog(intensity, ground_range);
      } else {
        intensity = 0.84 + 0.12 * (cy - row) / cy;
      }
      const std::uint64_t ph = hash_combine(noise_seed, static_cast<std::uint64_t>(v) * W + u);
      intensity += kPixelNoise * (2.0 * hash_unit(ph) - 1.0) * 1.7320508075688772;
      frame.pixels(u, v) = static_cast<float>(std::clamp(intensity, 0.0, 1.0));
      frame.true_depth(u, v) = depth;
    }
  }
  return frame;
}

}  // namespace rhc
