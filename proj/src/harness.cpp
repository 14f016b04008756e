#include "rhc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rhc {

using nlohmann::json;

// ---- corpus -----------------------------------------------------------------------

void Corpus::split(Eigen::MatrixXd& X_train, Eigen::VectorXd& y_train, Eigen::MatrixXd& X_hold,
                   Eigen::VectorXd& y_hold) const {
  const Eigen::Index n_hold = std::count(holdout.begin(), holdout.end(), 1);
  X_train.resize(rows() - n_hold, X.cols());
  y_train.resize(rows() - n_hold);
  X_hold.resize(n_hold, X.cols());
  y_hold.resize(n_hold);
  Eigen::Index a = 0, b = 0;
  for (Eigen::Index i = 0; i < rows(); ++i) {
    if (holdout[i]) {
      X_hold.row(b) = X.row(i);
      y_hold(b++) = y(i);
    } else {
      X_train.row(a) = X.row(i);
      y_train(a++) = y(i);
    }
  }
}

namespace {

double tree_clearance(const ForestScenario& sc, const Vec2& p) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& t : sc.trees) m = std::min(m, (t.center() - p).norm() - t.radius);
  return m;
}

}  // namespace

Corpus build_corpus(const CorpusConfig& c) {
  if (c.n_scenarios < 1 || c.frames_per_scenario < 1) throw std::invalid_argument("build_corpus: empty corpus");
  if (c.densities.empty()) throw std::invalid_argument("build_corpus: no densities");
  if (c.holdout_modulus < 2) throw std::invalid_argument("build_corpus: holdout modulus must be >= 2");
  const PatchGrid grid = PatchGrid::for_image(c.camera.width, c.camera.height, c.patch_size);
  const int ppf = (c.patches_per_frame <= 0 || c.patches_per_frame > grid.count()) ? grid.count() : c.patches_per_frame;
  FeatureExtractor fx(c.camera, grid, c.groups);

  Corpus corpus;
  corpus.layout = fx.layout();
  Eigen::Index total = 0;
  for (int id = 0; id < c.n_scenarios * c.frames_per_scenario; ++id)
    total += (c.full_holdout_frames && id % c.holdout_modulus == c.holdout_modulus - 1) ? grid.count() : ppf;
  corpus.X.resize(total, corpus.layout.dims());
  corpus.y.resize(total);
  corpus.frame.reserve(total);
  corpus.holdout.reserve(total);

  Eigen::MatrixXd rows;
  std::vector<int> all(grid.count());
  Eigen::Index at = 0;
  for (int s = 0; s < c.n_scenarios; ++s) {
    const double density = c.densities[s % c.densities.size()];
    const ForestScenario sc = generate_scenario(density, Bounds::corridor(c.side, c.side), hash_combine(c.seed, s));
    std::mt19937_64 rng(hash_combine(c.seed ^ 0xc0ffeeULL, s));
    std::uniform_real_distribution<double> ux(2.0, c.side - 2.0), uy(-0.5 * c.side + 2.0, 0.5 * c.side - 2.0);
    std::uniform_real_distribution<double> uw(-0.5, 0.5);
    std::normal_distribution<double> nyaw(0.0, 0.4);
    for (int f = 0; f < c.frames_per_scenario; ++f) {
      const int frame_id = s * c.frames_per_scenario + f;
      Vec2 pos;
      int tries = 0;
      do {
        pos = Vec2(ux(rng), uy(rng));
      } while (tree_clearance(sc, pos) < 0.4 && ++tries < 200);
      const double yaw = wrap_angle(nyaw(rng));
      const double wz = uw(rng);
      const double T = c.frame_period;
      const double mid = yaw - 0.5 * wz * T;
      const Pose2 cur{pos.x(), pos.y(), yaw};
      const Pose2 prev{pos.x() - c.speed * T * std::cos(mid), pos.y() - c.speed * T * std::sin(mid), wrap_angle(yaw - wz * T)};
      const double t0 = frame_id * 10.0;
      const Frame prev_frame = render(sc, prev, c.camera, t0);
      const Frame frame = render(sc, cur, c.camera, t0 + T);

      std::iota(all.begin(), all.end(), 0);
      for (int i = 0; i < ppf; ++i) {
        std::uniform_int_distribution<int> pick(i, grid.count() - 1);
        std::swap(all[i], all[pick(rng)]);
      }
      const bool hold = frame_id % c.holdout_modulus == c.holdout_modulus - 1;
      // the draw above still runs for held-out frames so training rows do not depend on the flag
      std::vector<int> chosen(all.begin(), all.begin() + ppf);
      if (hold && c.full_holdout_frames) {
        chosen.resize(grid.count());
        std::iota(chosen.begin(), chosen.end(), 0);
      }
      std::sort(chosen.begin(), chosen.end());
      fx.extract_rows(frame, &prev_frame, chosen, rows);
      const DepthGrid truth = true_patch_depth(frame, grid);
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        corpus.X.row(at) = rows.row(i);
        corpus.y(at) = truth.depth[chosen[i]];
        corpus.frame.push_back(frame_id);
        corpus.holdout.push_back(hold ? 1 : 0);
        ++at;
      }
    }
  }
  return corpus;
}

Corpus restrict_groups(const Corpus& corpus, const GroupSet& groups) {
  Corpus out;
  out.layout = FeatureLayout::for_groups(groups);
  out.y = corpus.y;
  out.frame = corpus.frame;
  out.holdout = corpus.holdout;
  out.X.resize(corpus.rows(), out.layout.dims());
  for (GroupSlot& slot : out.layout.slots) {
    const GroupSlot* src = corpus.layout.find(slot.group);
    if (src == nullptr) throw std::invalid_argument("restrict_groups: corpus lacks group " + std::string(group_name(slot.group)));
    slot.cost_ms = src->cost_ms;
    out.X.middleCols(slot.offset, slot.length) = corpus.X.middleCols(src->offset, src->length);
  }
  return out;
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# groups=" << corpus.layout.groups().to_string() << '\n';
  os << "# costs=";
  for (std::size_t i = 0; i < corpus.layout.slots.size(); ++i)
    os << (i ? "," : "") << corpus.layout.slots[i].cost_ms;
  os << '\n';
  os.precision(17);
  const auto names = corpus.layout.column_names();
  os << "frame,holdout";
  for (const auto& n : names) os << ',' << n;
  os << ",depth\n";
  for (Eigen::Index r = 0; r < corpus.rows(); ++r) {
    os << corpus.frame[r] << ',' << int(corpus.holdout[r]);
    for (Eigen::Index c = 0; c < corpus.X.cols(); ++c) os << ',' << corpus.X(r, c);
    os << ',' << corpus.y(r) << '\n';
  }
  if (!os) throw std::runtime_error("failed writing " + path);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  auto fail = [&](const std::string& what) { throw std::runtime_error(path + ": " + what); };
  if (!std::getline(is, line) || line.rfind("# groups=", 0) != 0) fail("missing groups line");
  GroupSet groups;
  {
    std::stringstream ss(line.substr(9));
    std::string g;
    while (std::getline(ss, g, ',')) groups.insert(parse_group(g));
  }
  Corpus c;
  c.layout = FeatureLayout::for_groups(groups);
  if (!std::getline(is, line) || line.rfind("# costs=", 0) != 0) fail("missing costs line");
  {
    std::stringstream ss(line.substr(8));
    std::string v;
    std::size_t i = 0;
    while (std::getline(ss, v, ',') && i < c.layout.slots.size()) c.layout.slots[i++].cost_ms = std::stod(v);
  }
  if (!std::getline(is, line)) fail("missing header");
  const int dims = c.layout.dims();
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    vals.reserve(dims + 3);
    const char* p = line.c_str();
    char* end = nullptr;
    while (*p) {
      vals.push_back(std::strtod(p, &end));
      if (end == p) fail("bad number");
      p = (*end == ',') ? end + 1 : end;
    }
    if (static_cast<int>(vals.size()) != dims + 3) fail("wrong column count");
    rows.push_back(std::move(vals));
  }
  c.X.resize(static_cast<Eigen::Index>(rows.size()), dims);
  c.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    c.frame.push_back(static_cast<int>(rows[r][0]));
    c.holdout.push_back(rows[r][1] != 0.0 ? 1 : 0);
    for (int j = 0; j < dims; ++j) c.X(static_cast<Eigen::Index>(r), j) = rows[r][2 + j];
    c.y(static_cast<Eigen::Index>(r)) = rows[r][2 + dims];
  }
  return c;
}

DepthModel train_model(const Corpus& corpus, const TrainConfig& config, const BudgetPlan& plan) {
  Corpus data = corpus;
  if (!plan.steps.empty()) {
    GroupSet groups;
    for (const auto& s : plan.steps) groups.insert(parse_group(s.name));
    data = restrict_groups(corpus, groups);
  }
  Eigen::MatrixXd Xt, Xh;
  Eigen::VectorXd yt, yh;
  data.split(Xt, yt, Xh, yh);
  DepthModel m;
  m.layout = data.layout;
  m.regressor = train_stagewise(Xt, yt, config.n_stages, config.options);
  const Eigen::VectorXd pred = m.regressor.predict(Xh).cwiseMax(kMinDepth).cwiseMin(kMaxDepth);
  m.lut = build_error_lut(pred, yh, config.lut_min_count);
  m.plan = plan;
  return m;
}

// ---- names ----------------------------------------------------------------------------

std::string_view mode_name(PredictionMode m) {
  switch (m) {
    case PredictionMode::oracle: return "oracle";
    case PredictionMode::single: return "single";
    case PredictionMode::multiple: return "multiple";
  }
  return "?";
}

PredictionMode parse_mode(std::string_view name) {
  if (name == "oracle") return PredictionMode::oracle;
  if (name == "single") return PredictionMode::single;
  if (name == "multiple") return PredictionMode::multiple;
  throw std::invalid_argument("unknown prediction mode '" + std::string(name) + "'");
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::goal_reached: return "goal_reached";
    case Outcome::collision: return "collision";
    case Outcome::max_distance: return "max_distance";
  }
  return "?";
}

std::string_view failure_name(FailureType f) {
  switch (f) {
    case FailureType::none: return "none";
    case FailureType::large_tree: return "large_tree";
    case FailureType::thin_tree: return "thin_tree";
    case FailureType::foliage_proxy: return "foliage_proxy";
    case FailureType::narrow_fov: return "narrow_fov";
  }
  return "?";
}

// ---- config -------------------------------------------------------------------------------

void RunConfig::validate() const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("RunConfig: " + what); };
  if (!(density >= 0.0)) bad("density must be >= 0");
  if (!(corridor_length > 0.0) || !(corridor_width > 0.0)) bad("corridor must be non-degenerate");
  if (!(speed > 0.0)) bad("speed must be positive");
  if (!(max_distance > 0.0) || !(max_time > 0.0)) bad("max_distance and max_time must be positive");
  if (!(vehicle_radius > 0.0)) bad("vehicle radius must be positive");
  if (projection_stride < 1) bad("projection stride must be >= 1");
  for (int r : {perception_rate, control_rate, flow_rate, imu_rate})
    if (r <= 0 || base_rate % r != 0) bad("every rate must divide the base rate");
  if (!(oracle_noise >= 0.0)) bad("oracle noise must be >= 0");
  camera.validate();
  flow_camera.validate();
  traj.validate();
  planner.validate();
  pursuit.validate();
  if (std::abs(pursuit.control_rate - control_rate) > 1e-12) bad("pursuit.control_rate must equal control_rate");
}

namespace {

json camera_json(const CameraModel& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"horizontal_fov", c.horizontal_fov},
          {"mount", c.mount == CameraMount::forward ? "forward" : "downward"},
          {"altitude", c.altitude}};
}

// Reads `key` into `out` when present and records it as consumed.
struct Reader {
  const json& j;
  std::vector<std::string> seen;
  template <typename T>
  void get(const char* key, T& out) {
    seen.emplace_back(key);
    if (j.contains(key)) out = j.at(key).get<T>();
  }
  template <typename F>
  void sub(const char* key, F&& f) {
    seen.emplace_back(key);
    if (j.contains(key)) {
      if (!j.at(key).is_object()) throw std::invalid_argument(std::string("config: '") + key + "' must be an object");
      f(j.at(key));
    }
  }
  void finish(const std::string& where) const {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (std::find(seen.begin(), seen.end(), it.key()) == seen.end())
        throw std::invalid_argument("config: unknown key '" + where + it.key() + "'");
  }
};

void read_camera(const json& j, CameraModel& c, const std::string& where) {
  Reader r{j, {}};
  r.get("width", c.width);
  r.get("height", c.height);
  r.get("horizontal_fov", c.horizontal_fov);
  std::string mount = c.mount == CameraMount::forward ? "forward" : "downward";
  r.get("mount", mount);
  if (mount != "forward" && mount != "downward") throw std::invalid_argument("config: bad camera mount");
  c.mount = mount == "forward" ? CameraMount::forward : CameraMount::downward;
  r.get("altitude", c.altitude);
  r.finish(where);
}

}  // namespace

json config_to_json(const RunConfig& c) {
  json j;
  j["density"] = c.density;
  j["corridor_length"] = c.corridor_length;
  j["corridor_width"] = c.corridor_width;
  j["seed"] = c.seed;
  j["scenario_file"] = c.scenario_file;
  j["scenario"] = {{"radius_min", c.scenario.radius_min},
                   {"radius_max", c.scenario.radius_max},
                   {"min_gap", c.scenario.min_gap},
                   {"start_clearance", c.scenario.start_clearance},
                   {"start_inset", c.scenario.start_inset}};
  j["mode"] = std::string(mode_name(c.mode));
  j["budget_ms"] = c.budget_ms;
  j["oracle_noise"] = c.oracle_noise;
  j["speed"] = c.speed;
  j["max_distance"] = c.max_distance;
  j["max_time"] = c.max_time;
  j["vehicle_radius"] = c.vehicle_radius;
  j["perfect_pose"] = c.perfect_pose;
  j["perception_delay"] = c.perception_delay;
  j["projection_stride"] = c.projection_stride;
  j["base_rate"] = c.base_rate;
  j["perception_rate"] = c.perception_rate;
  j["control_rate"] = c.control_rate;
  j["flow_rate"] = c.flow_rate;
  j["imu_rate"] = c.imu_rate;
  j["wobble_rate"] = c.wobble_rate;
  j["sonar_sigma"] = c.sonar_sigma;
  j["camera"] = camera_json(c.camera);
  j["flow_camera"] = camera_json(c.flow_camera);
  j["feature_flow_noise"] = {{"sigma_px", c.feature_flow_noise.sigma_px}, {"max_px", c.feature_flow_noise.max_px}};
  j["flow_grid"] = {{"grid", c.flow_grid.grid}, {"spacing_px", c.flow_grid.spacing_px}};
  j["flow_noise"] = {{"sigma_px", c.flow_noise.sigma_px},
                     {"p_out", c.flow_noise.p_out},
                     {"outlier_sigma_px", c.flow_noise.outlier_sigma_px}};
  j["imu"] = {{"rate", c.imu.rate}, {"noise_sigma", c.imu.noise_sigma}, {"bias", c.imu.bias}};
  j["gate"] = {{"sigma_gate_px", c.gate.sigma_gate_px}, {"gamma", c.gate.gamma}};
  j["traj"] = {{"grid", c.traj.grid},   {"length", c.traj.length}, {"ds", c.traj.ds},
               {"speed", c.traj.speed}, {"yaw_rate_max", c.traj.yaw_rate_max}, {"select", c.traj.select}};
  j["cloud"] = {{"tau", c.cloud.tau}, {"theta", c.cloud.theta}, {"capacity", c.cloud.capacity}, {"cell", c.cloud.cell}};
  j["planner"] = {{"w_dir", c.planner.w_dir},
                  {"w_trans", c.planner.w_trans},
                  {"robot_radius", c.planner.robot_radius},
                  {"replan_period", c.planner.replan_period},
                  {"goal_direction", {c.planner.goal_direction.x(), c.planner.goal_direction.y()}}};
  j["pursuit"] = {{"lookahead", c.pursuit.lookahead},       {"kp", c.pursuit.kp},
                  {"kd", c.pursuit.kd},                     {"v_cruise", c.pursuit.v_cruise},
                  {"v_max", c.pursuit.v_max},               {"control_rate", c.pursuit.control_rate},
                  {"yaw_rate_max", c.pursuit.yaw_rate_max}, {"invalid_hold", c.pursuit.invalid_hold}};
  j["encounter_radius"] = c.encounter_radius;
  j["large_tree_radius"] = c.large_tree_radius;
  j["foliage_radius"] = c.foliage_radius;
  j["fov_lookback"] = c.fov_lookback;
  j["log_path"] = c.log_path;
  return j;
}

RunConfig config_from_json(const json& j, const RunConfig& base) {
  if (!j.is_object()) throw std::invalid_argument("config: document must be an object");
  RunConfig c = base;
  try {
    Reader r{j, {}};
    r.get("density", c.density);
    r.get("corridor_length", c.corridor_length);
    r.get("corridor_width", c.corridor_width);
    r.get("seed", c.seed);
    r.get("scenario_file", c.scenario_file);
    r.sub("scenario", [&](const json& s) {
      Reader q{s, {}};
      q.get("radius_min", c.scenario.radius_min);
      q.get("radius_max", c.scenario.radius_max);
      q.get("min_gap", c.scenario.min_gap);
      q.get("start_clearance", c.scenario.start_clearance);
      q.get("start_inset", c.scenario.start_inset);
      q.finish("scenario.");
    });
    std::string mode(mode_name(c.mode));
    r.get("mode", mode);
    c.mode = parse_mode(mode);
    r.get("budget_ms", c.budget_ms);
    r.get("oracle_noise", c.oracle_noise);
    r.get("speed", c.speed);
    r.get("max_distance", c.max_distance);
    r.get("max_time", c.max_time);
    r.get("vehicle_radius", c.vehicle_radius);
    r.get("perfect_pose", c.perfect_pose);
    r.get("perception_delay", c.perception_delay);
    r.get("projection_stride", c.projection_stride);
    r.get("base_rate", c.base_rate);
    r.get("perception_rate", c.perception_rate);
    r.get("control_rate", c.control_rate);
    r.get("flow_rate", c.flow_rate);
    r.get("imu_rate", c.imu_rate);
    r.get("wobble_rate", c.wobble_rate);
    r.get("sonar_sigma", c.sonar_sigma);
    r.sub("camera", [&](const json& s) { read_camera(s, c.camera, "camera."); });
    r.sub("flow_camera", [&](const json& s) { read_camera(s, c.flow_camera, "flow_camera."); });
    r.sub("feature_flow_noise", [&](const json& s) {
      Reader q{s, {}};
      q.get("sigma_px", c.feature_flow_noise.sigma_px);
      q.get("max_px", c.feature_flow_noise.max_px);
      q.finish("feature_flow_noise.");
    });
    r.sub("flow_grid", [&](const json& s) {
      Reader q{s, {}};
      q.get("grid", c.flow_grid.grid);
      q.get("spacing_px", c.flow_grid.spacing_px);
      q.finish("flow_grid.");
    });
    r.sub("flow_noise", [&](const json& s) {
      Reader q{s, {}};
      q.get("sigma_px", c.flow_noise.sigma_px);
      q.get("p_out", c.flow_noise.p_out);
      q.get("outlier_sigma_px", c.flow_noise.outlier_sigma_px);
      q.finish("flow_noise.");
    });
    r.sub("imu", [&](const json& s) {
      Reader q{s, {}};
      q.get("rate", c.imu.rate);
      q.get("noise_sigma", c.imu.noise_sigma);
      q.get("bias", c.imu.bias);
      q.finish("imu.");
    });
    r.sub("gate", [&](const json& s) {
      Reader q{s, {}};
      q.get("sigma_gate_px", c.gate.sigma_gate_px);
      q.get("gamma", c.gate.gamma);
      q.finish("gate.");
    });
    r.sub("traj", [&](const json& s) {
      Reader q{s, {}};
      q.get("grid", c.traj.grid);
      q.get("length", c.traj.length);
      q.get("ds", c.traj.ds);
      q.get("speed", c.traj.speed);
      q.get("yaw_rate_max", c.traj.yaw_rate_max);
      q.get("select", c.traj.select);
      q.finish("traj.");
    });
    r.sub("cloud", [&](const json& s) {
      Reader q{s, {}};
      q.get("tau", c.cloud.tau);
      q.get("theta", c.cloud.theta);
      q.get("capacity", c.cloud.capacity);
      q.get("cell", c.cloud.cell);
      q.finish("cloud.");
    });
    r.sub("planner", [&](const json& s) {
      Reader q{s, {}};
      q.get("w_dir", c.planner.w_dir);
      q.get("w_trans", c.planner.w_trans);
      q.get("robot_radius", c.planner.robot_radius);
      q.get("replan_period", c.planner.replan_period);
      std::vector<double> g{c.planner.goal_direction.x(), c.planner.goal_direction.y()};
      q.get("goal_direction", g);
      if (g.size() != 2) throw std::invalid_argument("config: planner.goal_direction needs two values");
      c.planner.goal_direction = Vec2(g[0], g[1]);
      q.finish("planner.");
    });
    r.sub("pursuit", [&](const json& s) {
      Reader q{s, {}};
      q.get("lookahead", c.pursuit.lookahead);
      q.get("kp", c.pursuit.kp);
      q.get("kd", c.pursuit.kd);
      q.get("v_cruise", c.pursuit.v_cruise);
      q.get("v_max", c.pursuit.v_max);
      q.get("control_rate", c.pursuit.control_rate);
      q.get("yaw_rate_max", c.pursuit.yaw_rate_max);
      q.get("invalid_hold", c.pursuit.invalid_hold);
      q.finish("pursuit.");
    });
    r.get("encounter_radius", c.encounter_radius);
    r.get("large_tree_radius", c.large_tree_radius);
    r.get("foliage_radius", c.foliage_radius);
    r.get("fov_lookback", c.fov_lookback);
    r.get("log_path", c.log_path);
    r.finish("");
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
}

json report_to_json(const RunReport& r) {
  return {{"seed", r.seed},
          {"mode", std::string(mode_name(r.mode))},
          {"density", r.density},
          {"distance_flown", r.distance_flown},
          {"sim_time", r.sim_time},
          {"outcome", std::string(outcome_name(r.outcome))},
          {"trees_encountered", r.trees_encountered},
          {"trees_avoided", r.trees_avoided},
          {"large_encountered", r.large_encountered},
          {"large_avoided", r.large_avoided},
          {"small_encountered", r.small_encountered},
          {"small_avoided", r.small_avoided},
          {"failure_type", std::string(failure_name(r.failure))},
          {"collided_tree", r.collided_tree},
          {"collided_radius", r.collided_radius},
          {"planning_cycles", r.planning_cycles},
          {"gated_flow_frames", r.gated_flow_frames},
          {"final_pose_error", r.final_pose_error},
          {"log_path", r.log_path}};
}

// ---- closed loop ------------------------------------------------------------------------

ForestScenario episode_scenario(const RunConfig& c, std::uint64_t seed) {
  if (!c.scenario_file.empty()) return load_scenario(c.scenario_file);
  const Bounds b = Bounds::corridor(c.corridor_length, c.corridor_width);
  if (c.density <= 0.0) {
    ForestScenario sc;
    sc.bounds = b;
    sc.seed = seed;
    sc.goal_direction = c.scenario.goal_direction;
    sc.start = Vec2(b.x_min + c.scenario.start_inset, 0.5 * (b.y_min + b.y_max));
    return sc;
  }
  return generate_scenario(c.density, b, seed, c.scenario);
}

ForestScenario dodge_scenario(std::uint64_t variant) {
  ForestScenario sc;
  sc.bounds = Bounds::corridor(40.0, 20.0);
  sc.seed = 1000 + variant;
  sc.start = Vec2(2.5, 0.0);
  sc.goal_direction = Vec2(1.0, 0.0);
  auto jitter = [&](std::uint64_t k) { return 0.1 * (hash_unit(hash_combine(variant, k)) - 0.5); };
  // Trunk A sits just right of the line, so the first dodge goes left. A row of
  // trunks across the left half then forces a hard right turn back past A,
  // which by then is beside the vehicle and out of the camera's view.
  sc.trees.push_back({8.47 + jitter(1), -0.87 + jitter(2), 0.3});
  const double wx = 12.16 + jitter(3);
  const double wy = -0.89 + jitter(4);
  for (int i = 0; i < 8; ++i) sc.trees.push_back({wx, wy + 0.8 * i, 0.3});
  sc.density = static_cast<double>(sc.trees.size()) / sc.bounds.area();
  return sc;
}

Harness::Harness(const RunConfig& config, const DepthModel* model, const TrajectoryLibrary* library)
    : config_(config), model_(model), library_(library) {
  config_.validate();
  if (config_.mode != PredictionMode::oracle) {
    if (model_ == nullptr) throw std::invalid_argument("Harness: learned prediction modes need a model");
    if (config_.budget_ms >= 0.0) {
      double cost = 0.0;
      for (const auto& s : model_->layout.slots) cost += s.cost_ms;
      if (cost > config_.budget_ms)
        throw std::invalid_argument("Harness: model feature cost exceeds budget_ms; select features and retrain");
    }
  }
  if (library_ == nullptr) {
    own_library_ = build_library(config_.traj);
    library_ = &*own_library_;
  }
}

RunReport Harness::run_episode(std::uint64_t seed, RunTimings* timings) {
  RunReport r = run_episode(episode_scenario(config_, seed), timings);
  r.seed = seed;
  return r;
}

namespace {

bool in_frustum(const Tree& t, const Pose2& pose, const CameraModel& camera) {
  const Vec2 rel = pose.to_body(t.center());
  const double dist = rel.norm();
  if (dist <= t.radius) return true;
  if (dist - t.radius > kMaxDepth) return false;
  const double bearing = std::atan2(rel.y(), rel.x());
  const double half = 0.5 * camera.horizontal_fov + std::asin(std::min(1.0, t.radius / dist));
  return std::abs(bearing) <= half;
}

}  // namespace

RunReport Harness::run_episode(const ForestScenario& scenario, RunTimings* timings) {
  using Clock = std::chrono::steady_clock;
  const auto wall0 = Clock::now();
  const RunConfig& c = config_;
  RunReport report;
  report.seed = scenario.seed;
  report.mode = c.mode;
  report.density = scenario.density;
  report.log_path = c.log_path;

  const int per_div = c.base_rate / c.perception_rate;
  const int ctl_div = c.base_rate / c.control_rate;
  const int flow_div = c.base_rate / c.flow_rate;
  const int imu_div = c.base_rate / c.imu_rate;
  const double dt = 1.0 / c.base_rate;
  const std::uint64_t seed = scenario.seed;
  const std::uint64_t flow_seed = hash_combine(seed, 0xf10fULL);
  const std::uint64_t imu_seed = hash_combine(seed, 0x1e0ULL);
  const double wob_phase = 2.0 * kPi * hash_unit(hash_combine(seed, 0x77ULL));

  const PatchGrid grid = PatchGrid::for_image(c.camera.width, c.camera.height,
                                              model_ != nullptr ? model_->patch_size : 16);
  std::optional<DepthPredictor> predictor;
  if (c.mode != PredictionMode::oracle) predictor.emplace(*model_, c.camera, c.feature_flow_noise);
  const InterpretationMode imode =
      c.mode == PredictionMode::multiple ? InterpretationMode::multiple : InterpretationMode::single;

  std::array<ScoredCloud, 3> clouds{ScoredCloud(c.cloud), ScoredCloud(c.cloud), ScoredCloud(c.cloud)};
  std::vector<const ScoredCloud*> active;
  if (imode == InterpretationMode::multiple)
    active = {&clouds[0], &clouds[1], &clouds[2]};
  else
    active = {&clouds[static_cast<int>(Interpretation::point)]};

  VehicleState truth;
  truth.position = scenario.start;
  truth.yaw = scenario.start_yaw();
  PoseIntegrator odom(truth.pose(), 0.0);
  std::vector<ImuReading> imu;
  Vec2 prev_velocity = Vec2::Zero();
  PursuitController controller(c.pursuit);
  ControlCommand cmd{c.speed, 0.0};
  PlannerConfig pcfg = c.planner;
  pcfg.goal_direction = scenario.goal_direction;

  const TrajectoryLibrary& lib = *library_;
  std::vector<Pose2> path = to_world(lib.dense.at(straightest(lib.dense)), truth.pose());
  std::optional<std::vector<Pose2>> pending;
  std::optional<Frame> prev_frame;

  std::vector<double> last_seen(scenario.trees.size(), -std::numeric_limits<double>::infinity());
  std::vector<char> encountered(scenario.trees.size(), 0);

  std::ofstream log;
  if (!c.log_path.empty()) {
    log.open(c.log_path);
    if (!log) throw std::runtime_error("cannot write log " + c.log_path);
  }

  double perception_ms_sum = 0.0, planning_ms_sum = 0.0;
  double perception_ms_max = 0.0, planning_ms_max = 0.0;
  int timed_cycles = 0;

  auto est_pose = [&]() { return c.perfect_pose ? truth.pose() : odom.estimate().pose(); };
  auto wobble = [&](double t) {
    return Vec2(c.wobble_rate * std::sin(2.0 * kPi * 1.3 * t + wob_phase),
                c.wobble_rate * std::cos(2.0 * kPi * 0.9 * t + 0.5 * wob_phase));
  };

  for (long k = 0;; ++k) {
    const double t = k * dt;
    const Vec2 wob = wobble(t);

    if (k % imu_div == 0) {
      imu.push_back(simulate_imu(Vec3(wob.x(), wob.y(), cmd.yaw_rate), t, c.imu, imu_seed));
      if (imu.size() > 64) imu.erase(imu.begin(), imu.begin() + 32);
    }

    if (k % flow_div == 0 && k > 0) {
      const BodyMotion motion{Vec2(cmd.forward_speed, 0.0), Vec3(wob.x(), wob.y(), cmd.yaw_rate)};
      const FlowSample raw =
          simulate_flow(motion, c.flow_camera.altitude, c.flow_camera, c.flow_grid, c.flow_noise, c.flow_rate, flow_seed, t);
      const ImuReading& reading = nearest_reading(imu, t);
      const FlowSample flat = unrotate(raw, reading, c.flow_camera);
      const double sonar = c.flow_camera.altitude + c.sonar_sigma * hash_normal(hash_combine(flow_seed, hash_double(t)));
      const VelocityEstimate v = estimate_velocity(flat, sonar, prev_velocity, c.flow_camera, c.gate);
      if (!v.valid) ++report.gated_flow_frames;
      prev_velocity = v.velocity;
      odom.update(v, reading.angular_velocity.z(), 1.0 / c.flow_rate);
    }

    if (k % per_div == 0) {
      const auto p0 = Clock::now();
      const Frame frame = render(scenario, truth.pose(), c.camera, t);
      for (std::size_t i = 0; i < scenario.trees.size(); ++i)
        if (in_frustum(scenario.trees[i], truth.pose(), c.camera)) last_seen[i] = t;
      const Pose2 pose = est_pose();
      bool planned = false;
      if (c.mode == PredictionMode::oracle || prev_frame) {
        DepthGrid depth = c.mode == PredictionMode::oracle
                              ? oracle_predict(frame, grid, c.oracle_noise, hash_combine(seed, 0x0aceULL))
                              : predictor->predict(frame, &*prev_frame);
        const ErrorLUT empty_lut;
        const InterpretationSet set =
            expand_interpretations(depth, model_ != nullptr ? model_->lut : empty_lut, imode);
        for (std::size_t i = 0; i < set.grids.size(); ++i) {
          const auto pts = project_to_points(set.grids[i], c.camera, pose, grid.patch_size, c.projection_stride);
          clouds[static_cast<int>(set.tags[i])].insert(to_scored(pts, set.tags[i], t), t);
        }
        for (auto& cl : clouds) cl.prune(t);
        planned = true;
      }
      const auto p1 = Clock::now();
      if (planned) {
        const PlanResult result = plan(lib, active, pose, pcfg, t);
        ++report.planning_cycles;
        if (c.perception_delay) {
          if (pending) path = *pending;
          pending = result.world_path;
        } else {
          path = result.world_path;
        }
        if (log.is_open()) {
          std::vector<const TrajectoryScore*> order;
          for (const auto& s : result.scores) order.push_back(&s);
          std::sort(order.begin(), order.end(), [](const TrajectoryScore* a, const TrajectoryScore* b) {
            return a->total != b->total ? a->total < b->total : a->traj_id < b->traj_id;
          });
          json top = json::array();
          for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i)
            top.push_back({{"id", order[i]->traj_id},
                           {"total", order[i]->total},
                           {"collision", order[i]->collision},
                           {"direction", order[i]->direction_penalty},
                           {"translation", order[i]->translation_penalty}});
          json sizes = json::array();
          for (const auto* cl : active) sizes.push_back(cl->size());
          log << json{{"t", t},
                      {"chosen", result.traj_id},
                      {"pose_est", {pose.x, pose.y, pose.yaw}},
                      {"pose_true", {truth.position.x(), truth.position.y(), truth.yaw}},
                      {"cloud_points", sizes},
                      {"top", top}}
                     .dump()
              << '\n';
        }
        const auto p2 = Clock::now();
        const double pm = std::chrono::duration<double, std::milli>(p1 - p0).count();
        const double qm = std::chrono::duration<double, std::milli>(p2 - p1).count();
        perception_ms_sum += pm;
        planning_ms_sum += qm;
        perception_ms_max = std::max(perception_ms_max, pm);
        planning_ms_max = std::max(planning_ms_max, qm);
        ++timed_cycles;
      }
      prev_frame = frame;
    }

    if (k % ctl_div == 0) {
      const double invalid_for = c.perfect_pose ? 0.0 : t - odom.estimate().last_valid_time;
      cmd = controller.step(path, est_pose(), invalid_for);
      for (std::size_t i = 0; i < scenario.trees.size(); ++i)
        if (!encountered[i] && (scenario.trees[i].center() - truth.position).norm() <= c.encounter_radius)
          encountered[i] = 1;
    }

    const Vec2 before = truth.position;
    truth = step_vehicle(truth, cmd.forward_speed, cmd.yaw_rate, dt);
    report.distance_flown += (truth.position - before).norm();
    report.sim_time = truth.time;

    if (auto hit = colliding_tree(scenario, truth.position, c.vehicle_radius)) {
      report.outcome = Outcome::collision;
      report.collided_tree = static_cast<int>(*hit);
      const Tree& tree = scenario.trees[*hit];
      report.collided_radius = tree.radius;
      encountered[*hit] = 1;
      if (last_seen[*hit] < truth.time - c.fov_lookback)
        report.failure = FailureType::narrow_fov;
      else if (tree.radius < c.foliage_radius)
        report.failure = FailureType::foliage_proxy;
      else if (tree.radius < c.large_tree_radius)
        report.failure = FailureType::thin_tree;
      else
        report.failure = FailureType::large_tree;
      break;
    }
    if (!scenario.bounds.contains(truth.position)) {
      report.outcome = Outcome::goal_reached;
      break;
    }
    if (report.distance_flown >= c.max_distance || truth.time >= c.max_time) {
      report.outcome = Outcome::max_distance;
      break;
    }
  }

  for (std::size_t i = 0; i < scenario.trees.size(); ++i) {
    if (!encountered[i]) continue;
    const bool large = scenario.trees[i].radius >= c.large_tree_radius;
    const bool avoided = static_cast<int>(i) != report.collided_tree;
    ++report.trees_encountered;
    report.trees_avoided += avoided;
    if (large) {
      ++report.large_encountered;
      report.large_avoided += avoided;
    } else {
      ++report.small_encountered;
      report.small_avoided += avoided;
    }
  }
  report.final_pose_error = (est_pose().position() - truth.position).norm();

  if (timings != nullptr) {
    const int n = std::max(1, timed_cycles);
    timings->perception_ms_mean = perception_ms_sum / n;
    timings->perception_ms_max = perception_ms_max;
    timings->planning_ms_mean = planning_ms_sum / n;
    timings->planning_ms_max = planning_ms_max;
    timings->total_s = std::chrono::duration<double>(Clock::now() - wall0).count();
  }
  return report;
}

// ---- evaluation -------------------------------------------------------------------------

ModeSummary summarize(const std::string& label, const std::vector<RunReport>& reports) {
  ModeSummary s;
  s.label = label;
  for (const auto& r : reports) {
    ++s.episodes;
    s.total_distance += r.distance_flown;
    s.collisions += r.outcome == Outcome::collision;
    s.encountered += r.trees_encountered;
    s.avoided += r.trees_avoided;
    s.large_encountered += r.large_encountered;
    s.large_avoided += r.large_avoided;
    s.small_encountered += r.small_encountered;
    s.small_avoided += r.small_avoided;
    ++s.failures[static_cast<int>(r.failure)];
  }
  return s;
}

double sign_test_p(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  const int k = std::min(wins, losses);
  // P(X <= k) for X ~ Binomial(n, 1/2), in log space.
  double tail = 0.0;
  for (int i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, 2.0 * tail);
}

PairedComparison compare_paired(const std::vector<RunReport>& a, const std::vector<RunReport>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("compare_paired: unequal seed counts");
  PairedComparison pc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed != b[i].seed) throw std::invalid_argument("compare_paired: seeds are not paired");
    const double d = a[i].distance_flown - b[i].distance_flown;
    if (std::abs(d) < 1e-9)
      ++pc.ties;
    else if (d > 0.0)
      ++pc.wins;
    else
      ++pc.losses;
  }
  pc.p_value = sign_test_p(pc.wins, pc.losses);
  return pc;
}

SuiteResult evaluate_suite(const std::vector<SuiteEntry>& entries, const DepthModel* model, int n_seeds,
                           std::uint64_t first_seed) {
  if (n_seeds < 1) throw std::invalid_argument("evaluate_suite: need at least one seed");
  SuiteResult out;
  std::optional<TrajectoryLibrary> lib;
  for (const auto& e : entries) {
    if (!lib || !(lib->config.grid == e.config.traj.grid && lib->config.select == e.config.traj.select &&
                  lib->config.length == e.config.traj.length && lib->config.ds == e.config.traj.ds &&
                  lib->config.speed == e.config.traj.speed && lib->config.yaw_rate_max == e.config.traj.yaw_rate_max))
      lib = build_library(e.config.traj);
    Harness h(e.config, model, &*lib);
    std::vector<RunReport> reports;
    for (int s = 0; s < n_seeds; ++s) reports.push_back(h.run_episode(first_seed + s));
    out.summaries.push_back(summarize(e.label, reports));
    out.reports.push_back(std::move(reports));
  }
  return out;
}

void write_reports_csv(std::ostream& os, const SuiteResult& result, const std::vector<SuiteEntry>& entries) {
  os << "label,seed,mode,density,distance_flown,outcome,trees_encountered,trees_avoided,large_encountered,"
        "large_avoided,small_encountered,small_avoided,failure_type,collided_radius\n";
  const auto prec = os.precision(10);
  for (std::size_t e = 0; e < result.reports.size(); ++e)
    for (const auto& r : result.reports[e])
      os << entries.at(e).label << ',' << r.seed << ',' << mode_name(r.mode) << ',' << r.density << ','
         << r.distance_flown << ',' << outcome_name(r.outcome) << ',' << r.trees_encountered << ',' << r.trees_avoided
         << ',' << r.large_encountered << ',' << r.large_avoided << ',' << r.small_encountered << ','
         << r.small_avoided << ',' << failure_name(r.failure) << ',' << r.collided_radius << '\n';
  os.precision(prec);
}

void write_summary_csv(std::ostream& os, const std::vector<ModeSummary>& summaries) {
  os << "label,episodes,total_distance,collisions,distance_per_collision,mean_episode_distance,avoidance_pct,"
        "large_avoidance_pct,small_avoidance_pct,large_tree,thin_tree,foliage_proxy,narrow_fov\n";
  const auto prec = os.precision(10);
  for (const auto& s : summaries)
    os << s.label << ',' << s.episodes << ',' << s.total_distance << ',' << s.collisions << ','
       << s.distance_per_collision() << ',' << s.mean_episode_distance() << ',' << s.avoidance_pct() << ','
       << s.large_avoidance_pct() << ',' << s.small_avoidance_pct() << ','
       << s.failures[static_cast<int>(FailureType::large_tree)] << ','
       << s.failures[static_cast<int>(FailureType::thin_tree)] << ','
       << s.failures[static_cast<int>(FailureType::foliage_proxy)] << ','
       << s.failures[static_cast<int>(FailureType::narrow_fov)] << '\n';
  os.precision(prec);
}

json summary_to_json(const ModeSummary& s) {
  json f;
  for (int i = 1; i < 5; ++i) f[std::string(failure_name(static_cast<FailureType>(i)))] = s.failures[i];
  return {{"label", s.label},
          {"episodes", s.episodes},
          {"total_distance", s.total_distance},
          {"collisions", s.collisions},
          {"distance_per_collision", s.distance_per_collision()},
          {"mean_episode_distance", s.mean_episode_distance()},
          {"trees_encountered", s.encountered},
          {"trees_avoided", s.avoided},
          {"avoidance_pct", s.avoidance_pct()},
          {"large_avoidance_pct", s.large_avoidance_pct()},
          {"small_avoidance_pct", s.small_avoidance_pct()},
          {"failures", f}};
}

}  // namespace rhc
