#pragma once

// Experiment orchestration: corpus generation, model training, the lockstep
// closed-loop simulation and paired-seed evaluation.

#include "rhc/control.hpp"
#include "rhc/costmap.hpp"
#include "rhc/learn.hpp"
#include "rhc/perception.hpp"
#include "rhc/planner.hpp"
#include "rhc/pose_flow.hpp"
#include "rhc/sim_world.hpp"
#include "rhc/traj_lib.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rhc {

// ---- corpus ---------------------------------------------------------------------

struct CorpusConfig {
  int n_scenarios{40};
  int frames_per_scenario{100};
  int patches_per_frame{60};  // 0 = every patch
  std::uint64_t seed{1};
  std::vector<double> densities{1.0 / 36.0, 1.0 / 72.0, 1.0 / 144.0};
  double side{60.0};
  double speed{1.5};
  double frame_period{0.2};  // spacing of the previous frame used for flow
  int holdout_modulus{10};   // frames with index % modulus == modulus - 1 are held out
  bool full_holdout_frames{true};  // held-out frames keep every patch (more rows for the LUT)
  GroupSet groups{GroupSet::all()};
  CameraModel camera;
  int patch_size{16};
};

struct Corpus {
  FeatureLayout layout;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> frame;     // frame index per row
  std::vector<char> holdout;  // per row

  [[nodiscard]] Eigen::Index rows() const { return X.rows(); }
  void split(Eigen::MatrixXd& X_train, Eigen::VectorXd& y_train, Eigen::MatrixXd& X_hold,
             Eigen::VectorXd& y_hold) const;
};

Corpus build_corpus(const CorpusConfig& config);

/// Columns of the corpus restricted to a subset of its groups.
Corpus restrict_groups(const Corpus& corpus, const GroupSet& groups);

void save_corpus(const std::string& path, const Corpus& corpus);  // CSV with split/frame columns
Corpus load_corpus(const std::string& path);

struct TrainConfig {
  int n_stages{3};
  TrainOptions options;
  int lut_min_count{20};
};

/// Trains on the training rows and builds the LUT from the holdout rows.
DepthModel train_model(const Corpus& corpus, const TrainConfig& config, const BudgetPlan& plan = {});

// ---- closed loop ----------------------------------------------------------------

enum class PredictionMode { oracle, single, multiple };
std::string_view mode_name(PredictionMode m);
PredictionMode parse_mode(std::string_view name);

enum class Outcome { goal_reached, collision, max_distance };
std::string_view outcome_name(Outcome o);

enum class FailureType { none, large_tree, thin_tree, foliage_proxy, narrow_fov };
std::string_view failure_name(FailureType f);

struct RunConfig {
  // scenario
  double density{1.0 / 36.0};
  double corridor_length{80.0};
  double corridor_width{40.0};
  std::uint64_t seed{1};
  std::string scenario_file;  // overrides the generated forest when set
  ScenarioOptions scenario;

  PredictionMode mode{PredictionMode::multiple};
  double budget_ms{-1.0};     // < 0: every group of the model
  double oracle_noise{0.0};   // log-normal sigma for oracle mode
  double speed{1.5};
  double max_distance{40.0};
  double max_time{120.0};
  double vehicle_radius{0.25};
  bool perfect_pose{false};
  bool perception_delay{false};  // apply each plan one perception cycle late
  int projection_stride{1};

  // rates (Hz); each must divide base_rate
  int base_rate{600};
  int perception_rate{5};
  int control_rate{50};
  int flow_rate{100};
  int imu_rate{200};

  double wobble_rate{0.3};   // roll/pitch rate amplitude, rad/s
  double sonar_sigma{0.005};

  CameraModel camera;
  CameraModel flow_camera{CameraModel::downward_default()};
  FlowNoise feature_flow_noise;
  FlowGridConfig flow_grid;
  FlowNoiseConfig flow_noise;
  ImuConfig imu;
  GateConfig gate;
  TrajLibConfig traj;
  CloudConfig cloud;
  PlannerConfig planner;
  PursuitConfig pursuit;

  double encounter_radius{3.0};
  double large_tree_radius{0.25};
  double foliage_radius{0.1};
  double fov_lookback{2.0};

  std::string log_path;  // JSON lines, one record per planning cycle

  /// Throws std::invalid_argument.
  void validate() const;
};

nlohmann::json config_to_json(const RunConfig& config);
/// Starts from `base` and overwrites every key present; unknown keys throw.
RunConfig config_from_json(const nlohmann::json& doc, const RunConfig& base = {});
/// Applies "a.b.c=value" overrides (value parsed as JSON, else as a string).
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct RunReport {
  std::uint64_t seed{0};
  PredictionMode mode{PredictionMode::multiple};
  double density{0.0};
  double distance_flown{0.0};
  double sim_time{0.0};
  Outcome outcome{Outcome::max_distance};
  int trees_encountered{0};
  int trees_avoided{0};
  int large_encountered{0};
  int large_avoided{0};
  int small_encountered{0};
  int small_avoided{0};
  FailureType failure{FailureType::none};
  int collided_tree{-1};
  double collided_radius{0.0};
  int planning_cycles{0};
  int gated_flow_frames{0};
  double final_pose_error{0.0};
  std::string log_path;
};

nlohmann::json report_to_json(const RunReport& report);

/// Wall-clock accounting, kept apart from the report so reports stay reproducible.
struct RunTimings {
  double perception_ms_mean{0.0};
  double perception_ms_max{0.0};
  double planning_ms_mean{0.0};
  double planning_ms_max{0.0};
  double total_s{0.0};
};

class Harness {
 public:
  /// `model` may be null for oracle mode.
  Harness(const RunConfig& config, const DepthModel* model, const TrajectoryLibrary* library = nullptr);
  RunReport run_episode(std::uint64_t seed, RunTimings* timings = nullptr);
  RunReport run_episode(const ForestScenario& scenario, RunTimings* timings = nullptr);

  [[nodiscard]] const RunConfig& config() const { return config_; }
  [[nodiscard]] const TrajectoryLibrary& library() const { return *library_; }

 private:
  RunConfig config_;
  const DepthModel* model_;
  std::optional<TrajectoryLibrary> own_library_;
  const TrajectoryLibrary* library_;
};

ForestScenario episode_scenario(const RunConfig& config, std::uint64_t seed);

/// Dodge and re-dodge: one trunk just right of the start line, then a row of
/// trunks on the left that forces a turn back past the first one while it is
/// outside the field of view.
ForestScenario dodge_scenario(std::uint64_t variant = 0);

// ---- evaluation -----------------------------------------------------------------

struct ModeSummary {
  std::string label;
  int episodes{0};
  double total_distance{0.0};
  int collisions{0};
  int encountered{0};
  int avoided{0};
  int large_encountered{0};
  int large_avoided{0};
  int small_encountered{0};
  int small_avoided{0};
  std::array<int, 5> failures{};  // indexed by FailureType

  [[nodiscard]] double avoidance_pct() const { return encountered ? 100.0 * avoided / encountered : 100.0; }
  [[nodiscard]] double large_avoidance_pct() const {
    return large_encountered ? 100.0 * large_avoided / large_encountered : 100.0;
  }
  [[nodiscard]] double small_avoidance_pct() const {
    return small_encountered ? 100.0 * small_avoided / small_encountered : 100.0;
  }
  /// Distance flown per collision (total distance when collision-free).
  [[nodiscard]] double distance_per_collision() const { return total_distance / std::max(1, collisions); }
  [[nodiscard]] double mean_episode_distance() const { return episodes ? total_distance / episodes : 0.0; }
};

ModeSummary summarize(const std::string& label, const std::vector<RunReport>& reports);

struct PairedComparison {
  int wins{0};    // seeds where the first mode flew farther
  int losses{0};
  int ties{0};
  double p_value{1.0};  // two-sided exact sign test
};

PairedComparison compare_paired(const std::vector<RunReport>& a, const std::vector<RunReport>& b);
/// Two-sided exact binomial sign test.
double sign_test_p(int wins, int losses);

struct SuiteEntry {
  std::string label;
  RunConfig config;
};

struct SuiteResult {
  std::vector<std::vector<RunReport>> reports;  // per entry, per seed
  std::vector<ModeSummary> summaries;
};

/// Runs every entry on seeds first_seed .. first_seed + n_seeds - 1.
SuiteResult evaluate_suite(const std::vector<SuiteEntry>& entries, const DepthModel* model, int n_seeds,
                           std::uint64_t first_seed = 1);

void write_reports_csv(std::ostream& os, const SuiteResult& result, const std::vector<SuiteEntry>& entries);
void write_summary_csv(std::ostream& os, const std::vector<ModeSummary>& summaries);
nlohmann::json summary_to_json(const ModeSummary& s);

}  // namespace rhc
