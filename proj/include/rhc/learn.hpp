#pragma once

// Training-time machinery: stagewise ridge regression, budgeted greedy
// feature-group selection and the over/under-prediction lookup table.

#include "rhc/features.hpp"

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace rhc {

// ---- stagewise regression -----------------------------------------------------

/// Number of scalar basis functions applied to the previous stage's output:
/// p, p^2, max(p, 0) * p, log(1 + |p|).
inline constexpr int kStageBasis = 4;

std::array<double, kStageBasis> stage_basis(double p);

struct RegressionStage {
  double bias{0.0};
  Eigen::VectorXd weights;  // on standardized features
  // Stages after the first: coefficient of p (unpenalized) and of the three
  // standardized non-linear basis terms.
  double p_weight{0.0};
  std::array<double, kStageBasis - 1> basis_weights{};
  std::array<double, kStageBasis - 1> basis_mean{};
  std::array<double, kStageBasis - 1> basis_scale{1.0, 1.0, 1.0};
  double lambda{0.0};  // ridge strength actually used
  double train_rmse{0.0};
};

struct TrainOptions {
  /// Ridge penalty on the mean-squared-error objective: mean((y - f)^2) + lambda * |w|^2
  /// over standardized features. The bias and the previous-stage output are not penalized.
  double lambda{1e-4};
  /// Retries with lambda * 10 on a singular system before giving up.
  int max_retries{3};
  /// Rows per block when accumulating normal equations.
  int block_rows{8192};
};

class StagewiseRegressor {
 public:
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;
  std::vector<RegressionStage> stages;

  [[nodiscard]] int dims() const { return static_cast<int>(feature_mean.size()); }
  [[nodiscard]] int n_stages() const { return static_cast<int>(stages.size()); }
  /// Output of the first `n` stages (all when n < 0).
  [[nodiscard]] Eigen::VectorXd predict(const Eigen::MatrixXd& X, int n = -1) const;
  [[nodiscard]] double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

/// Throws std::invalid_argument on shape errors or too few rows (|y| < 10 * dims)
/// and std::runtime_error when the normal equations stay singular after retries.
StagewiseRegressor train_stagewise(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n_stages,
                                   const TrainOptions& options = {});

double rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth);

// ---- budgeted group selection ---------------------------------------------------

/// A named block of contiguous columns of the design matrix.
struct ColumnGroup {
  std::string name;
  int offset{0};
  int length{0};
  double cost_ms{0.0};
};

std::vector<ColumnGroup> column_groups(const FeatureLayout& layout);

struct PlanStep {
  int group{0};  // index into the candidate groups
  std::string name;
  double cumulative_cost_ms{0.0};
  double explained_gain{0.0};   // training variance fraction explained by this step
  double validation_rmse{0.0};  // linear fit on all groups up to and including this step
};

struct BudgetPlan {
  std::vector<PlanStep> steps;
  double budget_ms{0.0};
  double baseline_rmse{0.0};  // validation RMSE of the constant predictor
  bool warning{false};        // nothing fit in the budget
  std::string message;

  [[nodiscard]] std::vector<int> group_indices() const;
  [[nodiscard]] double total_cost_ms() const { return steps.empty() ? 0.0 : steps.back().cumulative_cost_ms; }
  [[nodiscard]] double validation_rmse() const { return steps.empty() ? baseline_rmse : steps.back().validation_rmse; }
  /// Plan restricted to the longest prefix whose cost fits `budget_ms`.
  [[nodiscard]] BudgetPlan truncated(double budget_ms) const;
};

struct SelectionOptions {
  double lambda{1e-4};
  /// Rows with i % validation_modulus == validation_modulus - 1 are held out.
  int validation_modulus{5};
};

/// Row split used by selection: true for validation rows.
bool is_validation_row(Eigen::Index i, int modulus);

/// Greedy selection by explained-variance gain per unit cost, each candidate
/// whitened against the groups already chosen. The full greedy order is built
/// first and then cut at the budget, so plans are nested in the budget.
BudgetPlan select_budgeted_groups(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const std::vector<ColumnGroup>& groups, double budget_ms,
                                  const SelectionOptions& options = {});

/// Validation RMSE of a linear ridge fit on the union of the given groups
/// (constant predictor when the set is empty). Same split as selection.
double subset_validation_rmse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const std::vector<ColumnGroup>& groups, const std::vector<int>& subset,
                              const SelectionOptions& options = {});

/// Columns of X belonging to the given groups, in group order.
Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& X, const std::vector<ColumnGroup>& groups,
                               const std::vector<int>& subset);

// ---- error lookup table -----------------------------------------------------------

struct LutBin {
  double d_near{0.0};
  double d_far{0.0};
  int n_near{0};
  int n_far{0};
};

struct ErrorLUT {
  /// bins[d - 1] describes predictions that round to d metres, d = 1..kMaxDepth.
  std::vector<LutBin> bins;
  int min_count{20};

  [[nodiscard]] int size() const { return static_cast<int>(bins.size()); }
  [[nodiscard]] const LutBin& bin(int d) const { return bins.at(d - 1); }
  static int bin_index(double depth);  // 1..kMaxDepth
};

/// For each bin d the near/far values are d plus the mean signed error
/// (truth - prediction) over samples that under/over-shot, so
/// d_near <= d <= d_far by construction. A side with fewer than `min_count`
/// samples falls back to d. Throws std::invalid_argument on an empty holdout.
ErrorLUT build_error_lut(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth, int min_count = 20);

/// Depth floor used by every depth grid.
inline constexpr double kMinDepth = 0.5;

struct NearFar {
  double near{0.0};
  double far{0.0};
};
/// near <= depth <= far for any depth in [kMinDepth, kMaxDepth].
NearFar apply_lut(const ErrorLUT& lut, double depth);

// ---- bundled model ----------------------------------------------------------------

struct DepthModel {
  int version{1};
  int patch_size{16};
  FeatureLayout layout;  // groups the regressor consumes
  StagewiseRegressor regressor;
  ErrorLUT lut;
  BudgetPlan plan;  // the selection that produced `layout` (may be empty)
};

}  // namespace rhc
