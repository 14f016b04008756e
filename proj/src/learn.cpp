#include "rhc/learn.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rhc {

namespace {

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

Standardizer fit_standardizer(const Eigen::MatrixXd& X) {
  Standardizer s;
  const double n = static_cast<double>(X.rows());
  s.mean = X.colwise().sum().transpose() / n;
  s.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    s.scale(j) = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

// Gram matrix and X^T y of the standardized, centred design, accumulated in row blocks.
void standardized_normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Standardizer& s,
                                   int block_rows, Eigen::MatrixXd& gram, Eigen::VectorXd& xty) {
  const Eigen::Index d = X.cols();
  gram.setZero(d, d);
  xty.setZero(d);
  const Eigen::RowVectorXd mu = s.mean.transpose();
  const Eigen::RowVectorXd inv = s.scale.cwiseInverse().transpose();
  Eigen::MatrixXd block;
  for (Eigen::Index r0 = 0; r0 < X.rows(); r0 += block_rows) {
    const Eigen::Index nr = std::min<Eigen::Index>(block_rows, X.rows() - r0);
    block = (X.middleRows(r0, nr).rowwise() - mu).array().rowwise() * inv.array();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    xty.noalias() += block.transpose() * y.segment(r0, nr);
  }
  gram = gram.selfadjointView<Eigen::Lower>();
}

bool solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, Eigen::VectorXd& x) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) return false;
  x = ldlt.solve(b);
  return x.allFinite();
}

Eigen::VectorXd ridge_fit_standardized(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& yc, double lambda) {
  const double n = static_cast<double>(Xs.rows());
  Eigen::MatrixXd A = Xs.transpose() * Xs;
  A.diagonal().array() += n * lambda;
  Eigen::VectorXd w;
  if (!solve_spd(A, Xs.transpose() * yc, w)) {
    A.diagonal().array() += n * lambda * 1e3;
    if (!solve_spd(A, Xs.transpose() * yc, w)) throw std::runtime_error("ridge fit failed");
  }
  return w;
}

}  // namespace

std::array<double, kStageBasis> stage_basis(double p) {
  return {p, p * p, std::max(p, 0.0) * p, std::log1p(std::abs(p))};
}

double rmse(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth) {
  if (prediction.size() != truth.size() || truth.size() == 0) throw std::invalid_argument("rmse: size mismatch");
  return std::sqrt((prediction - truth).squaredNorm() / static_cast<double>(truth.size()));
}

Eigen::VectorXd StagewiseRegressor::predict(const Eigen::MatrixXd& X, int n) const {
  if (X.cols() != dims()) throw std::invalid_argument("StagewiseRegressor: feature dimension mismatch");
  if (stages.empty()) throw std::logic_error("StagewiseRegressor: model has no stages");
  const int k = (n < 0 || n > n_stages()) ? n_stages() : n;
  if (k == 0) throw std::invalid_argument("StagewiseRegressor: need at least one stage");
  // All linear parts in one product, then the stage recursion per row.
  Eigen::MatrixXd W(dims(), k);
  Eigen::VectorXd offset(k);
  for (int s = 0; s < k; ++s) {
    W.col(s) = stages[s].weights.cwiseQuotient(feature_scale);
    offset(s) = stages[s].bias - feature_mean.dot(W.col(s));
  }
  const Eigen::MatrixXd L = X * W;
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double p = L(i, 0) + offset(0);
    for (int s = 1; s < k; ++s) {
      const RegressionStage& st = stages[s];
      const auto phi = stage_basis(p);
      double v = L(i, s) + offset(s) + st.p_weight * p;
      for (int j = 0; j < kStageBasis - 1; ++j) v += st.basis_weights[j] * (phi[j + 1] - st.basis_mean[j]) / st.basis_scale[j];
      p = v;
    }
    out(i) = p;
  }
  return out;
}

double StagewiseRegressor::predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return predict(Eigen::MatrixXd(x))(0);
}

StagewiseRegressor train_stagewise(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int n_stages,
                                   const TrainOptions& options) {
  if (n_stages < 1) throw std::invalid_argument("train_stagewise: n_stages must be >= 1");
  if (X.rows() != y.size()) throw std::invalid_argument("train_stagewise: X/y row mismatch");
  if (X.cols() < 1) throw std::invalid_argument("train_stagewise: no features");
  if (y.size() < 10 * X.cols()) throw std::invalid_argument("train_stagewise: need at least 10 rows per feature");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("train_stagewise: non-finite input");
  if (options.lambda < 0.0) throw std::invalid_argument("train_stagewise: lambda must be >= 0");

  const Standardizer s = fit_standardizer(X);
  StagewiseRegressor model;
  model.feature_mean = s.mean;
  model.feature_scale = s.scale;

  const Eigen::Index d = X.cols();
  const double n = static_cast<double>(X.rows());
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd gram;
  Eigen::VectorXd xty;
  standardized_normal_equations(X, yc, s, std::max(1, options.block_rows), gram, xty);

  Eigen::VectorXd p;  // training output of the previous stage
  for (int k = 0; k < n_stages; ++k) {
    RegressionStage st;
    const bool first = (k == 0);
    const Eigen::Index m = first ? d : d + kStageBasis;
    Eigen::MatrixXd A(m, m);
    Eigen::VectorXd rhs(m);
    A.topLeftCorner(d, d) = gram;
    rhs.head(d) = xty;

    Eigen::MatrixXd V;  // centred [p, standardized basis]
    double p_mean = 0.0;
    if (!first) {
      V.resize(X.rows(), kStageBasis);
      p_mean = p.mean();
      V.col(0) = p.array() - p_mean;
      for (int j = 1; j < kStageBasis; ++j) {
        Eigen::VectorXd col(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) col(i) = stage_basis(p(i))[j];
        const double mu = col.mean();
        double sd = std::sqrt((col.array() - mu).square().sum() / n);
        if (!(sd > 1e-12)) sd = 1.0;
        st.basis_mean[j - 1] = mu;
        st.basis_scale[j - 1] = sd;
        V.col(j) = (col.array() - mu) / sd;
      }
      // Xs^T V = D^-1 X^T V because V is centred.
      const Eigen::MatrixXd xtv = (X.transpose() * V).array().colwise() / s.scale.array();
      A.topRightCorner(d, kStageBasis) = xtv;
      A.bottomLeftCorner(kStageBasis, d) = xtv.transpose();
      A.bottomRightCorner(kStageBasis, kStageBasis) = V.transpose() * V;
      rhs.tail(kStageBasis) = V.transpose() * yc;
    }

    double lambda = options.lambda;
    Eigen::VectorXd theta;
    bool ok = false;
    for (int attempt = 0; attempt <= options.max_retries && !ok; ++attempt) {
      Eigen::MatrixXd Ar = A;
      Ar.diagonal().head(d).array() += n * lambda;
      if (!first) {
        Ar.diagonal().tail(kStageBasis - 1).array() += n * lambda;
        // p is left unpenalized unless the first solve failed.
        if (attempt > 0) Ar(d, d) += n * std::max(lambda, 1e-12);
      }
      ok = solve_spd(Ar, rhs, theta);
      if (!ok) lambda = (lambda > 0.0 ? lambda : 1e-8) * 10.0;
    }
    if (!ok) throw std::runtime_error("train_stagewise: singular normal equations at stage " + std::to_string(k + 1));

    st.lambda = lambda;
    st.weights = theta.head(d);
    st.bias = y_mean;
    if (!first) {
      st.p_weight = theta(d);
      for (int j = 0; j < kStageBasis - 1; ++j) st.basis_weights[j] = theta(d + 1 + j);
      st.bias = y_mean - st.p_weight * p_mean;
    }
    model.stages.push_back(st);

    // Training output of this stage, reusing the fitted pieces.
    Eigen::VectorXd out = X * st.weights.cwiseQuotient(s.scale);
    out.array() += st.bias - s.mean.dot(st.weights.cwiseQuotient(s.scale));
    if (!first) out += V * theta.tail(kStageBasis) + Eigen::VectorXd::Constant(X.rows(), st.p_weight * p_mean);
    double r = rmse(out, y);
    if (!first && r > model.stages[k - 1].train_rmse) {
      // Round-off on a near-perfect fit can make the augmented solve slightly
      // worse; pass the previous output through unchanged instead.
      RegressionStage& pass = model.stages.back();
      pass.weights.setZero();
      pass.bias = 0.0;
      pass.p_weight = 1.0;
      pass.basis_weights.fill(0.0);
      out = p;
      r = model.stages[k - 1].train_rmse;
    }
    model.stages.back().train_rmse = r;
    p = std::move(out);
  }
  return model;
}

// ---- selection ------------------------------------------------------------------------

std::vector<ColumnGroup> column_groups(const FeatureLayout& layout) {
  std::vector<ColumnGroup> out;
  for (const GroupSlot& s : layout.slots) out.push_back({std::string(group_name(s.group)), s.offset, s.length, s.cost_ms});
  return out;
}

std::vector<int> BudgetPlan::group_indices() const {
  std::vector<int> out;
  for (const auto& s : steps) out.push_back(s.group);
  return out;
}

BudgetPlan BudgetPlan::truncated(double budget) const {
  BudgetPlan out = *this;
  out.budget_ms = budget;
  out.steps.clear();
  for (const auto& s : steps) {
    if (s.cumulative_cost_ms > budget) break;
    out.steps.push_back(s);
  }
  out.warning = out.steps.empty();
  out.message = out.warning ? "no feature group fits in the budget" : "";
  return out;
}

bool is_validation_row(Eigen::Index i, int modulus) { return modulus > 1 && i % modulus == modulus - 1; }

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& X, const std::vector<ColumnGroup>& groups,
                               const std::vector<int>& subset) {
  int cols = 0;
  for (int g : subset) cols += groups.at(g).length;
  Eigen::MatrixXd out(X.rows(), cols);
  int at = 0;
  for (int g : subset) {
    out.middleCols(at, groups[g].length) = X.middleCols(groups[g].offset, groups[g].length);
    at += groups[g].length;
  }
  return out;
}

namespace {

struct Split {
  std::vector<Eigen::Index> train, valid;
};

Split make_split(Eigen::Index n, int modulus) {
  Split s;
  for (Eigen::Index i = 0; i < n; ++i) (is_validation_row(i, modulus) ? s.valid : s.train).push_back(i);
  return s;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(rows[i]);
  return out;
}

void check_groups(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<ColumnGroup>& groups) {
  if (X.rows() != y.size()) throw std::invalid_argument("group selection: X/y row mismatch");
  for (const auto& g : groups) {
    if (g.length <= 0 || g.offset < 0 || g.offset + g.length > X.cols())
      throw std::invalid_argument("group selection: group '" + g.name + "' outside the design matrix");
    if (!(g.cost_ms > 0.0)) throw std::invalid_argument("group selection: group '" + g.name + "' needs a positive cost");
  }
}

double split_rmse(const Eigen::MatrixXd& Xsub, const Eigen::VectorXd& y, const Split& split, double lambda) {
  const Eigen::VectorXd yt = take_rows(y, split.train);
  const Eigen::VectorXd yv = take_rows(y, split.valid);
  const double y_mean = yt.mean();
  if (Xsub.cols() == 0) return rmse(Eigen::VectorXd::Constant(yv.size(), y_mean), yv);
  const Eigen::MatrixXd Xt = take_rows(Xsub, split.train);
  const Standardizer s = fit_standardizer(Xt);
  const Eigen::MatrixXd Xs = (Xt.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array();
  const Eigen::VectorXd w = ridge_fit_standardized(Xs, yt.array() - y_mean, lambda);
  const Eigen::MatrixXd Xv = take_rows(Xsub, split.valid);
  const Eigen::VectorXd pred =
      (((Xv.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array()).matrix() * w).array() + y_mean;
  return rmse(pred, yv);
}

}  // namespace

double subset_validation_rmse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const std::vector<ColumnGroup>& groups, const std::vector<int>& subset,
                              const SelectionOptions& options) {
  check_groups(X, y, groups);
  const Split split = make_split(X.rows(), options.validation_modulus);
  if (split.train.empty() || split.valid.empty()) throw std::invalid_argument("group selection: empty split");
  std::vector<int> sorted = subset;
  std::sort(sorted.begin(), sorted.end());
  return split_rmse(gather_columns(X, groups, sorted), y, split, options.lambda);
}

BudgetPlan select_budgeted_groups(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const std::vector<ColumnGroup>& groups, double budget_ms,
                                  const SelectionOptions& options) {
  if (groups.size() < 2) throw std::invalid_argument("select_budgeted_groups: need at least two groups");
  check_groups(X, y, groups);
  const Split split = make_split(X.rows(), options.validation_modulus);
  if (split.train.size() < 2 || split.valid.empty()) throw std::invalid_argument("select_budgeted_groups: too few rows");

  const Eigen::MatrixXd Xt = take_rows(X, split.train);
  const Eigen::VectorXd yt = take_rows(y, split.train);
  const Standardizer s = fit_standardizer(Xt);
  const Eigen::MatrixXd Xs = (Xt.rowwise() - s.mean.transpose()).array().rowwise() / s.scale.transpose().array();
  const Eigen::VectorXd yc = yt.array() - yt.mean();
  const double total_var = yc.squaredNorm();

  BudgetPlan full;
  full.baseline_rmse = split_rmse(Eigen::MatrixXd(X.rows(), 0), y, split, options.lambda);
  Eigen::MatrixXd Q(Xs.rows(), 0);
  std::vector<char> taken(groups.size(), 0);
  std::vector<int> chosen;
  double cumulative = 0.0;
  for (std::size_t step = 0; step < groups.size(); ++step) {
    int best = -1;
    double best_score = -1.0;
    double best_gain = 0.0;
    Eigen::MatrixXd best_basis;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (taken[g]) continue;
      Eigen::MatrixXd Z = Xs.middleCols(groups[g].offset, groups[g].length);
      if (Q.cols() > 0) Z -= Q * (Q.transpose() * Z);
      // Whiten: orthonormal basis of the part of the group not already spanned.
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
      qr.setThreshold(1e-9);
      const Eigen::Index rank = qr.rank();
      Eigen::MatrixXd basis;
      double gain = 0.0;
      if (rank > 0) {
        basis = qr.householderQ() * Eigen::MatrixXd::Identity(Z.rows(), rank);
        gain = total_var > 0.0 ? (basis.transpose() * yc).squaredNorm() / total_var : 0.0;
      } else {
        basis.resize(Z.rows(), 0);
      }
      const double score = gain / groups[g].cost_ms;
      if (score > best_score * (1.0 + 1e-12) + 1e-15) {
        best = static_cast<int>(g);
        best_score = score;
        best_gain = gain;
        best_basis = std::move(basis);
      }
    }
    taken[best] = 1;
    chosen.push_back(best);
    cumulative += groups[best].cost_ms;
    if (best_basis.cols() > 0) {
      Eigen::MatrixXd grown(Q.rows(), Q.cols() + best_basis.cols());
      grown << Q, best_basis;
      Q = std::move(grown);
    }
    PlanStep ps;
    ps.group = best;
    ps.name = groups[best].name;
    ps.cumulative_cost_ms = cumulative;
    ps.explained_gain = best_gain;
    std::vector<int> sorted = chosen;
    std::sort(sorted.begin(), sorted.end());
    ps.validation_rmse = split_rmse(gather_columns(X, groups, sorted), y, split, options.lambda);
    full.steps.push_back(ps);
  }
  return full.truncated(budget_ms);
}

// ---- LUT ------------------------------------------------------------------------------

int ErrorLUT::bin_index(double depth) {
  const double r = std::round(depth);
  return static_cast<int>(std::clamp(r, 1.0, kMaxDepth));
}

ErrorLUT build_error_lut(const Eigen::VectorXd& prediction, const Eigen::VectorXd& truth, int min_count) {
  if (prediction.size() != truth.size()) throw std::invalid_argument("build_error_lut: size mismatch");
  if (truth.size() == 0) throw std::invalid_argument("build_error_lut: empty holdout");
  if (min_count < 1) throw std::invalid_argument("build_error_lut: min_count must be positive");
  const int nb = static_cast<int>(kMaxDepth);
  std::vector<double> sum_near(nb, 0.0), sum_far(nb, 0.0);
  ErrorLUT lut;
  lut.min_count = min_count;
  lut.bins.resize(nb);
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const int b = ErrorLUT::bin_index(prediction(i)) - 1;
    const double e = truth(i) - prediction(i);
    if (e >= 0.0) {
      sum_far[b] += e;
      ++lut.bins[b].n_far;
    } else {
      sum_near[b] += e;
      ++lut.bins[b].n_near;
    }
  }
  for (int b = 0; b < nb; ++b) {
    const double d = b + 1.0;
    LutBin& bin = lut.bins[b];
    bin.d_near = bin.n_near >= min_count ? d + sum_near[b] / bin.n_near : d;
    bin.d_far = bin.n_far >= min_count ? d + sum_far[b] / bin.n_far : d;
  }
  return lut;
}

NearFar apply_lut(const ErrorLUT& lut, double depth) {
  if (lut.bins.empty()) return {depth, depth};
  const int d = ErrorLUT::bin_index(depth);
  const LutBin& b = lut.bin(d);
  NearFar out;
  out.near = std::max(kMinDepth, std::min(depth, depth + (b.d_near - d)));
  out.far = std::min(kMaxDepth, std::max(depth, depth + (b.d_far - d)));
  return out;
}

}  // namespace rhc
