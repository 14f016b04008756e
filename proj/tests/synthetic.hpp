#pragma once

// Shared synthetic regression instances for the learning tests.

#include "rhc/learn.hpp"

#include <random>

namespace rhc::testing {

struct GroupInstance {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<ColumnGroup> groups;
};

/// Five groups of 3 columns; each group carries a different share of the
/// signal, two are correlated with each other and one is pure noise.
inline GroupInstance five_group_instance(std::uint64_t seed, int rows = 3000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GroupInstance g;
  const int per = 3;
  g.X.resize(rows, 5 * per);
  g.y.resize(rows);
  const double strength[5] = {1.0, 0.6, 0.6, 0.3, 0.0};
  const double costs[5] = {4.0, 1.0, 1.5, 0.5, 0.3};
  Eigen::MatrixXd beta(5, per);
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < per; ++j) beta(k, j) = strength[k] * (0.5 + u(rng));
  for (int i = 0; i < rows; ++i) {
    const double shared = n01(rng);
    double yi = 0.0;
    for (int k = 0; k < 5; ++k)
      for (int j = 0; j < per; ++j) {
        double v = n01(rng);
        if (k == 1 || k == 2) v = 0.7 * shared + 0.7 * v;
        g.X(i, k * per + j) = v;
        yi += beta(k, j) * v;
      }
    g.y(i) = yi + 0.5 * n01(rng);
  }
  for (int k = 0; k < 5; ++k) g.groups.push_back({"g" + std::to_string(k), k * per, per, costs[k]});
  return g;
}

}  // namespace rhc::testing
