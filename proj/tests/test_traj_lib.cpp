#include "rhc/traj_lib.hpp"

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

using namespace rhc;

TEST_CASE("zero curvature gives a straight 5 m path") {
  const auto t = make_trajectory(0, 0.0, 0.0, 5.0, 0.1);
  REQUIRE(t.samples.size() == 51);
  CHECK(t.end().x == doctest::Approx(5.0));
  CHECK(t.end().y == doctest::Approx(0.0));
  for (std::size_t i = 0; i < t.samples.size(); ++i) CHECK(t.samples[i].x == doctest::Approx(0.1 * i));
}

TEST_CASE("S-curve endpoint matches arc concatenation") {
  const double k = 1.0 / 1.5;
  const auto t = make_trajectory(0, k, -k, 5.0, 0.1);
  // first arc: centre (0, 1/k); second arc mirrors it
  const double L = 2.5;
  const double th = k * L;
  const double x1 = std::sin(th) / k;
  const double y1 = (1 - std::cos(th)) / k;
  const double x2 = x1 + (std::sin(th) - std::sin(th - k * L)) / k;
  const double y2 = y1 + (-std::cos(th) + std::cos(th - k * L)) / k;
  CHECK(t.end().x == doctest::Approx(x2).epsilon(1e-12));
  CHECK(t.end().y == doctest::Approx(y2).epsilon(1e-12));
  CHECK(t.end().yaw == doctest::Approx(0.0));
}

TEST_CASE("dense grid has 2401 distinct paths within the curvature bound") {
  TrajLibConfig cfg;
  const auto dense = generate_dense(cfg);
  REQUIRE(dense.size() == 2401);
  std::set<std::tuple<long, long, long>> ends;
  for (const auto& t : dense) {
    CHECK(std::abs(t.kappa1) <= cfg.kappa_max() + 1e-12);
    CHECK(std::abs(t.kappa2) <= cfg.kappa_max() + 1e-12);
    ends.insert({std::lround(t.end().x * 1e9), std::lround(t.end().y * 1e9), std::lround(t.end().yaw * 1e9)});
  }
  CHECK(ends.size() == 2401);
}

TEST_CASE("trajectory distance is the largest matched-sample gap") {
  const auto a = make_trajectory(0, 0.0, 0.0, 5.0, 0.1);
  const auto b = make_trajectory(1, 0.2, 0.0, 5.0, 0.1);
  double m = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    m = std::max(m, (a.samples[i].position() - b.samples[i].position()).norm());
  CHECK(trajectory_distance(a, b) == doctest::Approx(m));
  CHECK(trajectory_distance(a, a) == 0.0);
  CHECK(trajectory_distance(a, b) == trajectory_distance(b, a));
  CHECK_THROWS(trajectory_distance(a, make_trajectory(2, 0, 0, 4.0, 0.1)));
}

TEST_CASE("selection of one path is the straight path") {
  const auto dense = generate_dense();
  const auto sel = select_dispersion(dense, 1);
  REQUIRE(sel.size() == 1);
  CHECK(dense[sel[0]].kappa1 == 0.0);
  CHECK(dense[sel[0]].kappa2 == 0.0);
}

TEST_CASE("second pick from a symmetric fan is the lower-id extreme") {
  TrajLibConfig cfg;
  cfg.grid = 5;
  cfg.select = 2;
  const auto dense = generate_dense(cfg);
  const auto sel = select_dispersion(dense, 2);
  REQUIRE(sel.size() == 2);
  const auto& t = dense[sel[1]];
  CHECK(std::abs(t.kappa1) == doctest::Approx(cfg.kappa_max()));
  // its mirror image is equally far; the tie must go to the lower id
  for (const auto& o : dense)
    if (o.kappa1 == -t.kappa1 && o.kappa2 == -t.kappa2) CHECK(t.id < o.id);
}

TEST_CASE("greedy dispersion is within half of the exhaustive optimum") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int inst = 0; inst < 30; ++inst) {
    std::vector<Trajectory> paths;
    for (int i = 0; i < 20; ++i) paths.push_back(make_trajectory(i, u(rng), u(rng), 3.0, 0.25));
    auto d = [&](int a, int b) { return trajectory_distance(paths[a], paths[b]); };
    const auto greedy = greedy_dispersion(20, d, 0, 5);
    const double g = min_pairwise_distance(greedy, d);
    double best = 0.0;
    std::vector<int> idx(5);
    for (int a = 0; a < 20; ++a)
      for (int b = a + 1; b < 20; ++b)
        for (int c = b + 1; c < 20; ++c)
          for (int e = c + 1; e < 20; ++e)
            for (int f = e + 1; f < 20; ++f) best = std::max(best, min_pairwise_distance({a, b, c, e, f}, d));
    CHECK(g >= 0.5 * best);
  }
}

TEST_CASE("selection is deterministic, nested in k and curvature bounded") {
  const auto dense = generate_dense();
  const auto s20 = select_dispersion(dense, 20);
  const auto s78 = select_dispersion(dense, 78);
  CHECK(std::equal(s20.begin(), s20.end(), s78.begin()));
  CHECK(select_dispersion(dense, 78) == s78);
  CHECK(std::set<int>(s78.begin(), s78.end()).size() == 78);
  CHECK_THROWS_AS(select_dispersion(dense, 0), std::invalid_argument);
  CHECK_THROWS_AS(select_dispersion(dense, 2402), std::invalid_argument);
}

TEST_CASE("full library builds quickly and round-trips through text") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto lib = build_library();
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(s < 10.0);
  CHECK(lib.selected.size() == 78);
  std::stringstream ss;
  write_library(ss, lib);
  const auto back = read_library(ss);
  CHECK(back.selected == lib.selected);
  REQUIRE(back.dense.size() == lib.dense.size());
  const auto& a = lib.selected_at(40);
  const auto& b = back.selected_at(40);
  CHECK(a.kappa1 == b.kappa1);
  CHECK(std::abs(a.end().x - b.end().x) < 1e-12);
}
