#include "rhc/costmap.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace rhc;

namespace {
ScoredPoint pt(double x, double y, double t, double w = 1.0) { return {Vec2(x, y), t, w, Interpretation::point}; }
}  // namespace

TEST_CASE("score examples") {
  ScoredCloud c;
  CHECK(c.score_at(Vec2(0, 0), 0.35, 0.0) == 0.0);
  c.insert({pt(1.0, 0.0, 0.0)}, 0.0);
  CHECK(c.score_at(Vec2(1.1, 0.0), 0.35, 0.0) == doctest::Approx(1.0));
  CHECK(c.score_at(Vec2(1.1, 0.0), 0.35, 2.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(c.score_at(Vec2(2.0, 0.0), 0.35, 0.0) == 0.0);
  // inclusive radius
  CHECK(c.score_at(Vec2(1.0, 0.5), 0.5, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("points vanish at the memory horizon") {
  CloudConfig cfg;
  ScoredCloud c(cfg);
  CHECK(c.max_age() == doctest::Approx(4.0));
  c.insert({pt(0, 0, 0.0)}, 0.0);
  c.insert({pt(0, 0, 1.0)}, 1.0);
  CHECK(c.score_at(Vec2(0, 0), 0.1, 3.9) > 0.0);
  c.prune(4.5);
  CHECK(c.size() == 1);
  c.prune(5.5);
  CHECK(c.size() == 0);
}

TEST_CASE("zero tau keeps only points born at the query time") {
  CloudConfig cfg;
  cfg.tau = 0.0;
  ScoredCloud c(cfg);
  c.insert({pt(0, 0, 1.0)}, 1.0);
  CHECK(c.score_at(Vec2(0, 0), 0.1, 1.0) == doctest::Approx(1.0));
  CHECK(c.score_at(Vec2(0, 0), 0.1, 1.2) == 0.0);
  c.prune(1.2);
  CHECK(c.size() == 0);
}

TEST_CASE("score is non-increasing in time without insertions") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3), ut(0, 2);
  ScoredCloud c;
  std::vector<ScoredPoint> pts;
  for (int i = 0; i < 500; ++i) pts.push_back(pt(u(rng), u(rng), ut(rng), 0.5 + 0.5 * ut(rng)));
  c.insert(pts, 2.0);
  for (int q = 0; q < 50; ++q) {
    const Vec2 p(u(rng), u(rng));
    double prev = c.score_at(p, 0.8, 2.0);
    for (double t = 2.1; t < 7.0; t += 0.1) {
      const double s = c.score_at(p, 0.8, t);
      CHECK(s <= prev + 1e-12);
      prev = s;
    }
  }
}

TEST_CASE("after pruning no point is older than the horizon") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5, 5);
  ScoredCloud c;
  for (int k = 0; k < 40; ++k) {
    const double now = 0.2 * k;
    std::vector<ScoredPoint> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(pt(u(rng), u(rng), now));
    c.insert(pts, now);
    c.prune(now);
    for (const auto& p : c.points()) CHECK(now - p.birth_time <= c.max_age() + 1e-12);
  }
}

TEST_CASE("spatial query equals brute force") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10, 10), ur(0.05, 2.0);
  ScoredCloud c;
  std::vector<ScoredPoint> pts;
  for (int i = 0; i < 3000; ++i) pts.push_back(pt(u(rng), u(rng), 0.0));
  c.insert(pts, 0.0);
  for (int q = 0; q < 200; ++q) {
    const Vec2 p(u(rng), u(rng));
    const double r = ur(rng);
    std::vector<std::size_t> brute;
    for (std::size_t i = 0; i < c.points().size(); ++i)
      if ((c.points()[i].position - p).norm() <= r) brute.push_back(i);
    CHECK(c.query(p, r, 0.0) == brute);
  }
}

TEST_CASE("capacity evicts the weakest points first") {
  CloudConfig cfg;
  cfg.capacity = 10;
  ScoredCloud c(cfg);
  std::vector<ScoredPoint> old;
  for (int i = 0; i < 10; ++i) old.push_back(pt(i, 0, 0.0));
  c.insert(old, 0.0);
  std::vector<ScoredPoint> fresh;
  for (int i = 0; i < 4; ++i) fresh.push_back(pt(i, 5, 1.0));
  c.insert(fresh, 1.0);
  CHECK(c.size() == 10);
  int fresh_left = 0;
  for (const auto& p : c.points()) fresh_left += p.birth_time == 1.0;
  CHECK(fresh_left == 4);
}

TEST_CASE("csv dump lists live points") {
  ScoredCloud c;
  c.insert({pt(1, 2, 0.0)}, 0.0);
  std::ostringstream os;
  c.write_csv(os, 0.0);
  CHECK(os.str().find("1,2,1,point") != std::string::npos);
}
