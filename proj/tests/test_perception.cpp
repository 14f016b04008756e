#include "rhc/harness.hpp"
#include "rhc/perception.hpp"

#include <doctest.h>

#include <chrono>

using namespace rhc;

namespace {

// Small corpus and model shared by the tests in this file.
struct Trained {
  Corpus corpus;
  DepthModel model;
};

const Trained& trained() {
  static const Trained t = [] {
    CorpusConfig c;
    c.n_scenarios = 6;
    c.frames_per_scenario = 25;
    c.patches_per_frame = 60;
    c.seed = 77;
    Trained out;
    out.corpus = build_corpus(c);
    out.model = train_model(out.corpus, TrainConfig{});
    return out;
  }();
  return t;
}

ForestScenario empty_scene() {
  ForestScenario sc;
  sc.bounds = Bounds::corridor(40, 20);
  sc.start = Vec2(2, 0);
  return sc;
}

}  // namespace

TEST_CASE("open view predicts near the depth cap") {
  const auto& t = trained();
  const CameraModel cam;
  const auto sc = empty_scene();
  const Frame prev = render(sc, Pose2{1.7, 0, 0}, cam, 0.0);
  const Frame cur = render(sc, Pose2{2.0, 0, 0}, cam, 0.2);
  const DepthGrid g = predict_depth(cur, &prev, t.model, {}, cam);
  REQUIRE(g.count() == 300);
  double mean = 0.0;
  for (double d : g.depth) {
    CHECK(d >= kMinDepth);
    CHECK(d <= kMaxDepth);
    mean += d / g.count();
  }
  CHECK(mean > 0.75 * kMaxDepth);
}

TEST_CASE("raw outputs are clamped into the depth range") {
  DepthModel m;
  m.layout = FeatureLayout::for_groups(GroupSet{FeatureGroup::structure_tensor});
  m.regressor.feature_mean = Eigen::VectorXd::Zero(9);
  m.regressor.feature_scale = Eigen::VectorXd::Ones(9);
  RegressionStage s;
  s.bias = -2.0;
  s.weights = Eigen::VectorXd::Zero(9);
  m.regressor.stages.push_back(s);
  const CameraModel cam;
  const Frame f = render(empty_scene(), Pose2{2, 0, 0}, cam);
  const DepthGrid low = predict_depth(f, nullptr, m, {}, cam);
  for (double d : low.depth) CHECK(d == kMinDepth);
  m.regressor.stages[0].bias = 45.0;
  const DepthGrid high = predict_depth(f, nullptr, m, {}, cam);
  for (double d : high.depth) CHECK(d == kMaxDepth);
}

TEST_CASE("plan groups must match the model layout") {
  const auto& t = trained();
  BudgetPlan plan;
  plan.steps.push_back({0, "laws", 1.0, 0.1, 1.0});
  const CameraModel cam;
  const Frame f = render(empty_scene(), Pose2{2, 0, 0}, cam);
  CHECK_THROWS_AS(predict_depth(f, nullptr, t.model, plan, cam), std::invalid_argument);
}

TEST_CASE("smaller budgets give valid but worse holdout predictions") {
  const auto& t = trained();
  Eigen::MatrixXd Xt, Xh;
  Eigen::VectorXd yt, yh;
  t.corpus.split(Xt, yt, Xh, yh);
  // fixed costs keep the sweep reproducible
  auto groups = column_groups(t.corpus.layout);
  const double costs[5] = {1.4, 3.7, 1.5, 1.8, 4.0};
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i].cost_ms = costs[i];
  const BudgetPlan full = select_budgeted_groups(Xt, yt, groups, 100.0);
  double prev_rmse = 0.0;
  for (std::size_t k = full.steps.size(); k >= 1; --k) {
    BudgetPlan plan = full.truncated(full.steps[k - 1].cumulative_cost_ms);
    Corpus c = t.corpus;
    for (auto& s : c.layout.slots) s.cost_ms = costs[static_cast<int>(s.group)];
    const DepthModel m = train_model(c, TrainConfig{}, plan);
    const Corpus sub = restrict_groups(c, m.layout.groups());
    Eigen::MatrixXd a, b;
    Eigen::VectorXd ya, yb;
    sub.split(a, ya, b, yb);
    const Eigen::VectorXd pred = m.regressor.predict(b).cwiseMax(kMinDepth).cwiseMin(kMaxDepth);
    CHECK(pred.allFinite());
    const double r = rmse(pred, yb);
    // fewer groups may not help; allow a sliver of holdout noise
    CHECK(r >= prev_rmse * 0.98);
    prev_rmse = r;
  }
}

TEST_CASE("interpretations keep near <= point <= far") {
  const auto& t = trained();
  const CameraModel cam;
  const auto sc = generate_scenario(1.0 / 36.0, Bounds::corridor(40, 40), 5);
  const Frame prev = render(sc, Pose2{sc.start.x() - 0.3, sc.start.y(), 0}, cam, 0.0);
  const Frame cur = render(sc, Pose2{sc.start.x(), sc.start.y(), 0}, cam, 0.2);
  DepthPredictor pred(t.model, cam);
  const DepthGrid g = pred.predict(cur, &prev);
  const auto set = expand_interpretations(g, t.model.lut, InterpretationMode::multiple);
  REQUIRE(set.grids.size() == 3);
  CHECK(set.tags[0] == Interpretation::near);
  CHECK(set.tags[2] == Interpretation::far);
  for (int i = 0; i < g.count(); ++i) {
    CHECK(set.grids[0].depth[i] <= set.grids[1].depth[i]);
    CHECK(set.grids[1].depth[i] <= set.grids[2].depth[i]);
  }
  const auto single = expand_interpretations(g, t.model.lut, InterpretationMode::single);
  CHECK(single.grids.size() == 1);
  CHECK(single.grids[0].depth == g.depth);
}

TEST_CASE("open-space grid projects to no points") {
  const CameraModel cam;
  DepthGrid g(15, 20, kMaxDepth);
  CHECK(project_to_points(g, cam, Pose2{}).empty());
  g.at(3, 3) = 0.95 * kMaxDepth;
  CHECK(project_to_points(g, cam, Pose2{}).empty());
}

TEST_CASE("single near patch projects along its centre ray") {
  const CameraModel cam;
  DepthGrid g(15, 20, kMaxDepth);
  g.at(7, 9) = 5.0;
  const Pose2 pose{1.0, 2.0, 0.0};
  const auto pts = project_to_points(g, cam, pose);
  REQUIRE(pts.size() == 1);
  const double bearing = std::atan((cam.cx() - 152.0) / cam.focal());
  CHECK(pts[0].position.x() == doctest::Approx(1.0 + 5.0 * std::cos(bearing)));
  CHECK(pts[0].position.y() == doctest::Approx(2.0 + 5.0 * std::sin(bearing)));
  CHECK((pts[0].position - pose.position()).norm() == doctest::Approx(5.0));
  CHECK(pts[0].weight == doctest::Approx(1.0).epsilon(0.01));

  const Pose2 yawed{1.0, 2.0, 0.7};
  const auto rot = project_to_points(g, cam, yawed);
  REQUIRE(rot.size() == 1);
  const Vec2 expect = pose.position() + rotate(pts[0].position - pose.position(), 0.7);
  CHECK((rot[0].position - expect).norm() < 1e-12);
}

TEST_CASE("projection and back-projection recover every patch") {
  const CameraModel cam;
  DepthGrid g(15, 20);
  for (int i = 0; i < g.count(); ++i) g.depth[i] = 0.5 + 0.06 * i;
  const Pose2 pose{3.0, -1.0, -0.4};
  const auto pts = project_to_points(g, cam, pose);
  REQUIRE(static_cast<int>(pts.size()) == g.count());
  for (const auto& p : pts) {
    const auto [r, c] = back_project(p, cam, pose);
    CHECK(r * g.cols + c == p.patch);
  }
  const auto strided = project_to_points(g, cam, pose, 16, 2);
  CHECK(strided.size() == 8 * 10);
  CHECK_THROWS_AS(project_to_points(DepthGrid(10, 10), cam, pose), std::invalid_argument);
}

TEST_CASE("oracle prediction is the per-patch minimum true depth") {
  const CameraModel cam;
  ForestScenario sc = empty_scene();
  sc.trees.push_back({7.0, 0.0, 0.3});
  const Frame f = render(sc, Pose2{2, 0, 0}, cam);
  const auto grid = PatchGrid::for_image(320, 240, 16);
  const DepthGrid truth = true_patch_depth(f, grid);
  const DepthGrid o = oracle_predict(f, grid);
  CHECK(o.depth == truth.depth);
  CHECK(truth.at(0, 9) == doctest::Approx(4.7).epsilon(1e-3));
  const DepthGrid noisy = oracle_predict(f, grid, 0.3, 9);
  CHECK(noisy.depth == oracle_predict(f, grid, 0.3, 9).depth);
  CHECK(noisy.depth != truth.depth);
}

TEST_CASE("full-feature prediction fits the perception budget") {
  const auto& t = trained();
  const CameraModel cam;
  const auto sc = generate_scenario(1.0 / 36.0, Bounds::corridor(40, 40), 8);
  const Frame prev = render(sc, Pose2{sc.start.x() - 0.3, sc.start.y(), 0}, cam, 0.0);
  const Frame cur = render(sc, Pose2{sc.start.x(), sc.start.y(), 0}, cam, 0.2);
  DepthPredictor full(t.model, cam);
  using Clock = std::chrono::steady_clock;
  auto t0 = Clock::now();
  for (int i = 0; i < 10; ++i) (void)full.predict(cur, &prev);
  const double full_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / 10;
  CHECK(full_ms <= 200.0);

  const Corpus small = restrict_groups(t.corpus, GroupSet{FeatureGroup::structure_tensor});
  const DepthModel m = train_model(small, TrainConfig{});
  DepthPredictor minimal(m, cam);
  t0 = Clock::now();
  for (int i = 0; i < 10; ++i) (void)minimal.predict(cur, &prev);
  const double min_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / 10;
  CHECK(min_ms <= 50.0);
  MESSAGE("predict_depth: all groups " << full_ms << " ms, structure tensor only " << min_ms << " ms");
}
