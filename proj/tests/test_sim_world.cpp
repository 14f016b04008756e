#include "rhc/sim_world.hpp"

#include <doctest.h>

#include <sstream>

using namespace rhc;

TEST_CASE("generated density matches the requested trees per square metre") {
  const auto dense = generate_scenario(1.0 / 36.0, Bounds::corridor(60, 60), 7);
  CHECK(dense.trees.size() >= 90);
  CHECK(dense.trees.size() <= 110);
  const auto sparse = generate_scenario(1.0 / 144.0, Bounds::corridor(60, 60), 7);
  CHECK(sparse.trees.size() >= 22);
  CHECK(sparse.trees.size() <= 28);
}

TEST_CASE("scenario invariants hold over many seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sc = generate_scenario(1.0 / 36.0, Bounds::corridor(40, 30), seed);
    for (std::size_t i = 0; i < sc.trees.size(); ++i) {
      const Tree& a = sc.trees[i];
      CHECK(a.radius > 0.0);
      CHECK(sc.bounds.contains(a.center()));
      CHECK((a.center() - sc.start).norm() - a.radius >= 2.0);
      for (std::size_t j = i + 1; j < sc.trees.size(); ++j)
        CHECK((a.center() - sc.trees[j].center()).norm() > a.radius + sc.trees[j].radius);
    }
  }
}

TEST_CASE("scenario generation is deterministic and round-trips through text") {
  const auto a = generate_scenario(1.0 / 72.0, Bounds::corridor(50, 20), 11);
  const auto b = generate_scenario(1.0 / 72.0, Bounds::corridor(50, 20), 11);
  CHECK(a == b);
  std::stringstream ss;
  write_scenario(ss, a);
  const auto c = read_scenario(ss);
  REQUIRE(c.trees.size() == a.trees.size());
  for (std::size_t i = 0; i < a.trees.size(); ++i) {
    CHECK(c.trees[i].x == a.trees[i].x);
    CHECK(c.trees[i].radius == a.trees[i].radius);
  }
  CHECK(c.bounds == a.bounds);
}

TEST_CASE("infeasible density and bad bounds are rejected") {
  CHECK_THROWS_AS(generate_scenario(1.0, Bounds::corridor(20, 20), 1), std::runtime_error);
  CHECK_THROWS_AS(generate_scenario(-1.0, Bounds::corridor(20, 20), 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_scenario(0.01, Bounds::corridor(0, 20), 1), std::invalid_argument);
}

namespace {
ForestScenario scene(std::vector<Tree> trees) {
  ForestScenario sc;
  sc.bounds = Bounds::corridor(40, 20);
  sc.trees = std::move(trees);
  sc.start = Vec2(2.0, 0.0);
  return sc;
}
}  // namespace

TEST_CASE("empty view renders every column at the depth cap") {
  const CameraModel cam;
  const Frame f = render(scene({}), Pose2{2, 0, 0}, cam);
  REQUIRE(f.width() == 320);
  REQUIRE(f.height() == 240);
  for (double d : f.true_depth.data()) CHECK(d == kMaxDepth);
  for (float p : f.pixels.data()) {
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
  }
}

TEST_CASE("tree dead ahead at 5 m reads 4.7 to 5.0 m in the centre column") {
  const CameraModel cam;
  const Frame f = render(scene({{7.0, 0.0, 0.3}}), Pose2{2, 0, 0}, cam);
  const double d = f.true_depth(160, 120);
  CHECK(d >= 4.7);
  CHECK(d <= 5.0);
}

TEST_CASE("rendered depth equals the analytic ray-cylinder intersection") {
  const CameraModel cam;
  const auto sc = scene({{8.0, 0.4, 0.35}, {11.0, -1.5, 0.2}, {6.0, -3.0, 0.45}});
  const Pose2 pose{2.0, 0.1, 0.05};
  const Frame f = render(sc, pose, cam);
  for (int u = 0; u < cam.width; u += 7) {
    const double b = cam.column_bearing(u + 0.5);
    const Vec2 dir(std::cos(pose.yaw + b), std::sin(pose.yaw + b));
    // Closed form: |o + t d - c|^2 = r^2, smallest positive root.
    double best = kMaxDepth;
    for (const Tree& t : sc.trees) {
      const Vec2 oc = pose.position() - t.center();
      const double bb = oc.dot(dir);
      const double cc = oc.squaredNorm() - t.radius * t.radius;
      const double disc = bb * bb - cc;
      if (disc < 0) continue;
      const double root = -bb - std::sqrt(disc);
      if (root > 0) best = std::min(best, root);
    }
    CHECK(f.true_depth(u, 60) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("nearer trunk occludes the farther one") {
  const CameraModel cam;
  const Frame both = render(scene({{6.0, 0.0, 0.3}, {10.0, 0.0, 0.5}}), Pose2{2, 0, 0}, cam);
  const Frame far = render(scene({{10.0, 0.0, 0.5}}), Pose2{2, 0, 0}, cam);
  CHECK(both.true_depth(160, 10) == doctest::Approx(3.7).epsilon(1e-3));
  CHECK(far.true_depth(160, 10) == doctest::Approx(7.5).epsilon(1e-3));
}

TEST_CASE("rendering is bit-deterministic") {
  const auto sc = generate_scenario(1.0 / 36.0, Bounds::corridor(40, 40), 3);
  const CameraModel cam;
  const Frame a = render(sc, Pose2{sc.start.x(), sc.start.y(), 0.2}, cam, 1.0);
  const Frame b = render(sc, Pose2{sc.start.x(), sc.start.y(), 0.2}, cam, 1.0);
  CHECK(a.pixels == b.pixels);
  CHECK(a.true_depth == b.true_depth);
}

TEST_CASE("pose outside the bounds sees open space") {
  const Frame f = render(scene({{7.0, 0.0, 0.3}}), Pose2{-5, 0, 0}, CameraModel{});
  for (double d : f.true_depth.data()) CHECK(d == kMaxDepth);
}

TEST_CASE("unicycle integration is exact") {
  VehicleState s;
  SUBCASE("straight") {
    const auto n = step_vehicle(s, 1.0, 0.0, 0.1);
    CHECK(n.position.x() == doctest::Approx(0.1));
    CHECK(n.time == doctest::Approx(0.1));
  }
  SUBCASE("quarter circle") {
    // ten steps of 0.1 s at yaw rate pi/2 -> radius 2/pi
    for (int i = 0; i < 10; ++i) s = step_vehicle(s, 1.0, kPi / 2, 0.1);
    const double r = 2.0 / kPi;
    CHECK(s.position.x() == doctest::Approx(r).epsilon(1e-12));
    CHECK(s.position.y() == doctest::Approx(r).epsilon(1e-12));
    CHECK(s.yaw == doctest::Approx(kPi / 2));
  }
  SUBCASE("hover") {
    const auto n = step_vehicle(s, 0.0, 0.5, 0.1);
    CHECK(n.position.norm() == 0.0);
    CHECK(n.yaw == doctest::Approx(0.05));
  }
  SUBCASE("two half steps equal one step") {
    const VehicleState a = step_vehicle(step_vehicle(s, 1.3, 0.7, 0.05), 1.3, 0.7, 0.05);
    const VehicleState b = step_vehicle(s, 1.3, 0.7, 0.1);
    CHECK((a.position - b.position).norm() < 1e-12);
    CHECK(a.yaw == doctest::Approx(b.yaw).epsilon(1e-12));
  }
  CHECK_THROWS_AS(step_vehicle(s, 1.0, 0.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(step_vehicle(s, 1.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("collision uses strict disk intersection") {
  const auto sc = scene({{10.0, 0.0, 0.5}});
  VehicleState s;
  s.position = Vec2(0.0, 0.0);
  CHECK_FALSE(check_collision(sc, s, 0.3));
  s.position = Vec2(10.0, 0.0);
  CHECK(check_collision(sc, s, 0.3));
  s.position = Vec2(9.25, 0.0);  // gap exactly 0
  CHECK_FALSE(check_collision(sc, s, 0.25));
  s.position = Vec2(9.2500001, 0.0);
  CHECK(check_collision(sc, s, 0.25));
  CHECK(colliding_tree(sc, Vec2(10.0, 0.6), 0.2) == std::optional<std::size_t>(0));
}
