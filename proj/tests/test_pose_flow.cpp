#include "rhc/pose_flow.hpp"

#include <doctest.h>

#include <cmath>

using namespace rhc;

namespace {

const CameraModel kCam = CameraModel::downward_default();
const FlowNoiseConfig kClean{0.0, 0.0, 0.0};

Vec2 mean_flow(const FlowSample& s) {
  Vec2 m = Vec2::Zero();
  for (const auto& f : s.flow) m += f;
  return m / static_cast<double>(s.flow.size());
}

}  // namespace

TEST_CASE("zero motion gives zero flow") {
  const auto s = simulate_flow(BodyMotion{}, 2.0, kCam, FlowGridConfig{}, kClean, 100.0, 1, 0.0);
  CHECK(s.flow.size() == 25);
  for (const auto& f : s.flow) CHECK(f.norm() == 0.0);
}

TEST_CASE("forward translation magnitude") {
  CHECK(kCam.focal() == doctest::Approx(300.0));
  const auto s = simulate_flow(BodyMotion{Vec2(1.0, 0.0), Vec3::Zero()}, 2.0, kCam, FlowGridConfig{}, kClean, 100.0, 1, 0.0);
  for (const auto& f : s.flow) CHECK(f.norm() == doctest::Approx(1.5));
}

TEST_CASE("pure yaw has zero mean flow once unrotated") {
  const Vec3 w(0.0, 0.0, 0.7);
  const auto s = simulate_flow(BodyMotion{Vec2::Zero(), w}, 2.0, kCam, FlowGridConfig{}, kClean, 100.0, 1, 0.0);
  CHECK(mean_flow(s).norm() < 1e-9);  // symmetric grid, yaw flow is a curl
  const auto u = unrotate(s, ImuReading{0.0, w}, kCam);
  for (const auto& f : u.flow) CHECK(f.norm() < 1e-12);
}

TEST_CASE("noise-free velocity roundtrip within 2 percent") {
  for (double speed : {0.2, 0.7, 1.5, 3.0})
    for (double h : {1.0, 2.0, 4.0})
      for (double heading : {0.0, 0.8, -2.0}) {
        const Vec2 v = speed * Vec2(std::cos(heading), std::sin(heading));
        const Vec3 w(0.2, -0.1, 0.4);
        const auto raw = simulate_flow(BodyMotion{v, w}, h, kCam, FlowGridConfig{}, kClean, 100.0, 3, 0.5);
        const auto e = estimate_velocity(unrotate(raw, ImuReading{0.5, w}, kCam), h, Vec2::Zero(), kCam);
        CHECK(e.valid);
        CHECK((e.velocity - v).norm() <= 0.02 * speed);
      }
}

TEST_CASE("spread-out flow is gated to a decayed previous velocity") {
  FlowSample s;
  s.rate = 100.0;
  for (int i = 0; i < 25; ++i) {
    s.points.emplace_back(i, 0);
    // 40 percent of the vectors far from the rest
    s.flow.push_back(i % 5 < 2 ? Vec2(4.0, -3.0) : Vec2(1.0, 0.0));
  }
  const GateConfig gate;
  const auto e = estimate_velocity(s, 2.0, Vec2(1.2, -0.4), kCam, gate);
  CHECK_FALSE(e.valid);
  CHECK(e.velocity.x() == doctest::Approx(gate.gamma * 1.2));
  CHECK(e.velocity.y() == doctest::Approx(gate.gamma * -0.4));
  CHECK(estimate_velocity(s, 2.0, Vec2::Zero(), kCam, gate).velocity.norm() == 0.0);
}

TEST_CASE("a few outliers are rejected around the median") {
  FlowSample s;
  s.rate = 100.0;
  for (int i = 0; i < 25; ++i) {
    s.points.emplace_back(i, 0);
    s.flow.push_back(i == 3 ? Vec2(2.5, 0.0) : Vec2(-1.5, 0.0));
  }
  GateConfig gate;
  gate.sigma_gate_px = 1.0;
  const auto e = estimate_velocity(s, 2.0, Vec2::Zero(), kCam, gate);
  CHECK(e.valid);
  CHECK(e.inliers == 24);
  CHECK(e.velocity.x() == doctest::Approx(1.0));
}

TEST_CASE("pure rotation reads as standing still") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Vec3 w(0.3 * std::sin(seed), 0.3 * std::cos(seed), 1.2 * std::sin(3.0 * seed));
    const auto raw = simulate_flow(BodyMotion{Vec2::Zero(), w}, 2.0, kCam, FlowGridConfig{}, kClean, 100.0, seed, 0.0);
    const auto e = estimate_velocity(unrotate(raw, ImuReading{0.0, w}, kCam), 2.0, Vec2::Zero(), kCam);
    CHECK(e.velocity.norm() <= 0.02);
  }
}

TEST_CASE("imu bias sign is fixed per seed") {
  const ImuConfig c{200.0, 0.0, 0.01};
  const auto a = simulate_imu(Vec3::Zero(), 0.0, c, 5);
  const auto b = simulate_imu(Vec3::Zero(), 1.0, c, 5);
  CHECK(a.angular_velocity == b.angular_velocity);
  CHECK(std::abs(a.angular_velocity.z()) == doctest::Approx(0.01));
}

TEST_CASE("nearest reading picks the earlier one on ties") {
  std::vector<ImuReading> r{{0.0, Vec3::Zero()}, {0.01, Vec3::Ones()}};
  CHECK(&nearest_reading(r, 0.005) == &r[0]);
  CHECK(&nearest_reading(r, 0.006) == &r[1]);
  CHECK(&nearest_reading(r, 5.0) == &r[1]);
  CHECK_THROWS(nearest_reading({}, 0.0));
}

TEST_CASE("integrator follows an arc with exact inputs") {
  PoseIntegrator integ;
  VehicleState truth;
  VelocityEstimate v;
  v.velocity = Vec2(1.5, 0.0);
  v.valid = true;
  for (int k = 0; k < 300; ++k) {
    integ.update(v, 0.5, 0.01);
    truth = step_vehicle(truth, 1.5, 0.5, 0.01);
  }
  CHECK((integ.estimate().position - truth.position).norm() < 1e-3);
  CHECK(integ.estimate().yaw == doctest::Approx(truth.yaw));
  CHECK_THROWS(integ.update(v, 0.0, 0.0));
}

TEST_CASE("3 s trials stay within 5 percent of distance") {
  const PoseTrialConfig cfg;
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto r = run_pose_trial(cfg, seed);
    if (r.position_error <= 0.05 * r.distance) ++ok;
  }
  CHECK(ok >= 95);
}

TEST_CASE("bad inputs throw") {
  CHECK_THROWS(simulate_flow(BodyMotion{}, 0.0, kCam, FlowGridConfig{}, kClean, 100.0, 1, 0.0));
  CHECK_THROWS(estimate_velocity(FlowSample{}, 2.0, Vec2::Zero(), kCam));
}
