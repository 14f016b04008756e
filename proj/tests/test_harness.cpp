#include "rhc/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rhc;

namespace {

RunConfig oracle_config(double max_distance = 15.0) {
  RunConfig c;
  c.mode = PredictionMode::oracle;
  c.max_distance = max_distance;
  c.corridor_length = max_distance + 10.0;
  return c;
}

}  // namespace

TEST_CASE("an empty forest flies to the distance cap") {
  RunConfig c = oracle_config(10.0);
  c.density = 0.0;
  Harness h(c, nullptr);
  const auto r = h.run_episode(3);
  CHECK(r.outcome == Outcome::max_distance);
  CHECK(r.trees_encountered == 0);
  CHECK(r.distance_flown >= 10.0);
  CHECK(r.distance_flown < 10.5);
  CHECK(r.planning_cycles > 0);
}

TEST_CASE("same config and seed give byte-identical reports") {
  Harness h(oracle_config(), nullptr);
  const std::string a = report_to_json(h.run_episode(7)).dump();
  const std::string b = report_to_json(Harness(oracle_config(), nullptr).run_episode(7)).dump();
  CHECK(a == b);
}

TEST_CASE("avoided trees never exceed encountered ones") {
  Harness h(oracle_config(), nullptr);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto r = h.run_episode(seed);
    CHECK(r.trees_avoided <= r.trees_encountered);
    CHECK(r.large_avoided <= r.large_encountered);
    CHECK(r.small_avoided <= r.small_encountered);
    CHECK(r.large_encountered + r.small_encountered == r.trees_encountered);
    CHECK((r.outcome == Outcome::collision) == (r.failure != FailureType::none));
  }
}

TEST_CASE("modes are paired on the same forest") {
  RunConfig a = oracle_config();
  RunConfig b = a;
  b.mode = PredictionMode::multiple;
  const auto sa = episode_scenario(a, 11);
  const auto sb = episode_scenario(b, 11);
  std::ostringstream x, y;
  write_scenario(x, sa);
  write_scenario(y, sb);
  CHECK(x.str() == y.str());
}

TEST_CASE("config JSON roundtrip, overrides and unknown keys") {
  RunConfig c;
  c.density = 0.01;
  c.mode = PredictionMode::single;
  c.planner.w_dir = 0.7;
  c.cloud.tau = 0.0;
  const auto j = config_to_json(c);
  CHECK(config_to_json(config_from_json(j)) == j);

  auto doc = j;
  apply_override(doc, "planner.w_dir=1.5");
  apply_override(doc, "mode=multiple");
  const RunConfig o = config_from_json(doc);
  CHECK(o.planner.w_dir == 1.5);
  CHECK(o.mode == PredictionMode::multiple);

  nlohmann::json bad = {{"planner", {{"w_dirr", 1.0}}}};
  CHECK_THROWS(config_from_json(bad));
  CHECK_THROWS(config_from_json(nlohmann::json{{"nonsense", 1}}));
  RunConfig invalid;
  invalid.perception_rate = 7;
  CHECK_THROWS(invalid.validate());
}

TEST_CASE("learned modes need a model") {
  RunConfig c;
  c.mode = PredictionMode::multiple;
  CHECK_THROWS(Harness(c, nullptr));
}

TEST_CASE("exact sign test") {
  CHECK(sign_test_p(10, 0) == doctest::Approx(2.0 / 1024.0));
  CHECK(sign_test_p(0, 10) == doctest::Approx(2.0 / 1024.0));
  CHECK(sign_test_p(8, 2) == doctest::Approx(112.0 / 1024.0));
  CHECK(sign_test_p(5, 5) == 1.0);
  CHECK(sign_test_p(0, 0) == 1.0);
}

TEST_CASE("paired comparison counts ties and checks pairing") {
  std::vector<RunReport> a(3), b(3);
  for (int i = 0; i < 3; ++i) a[i].seed = b[i].seed = i;
  a[0].distance_flown = 5;
  b[0].distance_flown = 3;
  a[1].distance_flown = 2;
  b[1].distance_flown = 4;
  const auto pc = compare_paired(a, b);
  CHECK(pc.wins == 1);
  CHECK(pc.losses == 1);
  CHECK(pc.ties == 1);
  b[2].seed = 9;
  CHECK_THROWS(compare_paired(a, b));
}

TEST_CASE("summary arithmetic") {
  std::vector<RunReport> rs(2);
  rs[0].distance_flown = 10;
  rs[0].trees_encountered = 4;
  rs[0].trees_avoided = 3;
  rs[0].outcome = Outcome::collision;
  rs[0].failure = FailureType::thin_tree;
  rs[1].distance_flown = 30;
  rs[1].trees_encountered = 6;
  rs[1].trees_avoided = 6;
  const auto s = summarize("x", rs);
  CHECK(s.avoidance_pct() == doctest::Approx(90.0));
  CHECK(s.distance_per_collision() == doctest::Approx(40.0));
  CHECK(s.mean_episode_distance() == doctest::Approx(20.0));
  CHECK(s.failures[static_cast<int>(FailureType::thin_tree)] == 1);
}

TEST_CASE("dodge scenario keeps the start clear") {
  for (std::uint64_t v = 0; v < 8; ++v) {
    const auto sc = dodge_scenario(v);
    CHECK(sc.trees.size() == 9);
    VehicleState s;
    s.position = sc.start;
    CHECK_FALSE(check_collision(sc, s, 0.25));
  }
}

TEST_CASE("memory avoids the dodge trunks with oracle depth") {
  RunConfig c = oracle_config(25.0);
  Harness h(c, nullptr);
  for (std::uint64_t v = 0; v < 4; ++v) CHECK(h.run_episode(dodge_scenario(v)).outcome != Outcome::collision);
}

TEST_CASE("per-cycle log is written") {
  const auto path = (std::filesystem::temp_directory_path() / "rhc_test_log.jsonl").string();
  RunConfig c = oracle_config(5.0);
  c.log_path = path;
  const auto r = Harness(c, nullptr).run_episode(2);
  std::ifstream is(path);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("chosen"));
    ++n;
  }
  CHECK(n == r.planning_cycles);
  std::filesystem::remove(path);
}
