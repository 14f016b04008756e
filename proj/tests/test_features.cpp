#include "rhc/features.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <random>

using namespace rhc;

namespace {

ImageF constant_image(int w, int h, float v) { return ImageF(w, h, v); }

// Step edge whose gradient points along `angle` (radians from +x, image y down).
ImageF oriented_edge(int w, int h, double angle) {
  ImageF img(w, h);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img(x, y) = static_cast<float>(0.5 + 0.3 * std::tanh(((x - w / 2.0) * c + (y - h / 2.0) * s) / 1.5));
  return img;
}

int argmax_bin(const std::vector<double>& h, int bins) {
  std::vector<double> total(bins, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i) total[i % bins] += h[i];
  return static_cast<int>(std::max_element(total.begin(), total.end()) - total.begin());
}

}  // namespace

TEST_CASE("default layout is 20x15 patches with 225 columns") {
  const auto grid = PatchGrid::for_image(320, 240, 16);
  CHECK(grid.rows == 15);
  CHECK(grid.cols == 20);
  const auto layout = FeatureLayout::for_groups(GroupSet::all());
  int per_region = 0;
  for (int g = 0; g < kNumFeatureGroups; ++g) per_region += group_region_dims(static_cast<FeatureGroup>(g));
  CHECK(per_region == 75);
  CHECK(layout.dims() == 3 * per_region);
  int offset = 0;
  for (const auto& s : layout.slots) {
    CHECK(s.offset == offset);
    CHECK(s.length == 3 * group_region_dims(s.group));
    offset += s.length;
  }
  CHECK(layout.column_names().size() == 225);
}

TEST_CASE("group names round-trip") {
  for (int g = 0; g < kNumFeatureGroups; ++g) {
    const auto fg = static_cast<FeatureGroup>(g);
    CHECK(parse_group(group_name(fg)) == fg);
  }
  CHECK_THROWS_AS(parse_group("sift"), std::invalid_argument);
  GroupSet s{FeatureGroup::hog, FeatureGroup::flow_stats};
  CHECK(s.list().front() == FeatureGroup::flow_stats);
}

TEST_CASE("wide column clips at the image border") {
  const auto grid = PatchGrid::for_image(320, 240, 16);
  CHECK(grid.wide_column_rect(0) == Rect{0, 0, 32, 240});
  CHECK(grid.wide_column_rect(19) == Rect{288, 0, 32, 240});
  CHECK(grid.wide_column_rect(5) == Rect{64, 0, 48, 240});
  CHECK(grid.column_rect(3) == Rect{48, 0, 16, 240});
}

TEST_CASE("flat image gives zero texture responses and zero flow") {
  const ImageF img = constant_image(64, 48, 0.5f);
  const Rect r{8, 8, 16, 16};
  for (double v : hog(img, r)) CHECK(v == 0.0);
  for (double v : radon(img, r)) CHECK(v == 0.0);
  for (double v : structure_tensor(img, r)) CHECK(v == doctest::Approx(0.0));
  for (double v : laws_masks(img, r)) CHECK(v == doctest::Approx(0.0));

  CameraModel cam;
  Frame f;
  f.pixels = constant_image(320, 240, 0.5f);
  f.true_depth = ImageD(320, 240, kMaxDepth);
  const FlowField flow = compute_flow_field(f, f, cam, FlowNoise{0.0, 60.0});
  const auto stats = flow_stats(flow.magnitude, Rect{0, 0, 320, 240});
  CHECK(stats.mean < 1e-9);
  CHECK(stats.max < 1e-9);
}

TEST_CASE("single-pixel flow region has mean = min = max") {
  ImageF m(4, 4);
  m(2, 1) = 3.5f;
  const auto s = flow_stats(m, Rect{2, 1, 1, 1});
  CHECK(s.mean == doctest::Approx(3.5));
  CHECK(s.min == doctest::Approx(3.5));
  CHECK(s.max == doctest::Approx(3.5));
}

TEST_CASE("forward translation flow grows toward the periphery") {
  CameraModel cam;
  ForestScenario sc;
  sc.bounds = Bounds::corridor(100, 100);
  // a ring of trunks so every column sees something at a similar range
  for (int i = 0; i < 36; ++i) {
    const double a = 2 * kPi * i / 36.0;
    sc.trees.push_back({50 + 8 * std::cos(a), 8 * std::sin(a), 0.45});
  }
  const Frame prev = render(sc, Pose2{49.8, 0, 0}, cam, 0.0);
  const Frame cur = render(sc, Pose2{50.0, 0, 0}, cam, 0.1);
  const FlowField flow = compute_flow_field(cur, prev, cam, FlowNoise{0.0, 60.0});
  const double centre = flow_stats(flow.magnitude, Rect{144, 0, 32, 100}).mean;
  const double edge = flow_stats(flow.magnitude, Rect{0, 0, 32, 100}).mean;
  CHECK(centre < edge);
  // zero motion gives zero flow
  const FlowField still = compute_flow_field(cur, cur, cam, FlowNoise{0.0, 60.0});
  CHECK(flow_stats(still.magnitude, Rect{0, 0, 320, 240}).max < 1e-9);
}

TEST_CASE("HoG of a vertical step edge peaks in the horizontal-gradient bin") {
  const ImageF img = oriented_edge(64, 64, 0.0);
  const auto h = hog(img, Rect{16, 16, 32, 32});
  CHECK(argmax_bin(h, 9) == 0);
  const double total = std::accumulate(h.begin(), h.end(), 0.0);
  double bin0 = 0.0;
  for (int c = 0; c < 4; ++c) bin0 += h[c * 9];
  CHECK(bin0 / total > 0.9);
}

TEST_CASE("rotating the edge by one bin width moves the HoG peak by one bin") {
  const auto h0 = hog(oriented_edge(96, 96, 0.0), Rect{24, 24, 48, 48});
  const auto h20 = hog(oriented_edge(96, 96, 20.0 * kPi / 180.0), Rect{24, 24, 48, 48});
  CHECK(argmax_bin(h20, 9) == argmax_bin(h0, 9) + 1);
}

TEST_CASE("features are finite on random images and deterministic") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  CameraModel cam;
  Frame f;
  f.pixels = ImageF(320, 240);
  f.true_depth = ImageD(320, 240, 5.0);
  for (auto& p : f.pixels.data()) p = u(rng);
  Frame prev = f;
  prev.camera_pose = Pose2{-0.3, 0, 0};
  const auto grid = PatchGrid::for_image(320, 240, 16);
  const auto a = extract_patch_features(f, &prev, cam, grid, GroupSet::all());
  const auto b = extract_patch_features(f, &prev, cam, grid, GroupSet::all());
  REQUIRE(a.values.rows() == 300);
  REQUIRE(a.values.cols() == 225);
  CHECK(a.values.allFinite());
  CHECK(a.values == b.values);
  CHECK_FALSE(a.flow_missing);
  const auto none = extract_patch_features(f, nullptr, cam, grid, GroupSet::all());
  CHECK(none.flow_missing);
  CHECK(none.values.allFinite());
}

TEST_CASE("row extraction matches whole-frame extraction") {
  const auto sc = generate_scenario(1.0 / 36.0, Bounds::corridor(40, 40), 9);
  CameraModel cam;
  const Frame prev = render(sc, Pose2{sc.start.x() - 0.3, sc.start.y(), 0.0}, cam, 0.0);
  const Frame cur = render(sc, Pose2{sc.start.x(), sc.start.y(), 0.0}, cam, 0.2);
  const auto grid = PatchGrid::for_image(320, 240, 16);
  FeatureExtractor fx(cam, grid, GroupSet::all());
  const auto all = fx.extract(cur, &prev);
  Eigen::MatrixXd rows;
  const std::vector<int> pick{0, 19, 150, 299};
  fx.extract_rows(cur, &prev, pick, rows);
  for (std::size_t i = 0; i < pick.size(); ++i) CHECK((rows.row(i) - all.values.row(pick[i])).norm() == 0.0);

  // a subset of groups reproduces the matching slots
  FeatureExtractor sub(cam, grid, GroupSet{FeatureGroup::laws, FeatureGroup::hog});
  const auto part = sub.extract(cur, &prev);
  for (const auto& slot : part.layout.slots) {
    const auto* full = all.layout.find(slot.group);
    REQUIRE(full != nullptr);
    CHECK((part.values.middleCols(slot.offset, slot.length) - all.values.middleCols(full->offset, full->length))
              .norm() == 0.0);
  }
}

TEST_CASE("group cost grows with image area") {
  CameraModel small;
  small.width = 160;
  small.height = 120;
  CameraModel big;
  big.width = 640;
  big.height = 480;
  const auto cs = measure_group_costs(small, 16, 3);
  const auto cb = measure_group_costs(big, 16, 3);
  for (int g = 0; g < kNumFeatureGroups; ++g) CHECK(cb[g] > cs[g]);
}
