#pragma once

// Patch/column descriptors for monocular depth regression.
//
// Every patch of a non-overlapping grid is described by three regions: the
// patch itself, the full-height column of the same width, and the full-height
// column three patches wide centred on it (clipped at the image border). Each
// enabled feature group is evaluated on the three regions and the results are
// laid out group-major: [group g: patch | column | wide column] for g in
// canonical order. Group slots are therefore contiguous, which is what
// budgeted group selection works on.

#include "rhc/image.hpp"
#include "rhc/sim_world.hpp"

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace rhc {

enum class FeatureGroup : int { flow_stats = 0, radon = 1, structure_tensor = 2, laws = 3, hog = 4 };
inline constexpr int kNumFeatureGroups = 5;
inline constexpr int kRegionsPerPatch = 3;
inline constexpr double kRatioEpsilon = 1e-8;

std::string_view group_name(FeatureGroup g);
/// Throws std::invalid_argument for unknown names.
FeatureGroup parse_group(std::string_view name);
/// Descriptor length of one group on one region.
int group_region_dims(FeatureGroup g);

class GroupSet {
 public:
  GroupSet() = default;
  GroupSet(std::initializer_list<FeatureGroup> groups) {
    for (FeatureGroup g : groups) insert(g);
  }
  static GroupSet all();

  void insert(FeatureGroup g) { bits_ |= 1u << static_cast<int>(g); }
  [[nodiscard]] bool contains(FeatureGroup g) const { return (bits_ >> static_cast<int>(g)) & 1u; }
  [[nodiscard]] bool empty() const { return bits_ == 0; }
  /// Members in canonical order.
  [[nodiscard]] std::vector<FeatureGroup> list() const;
  [[nodiscard]] std::string to_string() const;
  bool operator==(const GroupSet&) const = default;

 private:
  unsigned bits_{0};
};

struct GroupSlot {
  FeatureGroup group{FeatureGroup::flow_stats};
  int offset{0};
  int length{0};
  double cost_ms{0.0};
};

struct FeatureLayout {
  std::vector<GroupSlot> slots;

  static FeatureLayout for_groups(const GroupSet& groups);
  [[nodiscard]] int dims() const;
  [[nodiscard]] GroupSet groups() const;
  [[nodiscard]] const GroupSlot* find(FeatureGroup g) const;
  [[nodiscard]] std::vector<std::string> column_names() const;
  /// Same groups, offsets and lengths (costs are not compared).
  [[nodiscard]] bool same_shape(const FeatureLayout& other) const;
};

struct PatchGrid {
  int patch_size{16};
  int rows{0};
  int cols{0};

  /// Largest tiling of a width x height image; the remainder is cropped.
  static PatchGrid for_image(int width, int height, int patch_size = 16);
  [[nodiscard]] int count() const { return rows * cols; }
  [[nodiscard]] Rect patch_rect(int r, int c) const;
  [[nodiscard]] Rect column_rect(int c) const;
  /// Three-patch-wide column centred on column c, clipped to the tiled area.
  [[nodiscard]] Rect wide_column_rect(int c) const;
  /// Throws std::invalid_argument if the grid does not fit the image.
  void check_fits(int width, int height) const;
  bool operator==(const PatchGrid&) const = default;
};

// ---- single-region descriptors ------------------------------------------

struct FlowStats {
  double mean{0.0};
  double min{0.0};
  double max{0.0};
};

struct FlowField {
  ImageF dx;
  ImageF dy;
  ImageF magnitude;
};

struct FlowNoise {
  /// Per-component noise of the dense flow (pixels), uniform with this standard deviation.
  double sigma_px{0.5};
  /// Flow magnitudes are clipped here (points passing behind the previous camera).
  double max_px{60.0};
};

/// Analytic image motion (pixels) of each pixel of `frame` relative to `prev`,
/// using the ray depths of `frame` and the two camera poses, plus noise keyed
/// by the frame contents.
FlowField compute_flow_field(const Frame& frame, const Frame& prev, const CameraModel& camera,
                             const FlowNoise& noise = {});

FlowStats flow_stats(const ImageF& flow_magnitude, const Rect& region);
/// Unsigned-orientation histogram with `bins` bins centred on k*pi/bins, over a
/// 2x2 cell subdivision of the region; each cell is L2-normalised.
std::vector<double> hog(const ImageF& image, const Rect& region, int bins = 9);
/// Line sums of gradient magnitude at n_angles angles in [0, pi); the two largest per angle.
std::vector<double> radon(const ImageF& image, const Rect& region, int n_angles = 12);
/// Region means of the smoothed structure-tensor eigenvalues and coherence.
std::array<double, 3> structure_tensor(const ImageF& image, const Rect& region);
/// Mean absolute responses to the nine 3x3 Laws masks on the local-mean-removed image.
std::array<double, 9> laws_masks(const ImageF& image, const Rect& region);

// ---- whole-frame extraction -----------------------------------------------

struct PatchFeatures {
  FeatureLayout layout;
  PatchGrid grid;
  Eigen::MatrixXd values;  // one row per patch, row-major patch order
  bool flow_missing{false};
};

/// Reusable extractor. Holds per-frame scratch maps, so one instance must not
/// be shared between threads; results do not depend on the instance.
class FeatureExtractor {
 public:
  FeatureExtractor(const CameraModel& camera, const PatchGrid& grid, const GroupSet& groups,
                   const FlowNoise& flow_noise = {});

  PatchFeatures extract(const Frame& frame, const Frame* prev);
  /// Writes rows for the listed patch indices into `out` (out.rows() == patches.size()).
  bool extract_rows(const Frame& frame, const Frame* prev, const std::vector<int>& patches, Eigen::MatrixXd& out);

  [[nodiscard]] const FeatureLayout& layout() const { return layout_; }
  [[nodiscard]] const PatchGrid& grid() const { return grid_; }
  [[nodiscard]] const CameraModel& camera() const { return camera_; }

 private:
  struct Maps;
  void compute_maps(const Frame& frame, const Frame* prev);
  void region_features(FeatureGroup g, const Rect& r, double* out, int region_kind, int index) const;

  CameraModel camera_;
  PatchGrid grid_;
  GroupSet groups_;
  FlowNoise flow_noise_;
  FeatureLayout layout_;
  std::shared_ptr<Maps> maps_;
};

PatchFeatures extract_patch_features(const Frame& frame, const Frame* prev, const CameraModel& camera,
                                     const PatchGrid& grid, const GroupSet& enabled);

/// Wall-clock cost (ms) of extracting each group alone on a rendered frame of
/// the given camera; median over `reps` runs.
std::array<double, kNumFeatureGroups> measure_group_costs(const CameraModel& camera, int patch_size = 16,
                                                          int reps = 5);

/// CSV with one row per patch, header from the layout; optional trailing depth column.
void write_feature_csv(std::ostream& os, const FeatureLayout& layout, const Eigen::MatrixXd& values,
                       const Eigen::VectorXd* depth = nullptr);

}  // namespace rhc
