#include "rhc/features.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace rhc {

namespace {

constexpr int kHogBins = 9;
constexpr int kRadonAngles = 12;
constexpr int kRadonKeep = 2;

// ---- per-pixel maps ---------------------------------------------------------

void compute_gradients(const ImageF& img, ImageF& gx, ImageF& gy, ImageF& mag) {
  const int W = img.width();
  const int H = img.height();
  gx.resize(W, H);
  gy.resize(W, H);
  mag.resize(W, H);
  for (int y = 0; y < H; ++y) {
    const float* r = img.row(y);
    const float* up = img.row(std::max(y - 1, 0));
    const float* dn = img.row(std::min(y + 1, H - 1));
    float* ox = gx.row(y);
    float* oy = gy.row(y);
    float* om = mag.row(y);
    for (int x = 0; x < W; ++x) {
      const float dx = 0.5f * (r[std::min(x + 1, W - 1)] - r[std::max(x - 1, 0)]);
      const float dy = 0.5f * (dn[x] - up[x]);
      ox[x] = dx;
      oy[x] = dy;
      om[x] = std::sqrt(dx * dx + dy * dy);
    }
  }
}

int orientation_bin(float dx, float dy, int bins) {
  double theta = std::atan2(static_cast<double>(dy), static_cast<double>(dx));
  if (theta < 0.0) theta += kPi;
  return static_cast<int>(theta / (kPi / bins) + 0.5) % bins;
}

void build_hog_integrals(const ImageF& gx, const ImageF& gy, const ImageF& mag, int bins,
                         std::vector<IntegralImage>& out, std::vector<ImageF>& scratch) {
  const int W = mag.width();
  const int H = mag.height();
  scratch.resize(bins);
  for (auto& s : scratch) s.resize(W, H, 0.0f);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const float m = mag(x, y);
      if (m <= 0.0f) continue;
      scratch[orientation_bin(gx(x, y), gy(x, y), bins)](x, y) = m;
    }
  }
  out.resize(bins);
  for (int b = 0; b < bins; ++b) out[b].build(scratch[b]);
}

void hog_from_integrals(const std::vector<IntegralImage>& integrals, const Rect& r, double* out) {
  const int bins = static_cast<int>(integrals.size());
  const int w0 = r.w / 2;
  const int h0 = r.h / 2;
  const Rect cells[4] = {{r.x0, r.y0, w0, h0},
                         {r.x0 + w0, r.y0, r.w - w0, h0},
                         {r.x0, r.y0 + h0, w0, r.h - h0},
                         {r.x0 + w0, r.y0 + h0, r.w - w0, r.h - h0}};
  for (int c = 0; c < 4; ++c) {
    double* cell = out + c * bins;
    double norm2 = 0.0;
    for (int b = 0; b < bins; ++b) {
      cell[b] = cells[c].empty() ? 0.0 : integrals[b].sum(cells[c]);
      norm2 += cell[b] * cell[b];
    }
    const double scale = 1.0 / (std::sqrt(norm2) + kRatioEpsilon);
    for (int b = 0; b < bins; ++b) cell[b] *= scale;
  }
}

void blur5(const ImageF& in, ImageF& out, ImageF& tmp) {
  static constexpr float k[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
  const int W = in.width();
  const int H = in.height();
  tmp.resize(W, H);
  out.resize(W, H);
  for (int y = 0; y < H; ++y) {
    const float* r = in.row(y);
    float* o = tmp.row(y);
    for (int x = 0; x < W; ++x) {
      float acc = 0.0f;
      for (int j = -2; j <= 2; ++j) acc += k[j + 2] * r[std::clamp(x + j, 0, W - 1)];
      o[x] = acc;
    }
  }
  for (int y = 0; y < H; ++y) {
    float* o = out.row(y);
    const float* rows[5];
    for (int j = -2; j <= 2; ++j) rows[j + 2] = tmp.row(std::clamp(y + j, 0, H - 1));
    for (int x = 0; x < W; ++x) {
      float acc = 0.0f;
      for (int j = 0; j < 5; ++j) acc += k[j] * rows[j][x];
      o[x] = acc;
    }
  }
}

struct TensorScratch {
  ImageF jxx, jxy, jyy, sxx, sxy, syy, tmp, l1, l2, coh;
};

void build_structure_integrals(const ImageF& gx, const ImageF& gy, TensorScratch& s, IntegralImage out[3]) {
  const int W = gx.width();
  const int H = gx.height();
  s.jxx.resize(W, H);
  s.jxy.resize(W, H);
  s.jyy.resize(W, H);
  for (std::size_t i = 0; i < gx.data().size(); ++i) {
    const float dx = gx.data()[i];
    const float dy = gy.data()[i];
    s.jxx.data()[i] = dx * dx;
    s.jxy.data()[i] = dx * dy;
    s.jyy.data()[i] = dy * dy;
  }
  blur5(s.jxx, s.sxx, s.tmp);
  blur5(s.jxy, s.sxy, s.tmp);
  blur5(s.jyy, s.syy, s.tmp);
  s.l1.resize(W, H);
  s.l2.resize(W, H);
  s.coh.resize(W, H);
  for (std::size_t i = 0; i < s.sxx.data().size(); ++i) {
    const double a = s.sxx.data()[i];
    const double b = s.sxy.data()[i];
    const double c = s.syy.data()[i];
    const double half_tr = 0.5 * (a + c);
    const double disc = std::sqrt(std::max(0.0, 0.25 * (a - c) * (a - c) + b * b));
    const double l1 = half_tr + disc;
    const double l2 = std::max(0.0, half_tr - disc);
    s.l1.data()[i] = static_cast<float>(l1);
    s.l2.data()[i] = static_cast<float>(l2);
    s.coh.data()[i] = static_cast<float>((l1 - l2) / (l1 + l2 + kRatioEpsilon));
  }
  out[0].build(s.l1);
  out[1].build(s.l2);
  out[2].build(s.coh);
}

struct LawsScratch {
  ImageF centred, h[3], resp;
};

void build_laws_integrals(const ImageF& img, LawsScratch& s, IntegralImage out[9]) {
  static constexpr float k3[3][3] = {{1, 2, 1}, {-1, 0, 1}, {-1, 2, -1}};  // L3, E3, S3
  const int W = img.width();
  const int H = img.height();
  // Remove the 5x5 local mean (box clipped to the image).
  const IntegralImage box(img);
  s.centred.resize(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const Rect r = Rect{x - 2, y - 2, 5, 5}.clipped(W, H);
      s.centred(x, y) = static_cast<float>(img(x, y) - box.mean(r));
    }
  }
  for (int i = 0; i < 3; ++i) {
    s.h[i].resize(W, H);
    for (int y = 0; y < H; ++y) {
      const float* r = s.centred.row(y);
      float* o = s.h[i].row(y);
      for (int x = 0; x < W; ++x)
        o[x] = k3[i][0] * r[std::max(x - 1, 0)] + k3[i][1] * r[x] + k3[i][2] * r[std::min(x + 1, W - 1)];
    }
  }
  s.resp.resize(W, H);
  // Mask (v, h) = outer product of vertical kernel v and horizontal kernel h.
  for (int v = 0; v < 3; ++v) {
    for (int hk = 0; hk < 3; ++hk) {
      const ImageF& src = s.h[hk];
      for (int y = 0; y < H; ++y) {
        const float* up = src.row(std::max(y - 1, 0));
        const float* md = src.row(y);
        const float* dn = src.row(std::min(y + 1, H - 1));
        float* o = s.resp.row(y);
        for (int x = 0; x < W; ++x) o[x] = std::abs(k3[v][0] * up[x] + k3[v][1] * md[x] + k3[v][2] * dn[x]);
      }
      out[v * 3 + hk].build(s.resp);
    }
  }
}

// Radon line bins are 1 px wide in image coordinates, so that the histogram
// of a union of regions is the sum of the regions' histograms.
struct RadonBinning {
  double c{1.0};
  double s{0.0};
  double smin{0.0};
  int nbins{0};
};

std::vector<RadonBinning> radon_binning(int W, int H, int n_angles) {
  std::vector<RadonBinning> out(n_angles);
  for (int k = 0; k < n_angles; ++k) {
    const double th = k * kPi / n_angles;
    RadonBinning b{std::cos(th), std::sin(th), 0.0, 0};
    const double corners[4] = {0.0, W * b.c, H * b.s, W * b.c + H * b.s};
    const double lo = *std::min_element(corners, corners + 4);
    const double hi = *std::max_element(corners, corners + 4);
    b.smin = std::floor(lo);
    b.nbins = static_cast<int>(std::ceil(hi) - b.smin) + 1;
    out[k] = b;
  }
  return out;
}

inline int radon_bin(const RadonBinning& b, int x, int y) {
  return static_cast<int>(std::floor((x + 0.5) * b.c + (y + 0.5) * b.s - b.smin));
}

void top_two(const double* hist, int n, double scale, double* out) {
  double a = 0.0, b = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = hist[i];
    if (v > a) {
      b = a;
      a = v;
    } else if (v > b) {
      b = v;
    }
  }
  out[0] = a * scale;
  out[1] = b * scale;
}

double radon_scale(const Rect& r) { return 1.0 / std::max(1, std::max(r.w, r.h)); }

void radon_direct(const ImageF& mag, const std::vector<RadonBinning>& binning, const Rect& r, double* out) {
  std::vector<double> hist;
  for (std::size_t k = 0; k < binning.size(); ++k) {
    const RadonBinning& b = binning[k];
    hist.assign(b.nbins, 0.0);
    for (int y = r.y0; y < r.y1(); ++y)
      for (int x = r.x0; x < r.x1(); ++x) hist[radon_bin(b, x, y)] += mag(x, y);
    top_two(hist.data(), b.nbins, radon_scale(r), out + kRadonKeep * k);
  }
}

void check_region(const Rect& region, int W, int H) {
  if (region.empty() || region.clipped(W, H) != region)
    throw std::invalid_argument("feature region must be non-empty and inside the image");
}

}  // namespace

// ---- naming / layout --------------------------------------------------------

std::string_view group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::flow_stats: return "flow_stats";
    case FeatureGroup::radon: return "radon";
    case FeatureGroup::structure_tensor: return "structure_tensor";
    case FeatureGroup::laws: return "laws";
    case FeatureGroup::hog: return "hog";
  }
  return "?";
}

FeatureGroup parse_group(std::string_view name) {
  for (int i = 0; i < kNumFeatureGroups; ++i) {
    const auto g = static_cast<FeatureGroup>(i);
    if (group_name(g) == name) return g;
  }
  throw std::invalid_argument("unknown feature group '" + std::string(name) + "'");
}

int group_region_dims(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::flow_stats: return 3;
    case FeatureGroup::radon: return kRadonKeep * kRadonAngles;
    case FeatureGroup::structure_tensor: return 3;
    case FeatureGroup::laws: return 9;
    case FeatureGroup::hog: return 4 * kHogBins;
  }
  return 0;
}

GroupSet GroupSet::all() {
  GroupSet s;
  for (int i = 0; i < kNumFeatureGroups; ++i) s.insert(static_cast<FeatureGroup>(i));
  return s;
}

std::vector<FeatureGroup> GroupSet::list() const {
  std::vector<FeatureGroup> out;
  for (int i = 0; i < kNumFeatureGroups; ++i)
    if (contains(static_cast<FeatureGroup>(i))) out.push_back(static_cast<FeatureGroup>(i));
  return out;
}

std::string GroupSet::to_string() const {
  std::string out;
  for (FeatureGroup g : list()) {
    if (!out.empty()) out += ',';
    out += group_name(g);
  }
  return out;
}

FeatureLayout FeatureLayout::for_groups(const GroupSet& groups) {
  FeatureLayout layout;
  int offset = 0;
  for (FeatureGroup g : groups.list()) {
    const int len = kRegionsPerPatch * group_region_dims(g);
    layout.slots.push_back({g, offset, len, 0.0});
    offset += len;
  }
  return layout;
}

int FeatureLayout::dims() const {
  int n = 0;
  for (const auto& s : slots) n += s.length;
  return n;
}

GroupSet FeatureLayout::groups() const {
  GroupSet out;
  for (const auto& s : slots) out.insert(s.group);
  return out;
}

const GroupSlot* FeatureLayout::find(FeatureGroup g) const {
  for (const auto& s : slots)
    if (s.group == g) return &s;
  return nullptr;
}

std::vector<std::string> FeatureLayout::column_names() const {
  static constexpr const char* region_names[kRegionsPerPatch] = {"patch", "column", "wide"};
  std::vector<std::string> names;
  for (const auto& s : slots) {
    const int per = s.length / kRegionsPerPatch;
    for (int r = 0; r < kRegionsPerPatch; ++r)
      for (int i = 0; i < per; ++i)
        names.push_back(std::string(group_name(s.group)) + "." + region_names[r] + "." + std::to_string(i));
  }
  return names;
}

bool FeatureLayout::same_shape(const FeatureLayout& other) const {
  if (slots.size() != other.slots.size()) return false;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].group != other.slots[i].group || slots[i].offset != other.slots[i].offset ||
        slots[i].length != other.slots[i].length)
      return false;
  }
  return true;
}

PatchGrid PatchGrid::for_image(int width, int height, int patch_size) {
  if (patch_size < 2) throw std::invalid_argument("PatchGrid: patch size must be at least 2 px");
  PatchGrid g{patch_size, height / patch_size, width / patch_size};
  if (g.rows < 1 || g.cols < 1) throw std::invalid_argument("PatchGrid: patch larger than the image");
  return g;
}

Rect PatchGrid::patch_rect(int r, int c) const {
  return {c * patch_size, r * patch_size, patch_size, patch_size};
}

Rect PatchGrid::column_rect(int c) const { return {c * patch_size, 0, patch_size, rows * patch_size}; }

Rect PatchGrid::wide_column_rect(int c) const {
  return Rect{(c - 1) * patch_size, 0, 3 * patch_size, rows * patch_size}.clipped(cols * patch_size,
                                                                                  rows * patch_size);
}

void PatchGrid::check_fits(int width, int height) const {
  if (patch_size < 2 || rows < 1 || cols < 1 || rows * patch_size > height || cols * patch_size > width)
    throw std::invalid_argument("PatchGrid does not fit the frame dimensions");
}

// ---- single-region descriptors ----------------------------------------------

FlowField compute_flow_field(const Frame& frame, const Frame& prev, const CameraModel& camera,
                             const FlowNoise& noise) {
  const int W = frame.width();
  const int H = frame.height();
  if (prev.width() != W || prev.height() != H) throw std::invalid_argument("compute_flow_field: frame size mismatch");
  FlowField out;
  out.dx.resize(W, H);
  out.dy.resize(W, H);
  out.magnitude.resize(W, H);
  const double f = camera.focal();
  const double cx = camera.cx();
  const double cy = camera.cy();
  const Pose2& p1 = frame.camera_pose;
  const Pose2& p0 = prev.camera_pose;
  const std::uint64_t seed = hash_combine(hash_double(frame.timestamp),
                                          hash_combine(hash_double(p1.x), hash_double(p1.y + 3.0 * p1.yaw)));
  const double amp = noise.sigma_px * 1.7320508075688772;  // uniform with the requested std
  for (int u = 0; u < W; ++u) {
    const double bearing = camera.column_bearing(u + 0.5);
    const double cos_b = std::cos(bearing);
    const double range = frame.true_depth(u, 0);
    const Vec2 point = p1.position() + range * Vec2(std::cos(p1.yaw + bearing), std::sin(p1.yaw + bearing));
    const Vec2 rel = p0.to_body(point);
    const double fwd = std::max(rel.x(), 0.05);
    const double u0 = cx - f * rel.y() / fwd;
    const double du = (u + 0.5) - u0;
    const double depth_ratio = range * cos_b / fwd;  // forward depth now / forward depth before
    for (int v = 0; v < H; ++v) {
      const double row = v + 0.5;
      const double v0 = cy - (cy - row) * depth_ratio;
      const std::uint64_t h = hash_combine(seed, static_cast<std::uint64_t>(v) * W + u);
      double fx = du + amp * (2.0 * hash_unit(h) - 1.0);
      double fy = (row - v0) + amp * (2.0 * hash_unit(h ^ 0x5bd1e995ULL) - 1.0);
      double m = std::sqrt(fx * fx + fy * fy);
      if (m > noise.max_px) {
        fx *= noise.max_px / m;
        fy *= noise.max_px / m;
        m = noise.max_px;
      }
      out.dx(u, v) = static_cast<float>(fx);
      out.dy(u, v) = static_cast<float>(fy);
      out.magnitude(u, v) = static_cast<float>(m);
    }
  }
  return out;
}

FlowStats flow_stats(const ImageF& flow_magnitude, const Rect& region) {
  check_region(region, flow_magnitude.width(), flow_magnitude.height());
  FlowStats s{0.0, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (int y = region.y0; y < region.y1(); ++y) {
    for (int x = region.x0; x < region.x1(); ++x) {
      const double m = flow_magnitude(x, y);
      s.mean += m;
      s.min = std::min(s.min, m);
      s.max = std::max(s.max, m);
    }
  }
  s.mean /= static_cast<double>(region.area());
  return s;
}

std::vector<double> hog(const ImageF& image, const Rect& region, int bins) {
  check_region(region, image.width(), image.height());
  if (region.w < 2 || region.h < 2) throw std::invalid_argument("hog: region must be at least 2x2");
  if (bins < 1) throw std::invalid_argument("hog: bins must be positive");
  ImageF gx, gy, mag;
  compute_gradients(image, gx, gy, mag);
  std::vector<IntegralImage> integrals;
  std::vector<ImageF> scratch;
  build_hog_integrals(gx, gy, mag, bins, integrals, scratch);
  std::vector<double> out(4 * bins);
  hog_from_integrals(integrals, region, out.data());
  return out;
}

std::vector<double> radon(const ImageF& image, const Rect& region, int n_angles) {
  check_region(region, image.width(), image.height());
  if (n_angles < 1) throw std::invalid_argument("radon: n_angles must be positive");
  ImageF gx, gy, mag;
  compute_gradients(image, gx, gy, mag);
  std::vector<double> out(kRadonKeep * n_angles);
  radon_direct(mag, radon_binning(image.width(), image.height(), n_angles), region, out.data());
  return out;
}

std::array<double, 3> structure_tensor(const ImageF& image, const Rect& region) {
  check_region(region, image.width(), image.height());
  ImageF gx, gy, mag;
  compute_gradients(image, gx, gy, mag);
  TensorScratch scratch;
  IntegralImage ints[3];
  build_structure_integrals(gx, gy, scratch, ints);
  return {ints[0].mean(region), ints[1].mean(region), ints[2].mean(region)};
}

std::array<double, 9> laws_masks(const ImageF& image, const Rect& region) {
  check_region(region, image.width(), image.height());
  LawsScratch scratch;
  IntegralImage ints[9];
  build_laws_integrals(image, scratch, ints);
  std::array<double, 9> out{};
  for (int i = 0; i < 9; ++i) out[i] = ints[i].mean(region);
  return out;
}

// ---- whole-frame extraction -------------------------------------------------

struct FeatureExtractor::Maps {
  bool flow_valid{false};
  FlowField flow;
  IntegralImage flow_sum;
  std::vector<double> patch_flow_min, patch_flow_max;  // per patch
  std::vector<double> col_flow_min, col_flow_max;      // per column
  ImageF gx, gy, mag;
  std::vector<IntegralImage> hog_ints;
  std::vector<ImageF> hog_scratch;
  TensorScratch tensor_scratch;
  IntegralImage tensor_ints[3];
  LawsScratch laws_scratch;
  IntegralImage laws_ints[9];
  std::vector<RadonBinning> binning;
  std::vector<double> radon_patch, radon_col, radon_wide;  // kRadonKeep*angles per region
  std::vector<double> col_hist, wide_hist, patch_hist;
};

FeatureExtractor::FeatureExtractor(const CameraModel& camera, const PatchGrid& grid, const GroupSet& groups,
                                   const FlowNoise& flow_noise)
    : camera_(camera),
      grid_(grid),
      groups_(groups),
      flow_noise_(flow_noise),
      layout_(FeatureLayout::for_groups(groups)),
      maps_(std::make_shared<Maps>()) {
  camera_.validate();
  grid_.check_fits(camera_.width, camera_.height);
  if (groups_.empty()) throw std::invalid_argument("FeatureExtractor: no feature groups enabled");
}

void FeatureExtractor::compute_maps(const Frame& frame, const Frame* prev) {
  Maps& m = *maps_;
  const int W = frame.width();
  const int H = frame.height();
  const int ps = grid_.patch_size;

  m.flow_valid = false;
  if (groups_.contains(FeatureGroup::flow_stats) && prev != nullptr) {
    m.flow = compute_flow_field(frame, *prev, camera_, flow_noise_);
    m.flow_sum.build(m.flow.magnitude);
    m.flow_valid = true;
    m.patch_flow_min.assign(grid_.count(), 0.0);
    m.patch_flow_max.assign(grid_.count(), 0.0);
    m.col_flow_min.assign(grid_.cols, std::numeric_limits<double>::infinity());
    m.col_flow_max.assign(grid_.cols, -std::numeric_limits<double>::infinity());
    for (int r = 0; r < grid_.rows; ++r) {
      for (int c = 0; c < grid_.cols; ++c) {
        float lo = std::numeric_limits<float>::infinity();
        float hi = -lo;
        for (int y = r * ps; y < (r + 1) * ps; ++y) {
          const float* row = m.flow.magnitude.row(y);
          for (int x = c * ps; x < (c + 1) * ps; ++x) {
            lo = std::min(lo, row[x]);
            hi = std::max(hi, row[x]);
          }
        }
        m.patch_flow_min[r * grid_.cols + c] = lo;
        m.patch_flow_max[r * grid_.cols + c] = hi;
        m.col_flow_min[c] = std::min(m.col_flow_min[c], static_cast<double>(lo));
        m.col_flow_max[c] = std::max(m.col_flow_max[c], static_cast<double>(hi));
      }
    }
  }

  const bool need_grad = groups_.contains(FeatureGroup::radon) || groups_.contains(FeatureGroup::hog) ||
                         groups_.contains(FeatureGroup::structure_tensor);
  if (need_grad) compute_gradients(frame.pixels, m.gx, m.gy, m.mag);
  if (groups_.contains(FeatureGroup::hog)) build_hog_integrals(m.gx, m.gy, m.mag, kHogBins, m.hog_ints, m.hog_scratch);
  if (groups_.contains(FeatureGroup::structure_tensor)) build_structure_integrals(m.gx, m.gy, m.tensor_scratch, m.tensor_ints);
  if (groups_.contains(FeatureGroup::laws)) build_laws_integrals(frame.pixels, m.laws_scratch, m.laws_ints);

  if (groups_.contains(FeatureGroup::radon)) {
    if (m.binning.empty() || static_cast<int>(m.binning.size()) != kRadonAngles ||
        m.binning[0].nbins != radon_binning(W, H, kRadonAngles)[0].nbins)
      m.binning = radon_binning(W, H, kRadonAngles);
    const int dims = kRadonKeep * kRadonAngles;
    m.radon_patch.assign(static_cast<std::size_t>(grid_.count()) * dims, 0.0);
    m.radon_col.assign(static_cast<std::size_t>(grid_.cols) * dims, 0.0);
    m.radon_wide.assign(static_cast<std::size_t>(grid_.cols) * dims, 0.0);
    for (int k = 0; k < kRadonAngles; ++k) {
      const RadonBinning& b = m.binning[k];
      m.col_hist.assign(static_cast<std::size_t>(grid_.cols) * b.nbins, 0.0);
      for (int r = 0; r < grid_.rows; ++r) {
        for (int c = 0; c < grid_.cols; ++c) {
          const Rect pr = grid_.patch_rect(r, c);
          // Bin span of this patch.
          int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
          for (int cy : {pr.y0, pr.y1() - 1})
            for (int cx : {pr.x0, pr.x1() - 1}) {
              const int bin = radon_bin(b, cx, cy);
              lo = std::min(lo, bin);
              hi = std::max(hi, bin);
            }
          m.patch_hist.assign(hi - lo + 1, 0.0);
          for (int y = pr.y0; y < pr.y1(); ++y) {
            const float* row = m.mag.row(y);
            const double base = (y + 0.5) * b.s - b.smin;
            for (int x = pr.x0; x < pr.x1(); ++x)
              m.patch_hist[static_cast<int>(std::floor((x + 0.5) * b.c + base)) - lo] += row[x];
          }
          top_two(m.patch_hist.data(), hi - lo + 1, radon_scale(pr),
                  &m.radon_patch[static_cast<std::size_t>(r * grid_.cols + c) * dims + kRadonKeep * k]);
          double* col = &m.col_hist[static_cast<std::size_t>(c) * b.nbins];
          for (int i = 0; i <= hi - lo; ++i) col[lo + i] += m.patch_hist[i];
        }
      }
      m.wide_hist.assign(b.nbins, 0.0);
      for (int c = 0; c < grid_.cols; ++c) {
        const double* col = &m.col_hist[static_cast<std::size_t>(c) * b.nbins];
        top_two(col, b.nbins, radon_scale(grid_.column_rect(c)),
                &m.radon_col[static_cast<std::size_t>(c) * dims + kRadonKeep * k]);
        std::fill(m.wide_hist.begin(), m.wide_hist.end(), 0.0);
        for (int cc = std::max(0, c - 1); cc <= std::min(grid_.cols - 1, c + 1); ++cc) {
          const double* src = &m.col_hist[static_cast<std::size_t>(cc) * b.nbins];
          for (int i = 0; i < b.nbins; ++i) m.wide_hist[i] += src[i];
        }
        top_two(m.wide_hist.data(), b.nbins, radon_scale(grid_.wide_column_rect(c)),
                &m.radon_wide[static_cast<std::size_t>(c) * dims + kRadonKeep * k]);
      }
    }
  }
}

// region_kind: 0 = patch (index = patch id), 1 = column, 2 = wide column (index = column).
void FeatureExtractor::region_features(FeatureGroup g, const Rect& r, double* out, int region_kind, int index) const {
  const Maps& m = *maps_;
  switch (g) {
    case FeatureGroup::flow_stats: {
      if (!m.flow_valid) {
        out[0] = out[1] = out[2] = 0.0;
        return;
      }
      out[0] = m.flow_sum.mean(r);
      if (region_kind == 0) {
        out[1] = m.patch_flow_min[index];
        out[2] = m.patch_flow_max[index];
      } else {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        const int c0 = region_kind == 1 ? index : std::max(0, index - 1);
        const int c1 = region_kind == 1 ? index : std::min(grid_.cols - 1, index + 1);
        for (int c = c0; c <= c1; ++c) {
          lo = std::min(lo, m.col_flow_min[c]);
          hi = std::max(hi, m.col_flow_max[c]);
        }
        out[1] = lo;
        out[2] = hi;
      }
      return;
    }
    case FeatureGroup::radon: {
      const int dims = kRadonKeep * kRadonAngles;
      const std::vector<double>& src = region_kind == 0 ? m.radon_patch : region_kind == 1 ? m.radon_col : m.radon_wide;
      std::copy_n(&src[static_cast<std::size_t>(index) * dims], dims, out);
      return;
    }
    case FeatureGroup::structure_tensor:
      for (int i = 0; i < 3; ++i) out[i] = m.tensor_ints[i].mean(r);
      return;
    case FeatureGroup::laws:
      for (int i = 0; i < 9; ++i) out[i] = m.laws_ints[i].mean(r);
      return;
    case FeatureGroup::hog:
      hog_from_integrals(m.hog_ints, r, out);
      return;
  }
}

bool FeatureExtractor::extract_rows(const Frame& frame, const Frame* prev, const std::vector<int>& patches,
                                    Eigen::MatrixXd& out) {
  grid_.check_fits(frame.width(), frame.height());
  if (frame.width() != camera_.width || frame.height() != camera_.height)
    throw std::invalid_argument("FeatureExtractor: frame does not match the camera model");
  if (prev != nullptr && (prev->width() != frame.width() || prev->height() != frame.height()))
    throw std::invalid_argument("FeatureExtractor: previous frame has different dimensions");
  compute_maps(frame, prev);

  const int dims = layout_.dims();
  out.resize(static_cast<Eigen::Index>(patches.size()), dims);
  // Column-level descriptors are shared by every patch in the column.
  std::vector<double> col_vals(static_cast<std::size_t>(grid_.cols) * dims, 0.0);
  std::vector<char> col_done(grid_.cols, 0);
  std::vector<double> row(dims);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const int p = patches[i];
    if (p < 0 || p >= grid_.count()) throw std::out_of_range("FeatureExtractor: patch index out of range");
    const int r = p / grid_.cols;
    const int c = p % grid_.cols;
    double* cv = &col_vals[static_cast<std::size_t>(c) * dims];
    if (!col_done[c]) {
      for (const GroupSlot& s : layout_.slots) {
        const int per = s.length / kRegionsPerPatch;
        region_features(s.group, grid_.column_rect(c), cv + s.offset + per, 1, c);
        region_features(s.group, grid_.wide_column_rect(c), cv + s.offset + 2 * per, 2, c);
      }
      col_done[c] = 1;
    }
    for (const GroupSlot& s : layout_.slots) {
      const int per = s.length / kRegionsPerPatch;
      region_features(s.group, grid_.patch_rect(r, c), row.data() + s.offset, 0, p);
      std::copy_n(cv + s.offset + per, 2 * per, row.data() + s.offset + per);
    }
    for (int j = 0; j < dims; ++j) out(static_cast<Eigen::Index>(i), j) = row[j];
  }
  return maps_->flow_valid || !groups_.contains(FeatureGroup::flow_stats);
}

PatchFeatures FeatureExtractor::extract(const Frame& frame, const Frame* prev) {
  PatchFeatures pf;
  pf.layout = layout_;
  pf.grid = grid_;
  std::vector<int> all(grid_.count());
  for (int i = 0; i < grid_.count(); ++i) all[i] = i;
  const bool flow_ok = extract_rows(frame, prev, all, pf.values);
  pf.flow_missing = !flow_ok;
  return pf;
}

PatchFeatures extract_patch_features(const Frame& frame, const Frame* prev, const CameraModel& camera,
                                     const PatchGrid& grid, const GroupSet& enabled) {
  FeatureExtractor fx(camera, grid, enabled);
  return fx.extract(frame, prev);
}

std::array<double, kNumFeatureGroups> measure_group_costs(const CameraModel& camera, int patch_size, int reps) {
  const double side = 60.0;
  const ForestScenario sc = generate_scenario(1.0 / 36.0, Bounds::corridor(side, side), 1);
  const Pose2 p0{sc.start.x(), sc.start.y(), 0.0};
  const Pose2 p1{sc.start.x() + 0.3, sc.start.y(), 0.02};
  const Frame prev = render(sc, p0, camera, 0.0);
  const Frame cur = render(sc, p1, camera, 0.2);
  const PatchGrid grid = PatchGrid::for_image(camera.width, camera.height, patch_size);
  std::array<double, kNumFeatureGroups> costs{};
  for (int g = 0; g < kNumFeatureGroups; ++g) {
    FeatureExtractor fx(camera, grid, GroupSet{static_cast<FeatureGroup>(g)});
    fx.extract(cur, &prev);  // warm-up
    std::vector<double> times;
    for (int i = 0; i < std::max(1, reps); ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      fx.extract(cur, &prev);
      times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    costs[g] = std::max(times[times.size() / 2], 1e-3);
  }
  return costs;
}

void write_feature_csv(std::ostream& os, const FeatureLayout& layout, const Eigen::MatrixXd& values,
                       const Eigen::VectorXd* depth) {
  if (values.cols() != layout.dims()) throw std::invalid_argument("write_feature_csv: layout/values mismatch");
  if (depth != nullptr && depth->size() != values.rows())
    throw std::invalid_argument("write_feature_csv: depth/values row mismatch");
  const auto names = layout.column_names();
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  if (depth != nullptr) os << ",depth";
  os << '\n';
  const auto old_prec = os.precision(9);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) os << (c ? "," : "") << values(r, c);
    if (depth != nullptr) os << ',' << (*depth)(r);
    os << '\n';
  }
  os.precision(old_prec);
}

}  // namespace rhc
