#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace rhc {

/// Axis-aligned pixel rectangle, half-open: [x0, x0 + w) x [y0, y0 + h).
struct Rect {
  int x0{0};
  int y0{0};
  int w{0};
  int h{0};

  [[nodiscard]] int x1() const { return x0 + w; }
  [[nodiscard]] int y1() const { return y0 + h; }
  [[nodiscard]] long area() const { return static_cast<long>(w) * h; }
  [[nodiscard]] bool empty() const { return w <= 0 || h <= 0; }
  /// Intersection with [0, width) x [0, height).
  [[nodiscard]] Rect clipped(int width, int height) const;
  bool operator==(const Rect&) const = default;
};

/// Row-major 2D raster.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(x >= 0 && x < width_ && y >= 0 && y < height_);
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void resize(int width, int height, T fill = T{}) {
    width_ = width;
    height_ = height;
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  bool operator==(const Image&) const = default;

 private:
  int width_{0};
  int height_{0};
  std::vector<T> data_;
};

using ImageF = Image<float>;
using ImageD = Image<double>;

/// Summed-area table with one row/column of zero padding.
class IntegralImage {
 public:
  IntegralImage() = default;
  template <typename T>
  explicit IntegralImage(const Image<T>& img) {
    build(img);
  }

  template <typename T>
  void build(const Image<T>& img) {
    w_ = img.width();
    h_ = img.height();
    sums_.assign(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0.0);
    for (int y = 0; y < h_; ++y) {
      const T* src = img.row(y);
      double* prev = &sums_[static_cast<std::size_t>(y) * (w_ + 1)];
      double* cur = prev + (w_ + 1);
      double run = 0.0;
      for (int x = 0; x < w_; ++x) {
        run += static_cast<double>(src[x]);
        cur[x + 1] = prev[x + 1] + run;
      }
    }
  }

  [[nodiscard]] double sum(const Rect& r) const {
    const std::size_t stride = static_cast<std::size_t>(w_) + 1;
    const double* a = &sums_[static_cast<std::size_t>(r.y0) * stride];
    const double* b = &sums_[static_cast<std::size_t>(r.y1()) * stride];
    return b[r.x1()] - b[r.x0] - a[r.x1()] + a[r.x0];
  }
  [[nodiscard]] double mean(const Rect& r) const {
    return r.area() > 0 ? sum(r) / static_cast<double>(r.area()) : 0.0;
  }
  [[nodiscard]] int width() const { return w_; }
  [[nodiscard]] int height() const { return h_; }

 private:
  int w_{0};
  int h_{0};
  std::vector<double> sums_;
};

}  // namespace rhc
