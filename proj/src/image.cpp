#include "rhc/image.hpp"

#include <algorithm>

namespace rhc {

Rect Rect::clipped(int width, int height) const {
  const int ax = std::clamp(x0, 0, width);
  const int ay = std::clamp(y0, 0, height);
  const int bx = std::clamp(x1(), 0, width);
  const int by = std::clamp(y1(), 0, height);
  return {ax, ay, std::max(0, bx - ax), std::max(0, by - ay)};
}

}  // namespace rhc
