#include "rhc/common.hpp"

#include <bit>
#include <cstring>

namespace rhc {

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Vec2 rotate(const Vec2& v, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

Vec2 Pose2::to_world(const Vec2& body) const { return position() + rotate(body, yaw); }

Vec2 Pose2::to_body(const Vec2& world) const { return rotate(world - position(), -yaw); }

Pose2 Pose2::compose(const Pose2& body) const {
  const Vec2 p = to_world(body.position());
  return {p.x(), p.y(), wrap_angle(yaw + body.yaw)};
}

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finaliser
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (mix64(b) + 0x632be59bd9b4e019ULL + (a << 6) + (a >> 2)));
}

std::uint64_t hash_double(double v) {
  if (v == 0.0) v = 0.0;  // fold -0
  return mix64(std::bit_cast<std::uint64_t>(v));
}

double hash_unit(std::uint64_t h) { return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53; }

double hash_normal(std::uint64_t h) {
  const double u1 = 1.0 - hash_unit(h);  // (0, 1]
  const double u2 = hash_unit(h ^ 0xa5a5a5a5a5a5a5a5ULL);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  }
  return std::sin(x) / x;
}

}  // namespace rhc
