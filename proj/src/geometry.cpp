#include "onramp/geometry.hpp"

#include <array>
#include <cmath>

namespace onramp {

OrientedBox footprint(const VehicleState& v, double inflation) {
  return {v.x, v.y, v.heading, 0.5 * v.length + inflation, 0.5 * v.width + inflation};
}

namespace {

struct Axis {
  double x, y;
};

// Half-length of the box's projection onto a unit axis.
double projected_radius(const OrientedBox& b, Axis axis) {
  const double c = std::cos(b.heading);
  const double s = std::sin(b.heading);
  return b.half_length * std::abs(c * axis.x + s * axis.y) +
         b.half_width * std::abs(-s * axis.x + c * axis.y);
}

}  // namespace

bool boxes_intersect(const OrientedBox& a, const OrientedBox& b) {
  const std::array<Axis, 4> axes = {
      Axis{std::cos(a.heading), std::sin(a.heading)},
      Axis{-std::sin(a.heading), std::cos(a.heading)},
      Axis{std::cos(b.heading), std::sin(b.heading)},
      Axis{-std::sin(b.heading), std::cos(b.heading)},
  };
  const double dx = b.cx - a.cx;
  const double dy = b.cy - a.cy;
  for (const auto& axis : axes) {
    const double distance = std::abs(dx * axis.x + dy * axis.y);
    if (distance >= projected_radius(a, axis) + projected_radius(b, axis)) return false;
  }
  return true;
}

bool collision_check(const VehicleState& a, const VehicleState& b) {
  return boxes_intersect(footprint(a), footprint(b));
}

}  // namespace onramp
