#pragma once

#include "onramp/vehicle.hpp"

namespace onramp {

/// Oriented rectangle: center, heading, half extents.
struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double heading = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;
};

/// Footprint of a vehicle, grown by `inflation` on every side.
OrientedBox footprint(const VehicleState& v, double inflation = 0.0);

/// Separating-axis test. Touching boxes do not intersect.
bool boxes_intersect(const OrientedBox& a, const OrientedBox& b);

bool collision_check(const VehicleState& a, const VehicleState& b);

}  // namespace onramp
