#pragma once

#include <cmath>

#include "onramp/vehicle.hpp"

namespace onramp {

/// Straight two-lane merge geometry. Lane 0 is the through lane, lane 1 the
/// ramp / acceleration lane (offset by +lane_width). The ramp lane is drawn
/// in the same frame as the through lane; it only becomes adjacent to the
/// through lane on [merge_entrance_x, merge_entrance_x + ramp_length).
struct RoadGeometry {
  static constexpr int kThroughLane = 0;
  static constexpr int kRampLane = 1;
  static constexpr int kNumLanes = 2;

  double road_length = 520.0;
  double merge_entrance_x = 320.0;
  double ramp_length = 100.0;
  double lane_width = 4.0;
  /// Extent of the static barrier closing the ramp lane past its end.
  double barrier_length = 200.0;
  double barrier_width = 3.0;

  double ramp_end_x() const { return merge_entrance_x + ramp_length; }

  double lane_center_y(int lane) const { return lane * lane_width; }

  bool valid_lane(int lane) const { return lane >= 0 && lane < kNumLanes; }

  /// Whether a vehicle at x may head for `to` when its current lane is `from`.
  bool lane_change_allowed(int from, int to, double x) const {
    if (!valid_lane(from) || !valid_lane(to) || (to - from != 1 && from - to != 1)) return false;
    if (x < merge_entrance_x) return false;
    if (to == kRampLane) return x < ramp_end_x();
    return true;
  }

  /// Lane whose center is nearest to lateral position y.
  int nearest_lane(double y) const {
    const auto lane = static_cast<int>(std::lround(y / lane_width));
    if (lane < 0) return 0;
    if (lane >= kNumLanes) return kNumLanes - 1;
    return lane;
  }

  bool on_merge_section(const VehicleState& v) const {
    return v.lane == kRampLane && v.x >= merge_entrance_x && v.x <= ramp_end_x();
  }

  /// Distance travelled along the merge section (may be negative before it).
  double ramp_progress(double x) const { return x - merge_entrance_x; }

  /// Static obstacle that closes the ramp lane at its end.
  VehicleState ramp_barrier() const {
    VehicleState b;
    b.id = -1;
    b.kind = VehicleKind::HDV;
    b.x = ramp_end_x() + 0.5 * barrier_length;
    b.y = lane_center_y(kRampLane);
    b.lane = kRampLane;
    b.target_lane = kRampLane;
    b.length = barrier_length;
    b.width = barrier_width;
    b.on_ramp = true;
    return b;
  }
};

}  // namespace onramp
