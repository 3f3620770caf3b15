#pragma once

#include <optional>
#include <span>
#include <vector>

#include "onramp/vehicle.hpp"

namespace onramp {

struct IdmParams {
  double a_max = 3.0;
  double b_comf = 5.0;
  double s0 = 5.0;
  double time_gap = 1.5;
  double delta = 4.0;
  double v0 = 25.0;  // overridden per HDV by its target_speed
};

struct MobilParams {
  double politeness = 0.0;
  double gain_threshold = 0.2;
  double b_safe = 2.0;
};

/// Bumper-to-bumper gap from `ego` to a vehicle ahead of it.
inline double bumper_gap(const VehicleState& ego, const VehicleState& leader) {
  return leader.rear() - ego.front();
}

/// IDM acceleration clamped to [-5, 5]. Uses p.v0 as the desired speed.
double idm_acceleration(const VehicleState& ego, const std::optional<VehicleState>& leader,
                        const IdmParams& p);

/// IDM with the vehicle's own target_speed as desired speed.
double idm_acceleration_own_v0(const VehicleState& ego, const std::optional<VehicleState>& leader,
                               IdmParams p);

/// Closest vehicle strictly ahead of `ego` whose lane is `lane`. Vehicles with
/// the same id as ego are skipped.
std::optional<VehicleState> find_leader(const VehicleState& ego, std::span<const VehicleState> others,
                                        int lane);
/// Closest vehicle behind (or level with) `ego` on `lane`.
std::optional<VehicleState> find_follower(const VehicleState& ego,
                                          std::span<const VehicleState> others, int lane);

struct MobilEvaluation {
  int lane = 0;
  bool safe = false;
  double new_follower_accel = 0.0;  // after the change; 0 when no follower
  double incentive = 0.0;
};

/// Evaluates a single candidate lane with the MOBIL safety and incentive tests.
MobilEvaluation mobil_evaluate(const VehicleState& ego, std::span<const VehicleState> others,
                               int candidate_lane, const MobilParams& p, const IdmParams& idm);

/// Returns the lane to move to, or nullopt to stay. `candidate_lanes` are the
/// adjacent lanes that physically exist at ego.x; the caller decides that.
/// `others` must contain every relevant vehicle (static obstacles included).
std::optional<int> mobil_decision(const VehicleState& ego, std::span<const VehicleState> others,
                                  std::span<const int> candidate_lanes, const MobilParams& p,
                                  const IdmParams& idm);

}  // namespace onramp
