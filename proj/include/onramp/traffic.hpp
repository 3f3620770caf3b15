#pragma once

#include <random>
#include <span>
#include <vector>

#include "onramp/driver_models.hpp"
#include "onramp/dynamics.hpp"
#include "onramp/road.hpp"

namespace onramp {

/// Everything needed to move traffic forward. Shared by the simulator and the
/// safety supervisor's predictor so that both follow one code path.
struct TrafficModel {
  RoadGeometry road;
  KinematicParams kinematics;
  ControllerGains gains;
  IdmParams idm;
  MobilParams mobil;
};

/// Multiplicative actuation noise for HDVs: control *= (1 + u), u ~ U(-amplitude, amplitude).
struct ActuationNoise {
  std::mt19937_64* rng = nullptr;
  double amplitude = 0.0;

  bool active() const { return rng != nullptr && amplitude > 0.0; }
};

/// The vehicles plus the ramp-end barrier, as seen by leader searches.
std::vector<VehicleState> scene_with_barrier(std::span<const VehicleState> vehicles,
                                             const RoadGeometry& road);

/// Leader used for car following: the closer of the current-lane and
/// target-lane leaders (barrier included).
std::optional<VehicleState> following_leader(const VehicleState& v,
                                             std::span<const VehicleState> scene);

/// Sets new AV targets from a meta-action.
void apply_meta_action(VehicleState& av, Action action, const TrafficModel& model);

/// MOBIL decisions for every HDV that is not already changing lanes.
/// Decisions are taken on the same snapshot and applied together.
void decide_hdv_lane_changes(std::vector<VehicleState>& vehicles, const TrafficModel& model);

/// Control for vehicle `index` given the current scene (noise-free).
ControlInput vehicle_control(std::span<const VehicleState> vehicles, std::size_t index,
                             std::span<const VehicleState> scene, const TrafficModel& model);

/// One physics step of length kinematics.physics_dt for every vehicle.
void physics_substep(std::vector<VehicleState>& vehicles, const TrafficModel& model,
                     ActuationNoise noise = {});

}  // namespace onramp
