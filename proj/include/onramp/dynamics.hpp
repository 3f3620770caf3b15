#pragma once

#include "onramp/road.hpp"
#include "onramp/vehicle.hpp"

namespace onramp {

struct KinematicParams {
  double half_wheelbase = 2.5;
  double physics_dt = 0.05;
  int substeps_per_action = 4;
  double speed_increment = 5.0;  // Faster/Slower target-speed step
};

struct ControllerGains {
  double k_speed = 1.0 / 0.6;
  double k_lateral = 1.0 / 0.6;
  double k_heading = 1.0 / 0.2;
};

/// One forward-Euler step of the kinematic bicycle model. Speed is clamped at 0.
VehicleState bicycle_step(const VehicleState& state, const ControlInput& u, double dt,
                          double half_wheelbase = KinematicParams{}.half_wheelbase);

struct Targets {
  double target_speed;
  int target_lane;
};

/// Maps a meta-action onto new tracking targets. Actions that would leave the
/// speed band or the road leave the targets untouched.
Targets meta_action_to_targets(const VehicleState& state, Action action, const RoadGeometry& road,
                               double speed_increment = KinematicParams{}.speed_increment);

/// Lateral part of the low-level controller: steering that tracks the
/// target-lane center line.
double lane_keeping_steering(const VehicleState& state, const RoadGeometry& road,
                             const ControllerGains& gains = {},
                             double half_wheelbase = KinematicParams{}.half_wheelbase);

/// Proportional speed tracking plus the lateral cascade. Both outputs are
/// clamped to the actuator bounds.
ControlInput low_level_control(const VehicleState& state, const RoadGeometry& road,
                               const ControllerGains& gains = {},
                               double half_wheelbase = KinematicParams{}.half_wheelbase);

ControlInput clamp_control(ControlInput u);

}  // namespace onramp
