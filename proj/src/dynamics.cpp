#include "onramp/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace onramp {

std::string_view action_name(Action a) {
  switch (a) {
    case Action::LaneLeft: return "lane_left";
    case Action::Idle: return "idle";
    case Action::LaneRight: return "lane_right";
    case Action::Faster: return "faster";
    case Action::Slower: return "slower";
  }
  return "?";
}

VehicleState bicycle_step(const VehicleState& state, const ControlInput& u, double dt,
                          double half_wheelbase) {
  VehicleState next = state;
  const double beta = std::atan(0.5 * std::tan(u.steering));
  const double v = state.speed;
  next.x += v * std::cos(state.heading + beta) * dt;
  next.y += v * std::sin(state.heading + beta) * dt;
  next.heading += v * std::sin(beta) / half_wheelbase * dt;
  next.speed = std::max(0.0, v + u.acceleration * dt);
  return next;
}

Targets meta_action_to_targets(const VehicleState& state, Action action, const RoadGeometry& road,
                               double speed_increment) {
  Targets t{state.target_speed, state.target_lane};
  switch (action) {
    case Action::Idle:
      break;
    case Action::Faster:
      t.target_speed = std::min(kMaxSpeed, state.target_speed + speed_increment);
      break;
    case Action::Slower:
      t.target_speed = std::max(kMinSpeed, state.target_speed - speed_increment);
      break;
    case Action::LaneLeft:
    case Action::LaneRight: {
      const int to = state.target_lane + (action == Action::LaneLeft ? -1 : 1);
      if (road.lane_change_allowed(state.target_lane, to, state.x)) t.target_lane = to;
      break;
    }
  }
  return t;
}

ControlInput clamp_control(ControlInput u) {
  u.acceleration = std::clamp(u.acceleration, -kMaxAcceleration, kMaxAcceleration);
  u.steering = std::clamp(u.steering, -kMaxSteering, kMaxSteering);
  return u;
}

double lane_keeping_steering(const VehicleState& state, const RoadGeometry& road,
                             const ControllerGains& gains, double half_wheelbase) {
  if (state.speed < 0.1) return 0.0;
  constexpr double lane_heading = 0.0;  // straight road
  const double lateral_speed =
      gains.k_lateral * (road.lane_center_y(state.target_lane) - state.y);
  const double heading_ref =
      lane_heading + std::asin(std::clamp(lateral_speed / state.speed, -1.0, 1.0));
  const double steering =
      gains.k_heading * (heading_ref - state.heading) * half_wheelbase * 2.0 / state.speed;
  return std::clamp(steering, -kMaxSteering, kMaxSteering);
}

ControlInput low_level_control(const VehicleState& state, const RoadGeometry& road,
                               const ControllerGains& gains, double half_wheelbase) {
  ControlInput u;
  u.acceleration = gains.k_speed * (state.target_speed - state.speed);
  u.steering = lane_keeping_steering(state, road, gains, half_wheelbase);
  return clamp_control(u);
}

}  // namespace onramp
