#include "onramp/traffic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace onramp {

std::vector<VehicleState> scene_with_barrier(std::span<const VehicleState> vehicles,
                                             const RoadGeometry& road) {
  std::vector<VehicleState> scene(vehicles.begin(), vehicles.end());
  scene.push_back(road.ramp_barrier());
  return scene;
}

std::optional<VehicleState> following_leader(const VehicleState& v,
                                             std::span<const VehicleState> scene) {
  auto leader = find_leader(v, scene, v.lane);
  if (v.target_lane != v.lane) {
    auto other = find_leader(v, scene, v.target_lane);
    if (other && (!leader || bumper_gap(v, *other) < bumper_gap(v, *leader))) leader = other;
  }
  return leader;
}

void apply_meta_action(VehicleState& av, Action action, const TrafficModel& model) {
  const auto t = meta_action_to_targets(av, action, model.road, model.kinematics.speed_increment);
  av.target_speed = t.target_speed;
  av.target_lane = t.target_lane;
}

void decide_hdv_lane_changes(std::vector<VehicleState>& vehicles, const TrafficModel& model) {
  const auto scene = scene_with_barrier(vehicles, model.road);
  std::vector<std::optional<int>> decisions(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& v = vehicles[i];
    if (v.is_av() || v.target_lane != v.lane) continue;
    std::array<int, 2> candidates{};
    std::size_t n = 0;
    for (int to : {v.lane - 1, v.lane + 1}) {
      if (model.road.lane_change_allowed(v.lane, to, v.x)) candidates[n++] = to;
    }
    if (n == 0) continue;
    decisions[i] = mobil_decision(v, scene, std::span<const int>(candidates.data(), n), model.mobil,
                                  model.idm);
  }
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (decisions[i]) vehicles[i].target_lane = *decisions[i];
  }
}

ControlInput vehicle_control(std::span<const VehicleState> vehicles, std::size_t index,
                             std::span<const VehicleState> scene, const TrafficModel& model) {
  const auto& v = vehicles[index];
  const double hw = model.kinematics.half_wheelbase;
  if (v.is_av()) return low_level_control(v, model.road, model.gains, hw);
  ControlInput u;
  u.acceleration = idm_acceleration_own_v0(v, following_leader(v, scene), model.idm);
  u.steering = lane_keeping_steering(v, model.road, model.gains, hw);
  return clamp_control(u);
}

void physics_substep(std::vector<VehicleState>& vehicles, const TrafficModel& model,
                     ActuationNoise noise) {
  const auto scene = scene_with_barrier(vehicles, model.road);
  std::vector<ControlInput> controls(vehicles.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    controls[i] = vehicle_control(vehicles, i, scene, model);
  }
  if (noise.active()) {
    std::uniform_real_distribution<double> dist(-noise.amplitude, noise.amplitude);
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      if (vehicles[i].is_av()) continue;
      controls[i].acceleration *= 1.0 + dist(*noise.rng);
      controls[i].steering *= 1.0 + dist(*noise.rng);
      controls[i] = clamp_control(controls[i]);
    }
  }
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    auto& v = vehicles[i];
    v = bicycle_step(v, controls[i], model.kinematics.physics_dt, model.kinematics.half_wheelbase);
    v.lane = model.road.nearest_lane(v.y);
    v.on_ramp = v.lane == RoadGeometry::kRampLane;
  }
}

}  // namespace onramp
