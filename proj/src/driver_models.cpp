#include "onramp/driver_models.hpp"

#include <algorithm>
#include <cmath>

namespace onramp {

double idm_acceleration(const VehicleState& ego, const std::optional<VehicleState>& leader,
                        const IdmParams& p) {
  const double v = ego.speed;
  double a = p.a_max * (1.0 - std::pow(std::max(v, 0.0) / p.v0, p.delta));
  if (leader) {
    const double s = bumper_gap(ego, *leader);
    if (s <= 0.0) return -kMaxAcceleration;
    const double dv = v - leader->speed;
    const double s_star =
        p.s0 + std::max(0.0, v * p.time_gap + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
    a -= p.a_max * (s_star / s) * (s_star / s);
  }
  return std::clamp(a, -kMaxAcceleration, kMaxAcceleration);
}

double idm_acceleration_own_v0(const VehicleState& ego, const std::optional<VehicleState>& leader,
                               IdmParams p) {
  p.v0 = ego.target_speed;
  return idm_acceleration(ego, leader, p);
}

namespace {

// Strict total order along the road: position, then id.
bool ahead_of(const VehicleState& a, const VehicleState& b) {
  return a.x > b.x || (a.x == b.x && a.id > b.id);
}

}  // namespace

std::optional<VehicleState> find_leader(const VehicleState& ego, std::span<const VehicleState> others,
                                        int lane) {
  std::optional<VehicleState> best;
  for (const auto& o : others) {
    if (o.id == ego.id || o.lane != lane || !ahead_of(o, ego)) continue;
    if (!best || ahead_of(*best, o)) best = o;
  }
  return best;
}

std::optional<VehicleState> find_follower(const VehicleState& ego,
                                          std::span<const VehicleState> others, int lane) {
  std::optional<VehicleState> best;
  for (const auto& o : others) {
    if (o.id == ego.id || o.lane != lane || ahead_of(o, ego)) continue;
    if (!best || ahead_of(o, *best)) best = o;
  }
  return best;
}

MobilEvaluation mobil_evaluate(const VehicleState& ego, std::span<const VehicleState> others,
                               int candidate_lane, const MobilParams& p, const IdmParams& idm) {
  MobilEvaluation ev;
  ev.lane = candidate_lane;

  VehicleState moved = ego;
  moved.lane = candidate_lane;

  const auto new_leader = find_leader(moved, others, candidate_lane);
  const auto new_follower = find_follower(moved, others, candidate_lane);
  const auto old_leader = find_leader(ego, others, ego.lane);
  const auto old_follower = find_follower(ego, others, ego.lane);

  double follower_gain = 0.0;
  if (new_follower) {
    const double before = idm_acceleration_own_v0(*new_follower, new_leader, idm);
    ev.new_follower_accel = idm_acceleration_own_v0(*new_follower, moved, idm);
    follower_gain += ev.new_follower_accel - before;
  }
  ev.safe = ev.new_follower_accel >= -p.b_safe;

  if (old_follower) {
    const double before = idm_acceleration_own_v0(*old_follower, ego, idm);
    const double after = idm_acceleration_own_v0(*old_follower, old_leader, idm);
    follower_gain += after - before;
  }

  const double ego_before = idm_acceleration_own_v0(ego, old_leader, idm);
  const double ego_after = idm_acceleration_own_v0(moved, new_leader, idm);
  ev.incentive = (ego_after - ego_before) + p.politeness * follower_gain;
  return ev;
}

std::optional<int> mobil_decision(const VehicleState& ego, std::span<const VehicleState> others,
                                  std::span<const int> candidate_lanes, const MobilParams& p,
                                  const IdmParams& idm) {
  std::optional<int> choice;
  double best_incentive = p.gain_threshold;
  for (int lane : candidate_lanes) {
    if (lane == ego.lane) continue;
    const auto ev = mobil_evaluate(ego, others, lane, p, idm);
    if (ev.safe && ev.incentive > best_incentive) {
      best_incentive = ev.incentive;
      choice = lane;
    }
  }
  return choice;
}

}  // namespace onramp
