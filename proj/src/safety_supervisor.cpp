#include "onramp/safety_supervisor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "onramp/geometry.hpp"

namespace onramp {

PriorityScore priority_score(const VehicleState& av, std::span<const VehicleState> vehicles,
                             const RoadGeometry& road, const SupervisorConfig& cfg, double sigma) {
  PriorityScore p;
  if (av.lane == RoadGeometry::kRampLane) {
    p.merge = 0.5;
    p.distance = std::clamp(road.ramp_progress(av.x) / road.ramp_length, 0.0, 1.0);
  }
  const auto scene = scene_with_barrier(vehicles, road);
  const auto leader = headway_leader(av, scene, road);
  if (leader && av.speed > 0.0) {
    const double d = bumper_gap(av, *leader);
    const double lim = cfg.headway_score_clamp;
    p.headway = d <= 0.0 ? lim : std::clamp(-std::log(d / (cfg.headway_threshold * av.speed)), -lim, lim);
  }
  p.sigma = sigma;
  p.total = cfg.alpha_merge * p.merge + cfg.alpha_distance * p.distance +
            cfg.alpha_headway * p.headway + p.sigma;
  return p;
}

PriorityScore priority_score(const VehicleState& av, std::span<const VehicleState> vehicles,
                             const RoadGeometry& road, const SupervisorConfig& cfg,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, cfg.sigma_std);
  return priority_score(av, vehicles, road, cfg, noise(rng));
}

namespace {

PredictedPose pose_of(const VehicleState& v) { return {v.x, v.y, v.heading, v.speed, v.lane}; }

VehicleState as_vehicle(const PredictedTrajectory& t, std::size_t k) {
  VehicleState v;
  const auto& p = t.poses[k];
  v.id = t.id;
  v.x = p.x;
  v.y = p.y;
  v.heading = p.heading;
  v.speed = p.speed;
  v.lane = p.lane;
  v.length = t.length;
  v.width = t.width;
  return v;
}

}  // namespace

std::vector<PredictedTrajectory> predict_trajectories(std::span<const VehicleState> snapshot,
                                                      std::span<const Action> av_actions,
                                                      int horizon, const TrafficModel& model,
                                                      PredictionCounter* counter) {
  std::vector<VehicleState> world(snapshot.begin(), snapshot.end());
  for (std::size_t i = 0; i < world.size(); ++i) {
    if (!world[i].is_av()) continue;
    const auto id = static_cast<std::size_t>(world[i].id);
    if (id >= av_actions.size()) throw std::invalid_argument("missing assumed action for an AV");
    apply_meta_action(world[i], av_actions[id], model);
  }

  std::vector<PredictedTrajectory> out(world.size() + 1);
  for (std::size_t i = 0; i < world.size(); ++i) {
    out[i].id = world[i].id;
    out[i].kind = world[i].kind;
    out[i].length = world[i].length;
    out[i].width = world[i].width;
    out[i].poses.reserve(static_cast<std::size_t>(horizon));
  }
  const auto barrier = model.road.ramp_barrier();
  auto& fixed = out.back();
  fixed.id = barrier.id;
  fixed.is_static = true;
  fixed.length = barrier.length;
  fixed.width = barrier.width;
  fixed.poses.assign(static_cast<std::size_t>(horizon), pose_of(barrier));

  for (int k = 0; k < horizon; ++k) {
    decide_hdv_lane_changes(world, model);
    for (int s = 0; s < model.kinematics.substeps_per_action; ++s) physics_substep(world, model);
    for (std::size_t i = 0; i < world.size(); ++i) out[i].poses.push_back(pose_of(world[i]));
    if (counter != nullptr) ++counter->world_steps;
  }
  return out;
}

bool conflict(const PredictedTrajectory& a, const PredictedTrajectory& b, double buffer) {
  const std::size_t n = std::min(a.poses.size(), b.poses.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (boxes_intersect(footprint(as_vehicle(a, k), buffer), footprint(as_vehicle(b, k), buffer))) {
      return true;
    }
  }
  return false;
}

double safety_margin(Action action, const PredictedTrajectory& ego,
                     std::span<const PredictedTrajectory> others, int current_lane,
                     int target_lane) {
  double margin = kNoMarginSentinel;
  for (std::size_t k = 0; k < ego.poses.size(); ++k) {
    const auto& e = ego.poses[k];
    const double e_front = e.x + 0.5 * ego.length;
    const double e_rear = e.x - 0.5 * ego.length;
    const auto consider = [&](int lane, bool followers) {
      for (const auto& o : others) {
        if (o.id == ego.id || k >= o.poses.size()) continue;
        const auto& p = o.poses[k];
        if (p.lane != lane) continue;
        if (p.x >= e.x) {
          margin = std::min(margin, (p.x - 0.5 * o.length) - e_front);
        } else if (followers) {
          margin = std::min(margin, e_rear - (p.x + 0.5 * o.length));
        }
      }
    };
    if (is_lane_change(action)) {
      consider(current_lane, true);
      if (target_lane != current_lane) consider(target_lane, true);
    } else {
      // Only the closest leader matters for the headway.
      double headway = kNoMarginSentinel;
      for (const auto& o : others) {
        if (o.id == ego.id || k >= o.poses.size()) continue;
        const auto& p = o.poses[k];
        if (p.lane != e.lane || p.x < e.x) continue;
        headway = std::min(headway, (p.x - 0.5 * o.length) - e_front);
      }
      margin = std::min(margin, headway);
    }
  }
  return margin;
}

namespace {

// Least disruptive first.
constexpr std::array<Action, kNumActions> kReplacementPreference = {
    Action::Idle, Action::Slower, Action::Faster, Action::LaneRight, Action::LaneLeft};

struct Candidate {
  bool conflict = false;
  double margin = 0.0;
  std::vector<PredictedTrajectory> trajectories;
};

}  // namespace

SupervisionResult supervise(std::span<const VehicleState> snapshot,
                            std::span<const Action> proposed, std::span<const ActionMask> masks,
                            std::span<const Action> last_actions, const SupervisorConfig& cfg,
                            const TrafficModel& model, std::mt19937_64& rng) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_av = proposed.size();
  if (masks.size() != n_av || (!last_actions.empty() && last_actions.size() != n_av)) {
    throw std::invalid_argument("supervise: per-agent inputs must have equal length");
  }
  for (std::size_t i = 0; i < n_av; ++i) {
    if (i >= snapshot.size() || !snapshot[i].is_av() || snapshot[i].id != static_cast<int>(i)) {
      throw std::invalid_argument("supervise: AVs must come first with ids 0..n_av-1");
    }
    if (!masks[i][static_cast<std::size_t>(to_index(proposed[i]))]) {
      throw std::invalid_argument("supervise: proposed action is masked");
    }
  }

  SupervisionResult result;
  result.actions.assign(proposed.begin(), proposed.end());
  result.replaced.assign(n_av, false);
  result.unsafe.assign(n_av, false);
  result.scores.resize(n_av);
  for (std::size_t i = 0; i < n_av; ++i) {
    result.scores[i] = priority_score(snapshot[i], snapshot, model.road, cfg, rng);
  }
  result.order.resize(n_av);
  std::iota(result.order.begin(), result.order.end(), 0);
  std::sort(result.order.begin(), result.order.end(), [&](int a, int b) {
    const auto& sa = result.scores[static_cast<std::size_t>(a)];
    const auto& sb = result.scores[static_cast<std::size_t>(b)];
    if (sa.total != sb.total) return sa.total > sb.total;
    if (sa.sigma != sb.sigma) return sa.sigma > sb.sigma;
    return a < b;
  });

  std::vector<Action> assumed(n_av, Action::Idle);
  if (!last_actions.empty()) assumed.assign(last_actions.begin(), last_actions.end());
  std::vector<bool> processed(n_av, false);
  PredictionCounter counter;

  for (int head : result.order) {
    const auto h = static_cast<std::size_t>(head);
    const auto evaluate = [&](Action candidate) {
      Candidate c;
      auto joint = assumed;
      joint[h] = candidate;
      c.trajectories = predict_trajectories(snapshot, joint, cfg.horizon, model, &counter);
      const auto& ego = c.trajectories[h];
      for (std::size_t j = 0; j < c.trajectories.size() && !c.conflict; ++j) {
        if (j != h && conflict(ego, c.trajectories[j], cfg.conflict_buffer)) c.conflict = true;
      }
      // Committed AVs must stay clear of everything that reacts to the head's choice.
      for (std::size_t i = 0; i < n_av && !c.conflict; ++i) {
        if (!processed[i]) continue;
        for (std::size_t j = n_av; j < c.trajectories.size(); ++j) {
          if (conflict(c.trajectories[i], c.trajectories[j], cfg.conflict_buffer)) {
            c.conflict = true;
            break;
          }
        }
      }
      const auto& state = snapshot[h];
      const auto targets = meta_action_to_targets(state, candidate, model.road,
                                                  model.kinematics.speed_increment);
      c.margin = safety_margin(candidate, ego, c.trajectories, state.lane, targets.target_lane);
      return c;
    };

    const Action wanted = proposed[h];
    const auto first = evaluate(wanted);
    Action chosen = wanted;
    if (first.conflict) {
      // Margin argmax; strict comparison keeps the preference order on ties.
      std::optional<Action> best_safe;
      std::optional<Action> best_any;
      double best_safe_margin = -std::numeric_limits<double>::infinity();
      double best_any_margin = -std::numeric_limits<double>::infinity();
      for (Action a : kReplacementPreference) {
        if (!masks[h][static_cast<std::size_t>(to_index(a))]) continue;
        const auto c = a == wanted ? first : evaluate(a);
        if (!c.conflict && c.margin > best_safe_margin) {
          best_safe = a;
          best_safe_margin = c.margin;
        }
        if (!best_any || c.margin > best_any_margin) {
          best_any = a;
          best_any_margin = c.margin;
        }
      }
      if (best_safe) {
        chosen = *best_safe;
      } else {
        chosen = *best_any;
        result.unsafe[h] = true;
        result.no_safe_action = true;
      }
    }
    result.actions[h] = chosen;
    result.replaced[h] = chosen != wanted;
    assumed[h] = chosen;
    processed[h] = true;
  }

  result.prediction_steps = counter.world_steps;
  result.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace onramp
