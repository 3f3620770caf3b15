#include "onramp/merge_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

#include "onramp/geometry.hpp"

namespace onramp {

std::string_view to_string(TrafficMode m) {
  switch (m) {
    case TrafficMode::Easy: return "easy";
    case TrafficMode::Medium: return "medium";
    case TrafficMode::Hard: return "hard";
  }
  return "?";
}

std::string_view to_string(RewardMode m) {
  return m == RewardMode::Local ? "local" : "global";
}

std::pair<CountRange, CountRange> vehicle_counts(TrafficMode mode) {
  switch (mode) {
    case TrafficMode::Easy: return {{1, 3}, {1, 3}};
    case TrafficMode::Medium: return {{2, 4}, {2, 4}};
    case TrafficMode::Hard: return {{4, 6}, {3, 5}};
  }
  return {{1, 3}, {1, 3}};
}

double speed_reward(double speed) {
  return std::clamp((speed - kMinSpeed) / (kMaxSpeed - kMinSpeed), 0.0, 1.0);
}

double headway_reward(std::optional<double> headway, double speed, double t_h, double clamp) {
  if (!headway || speed <= 0.0) return 0.0;
  if (*headway <= 0.0) return -clamp;
  return std::clamp(std::log(*headway / (t_h * speed)), -clamp, clamp);
}

double merge_cost(double ramp_progress, double ramp_length) {
  const double d = ramp_progress - ramp_length;
  return -std::exp(-d * d / (10.0 * ramp_length));
}

std::optional<VehicleState> headway_leader(const VehicleState& ego,
                                           std::span<const VehicleState> scene,
                                           const RoadGeometry& road) {
  int lane = ego.lane;
  if (ego.target_lane != ego.lane) {
    const double offset = ego.y - road.lane_center_y(ego.lane);
    const double toward = ego.target_lane > ego.lane ? offset : -offset;
    if (toward > 0.25 * road.lane_width) lane = ego.target_lane;
  }
  return find_leader(ego, scene, lane);
}

RewardComponents compute_reward(const VehicleState& ego, std::span<const VehicleState> vehicles,
                                bool crashed, const EnvConfig& config) {
  const auto& road = config.model.road;
  RewardComponents r;
  r.collision = crashed ? -1.0 : 0.0;
  r.speed = speed_reward(ego.speed);

  const auto scene = scene_with_barrier(vehicles, road);
  const auto leader = headway_leader(ego, scene, road);
  std::optional<double> headway;
  if (leader) headway = bumper_gap(ego, *leader);
  r.headway = headway_reward(headway, ego.speed, config.headway_threshold, config.headway_clamp);

  if (road.on_merge_section(ego)) r.merge = merge_cost(road.ramp_progress(ego.x), road.ramp_length);

  const auto& w = config.weights;
  r.total = w.collision * r.collision + w.speed * r.speed + w.headway * r.headway + w.merge * r.merge;
  return r;
}

std::vector<double> local_reward(std::span<const double> rewards,
                                 std::span<const std::vector<int>> neighborhoods, RewardMode mode) {
  std::vector<double> out(rewards.size(), 0.0);
  if (rewards.empty()) return out;
  if (mode == RewardMode::GlobalAverage) {
    const double mean =
        std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
    std::fill(out.begin(), out.end(), mean);
    return out;
  }
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    double sum = rewards[i];
    for (int j : neighborhoods[i]) sum += rewards[static_cast<std::size_t>(j)];
    out[i] = sum / static_cast<double>(neighborhoods[i].size() + 1);
  }
  return out;
}

bool perceivable(const VehicleState& ego, const VehicleState& other, const EnvConfig& config) {
  return other.id != ego.id && other.x <= config.model.road.road_length &&
         std::abs(other.x - ego.x) <= config.perception_distance;
}

Observation build_observation(const VehicleState& ego, std::span<const VehicleState> vehicles,
                              const EnvConfig& config) {
  const auto norm = [](double value, double scale) { return std::clamp(value / scale, -1.0, 1.0); };
  Observation obs;
  const double ego_vx = ego.speed * std::cos(ego.heading);
  const double ego_vy = ego.speed * std::sin(ego.heading);
  obs.at(0, 0) = 1.0;
  obs.at(0, 1) = norm(ego.x, config.model.road.road_length);
  obs.at(0, 2) = norm(ego.y, Observation::kPositionScaleY);
  obs.at(0, 3) = norm(ego_vx, Observation::kSpeedScale);
  obs.at(0, 4) = norm(ego_vy, Observation::kSpeedScale);

  std::vector<const VehicleState*> candidates;
  for (const auto& v : vehicles) {
    if (perceivable(ego, v, config)) candidates.push_back(&v);
  }
  std::sort(candidates.begin(), candidates.end(), [&](const VehicleState* a, const VehicleState* b) {
    const double da = std::abs(a->x - ego.x);
    const double db = std::abs(b->x - ego.x);
    return da < db || (da == db && a->id < b->id);
  });

  const int n = std::min<int>(static_cast<int>(candidates.size()),
                              std::min(config.num_neighbors, Observation::kRows - 1));
  for (int k = 0; k < n; ++k) {
    const auto& v = *candidates[static_cast<std::size_t>(k)];
    const int row = k + 1;
    obs.at(row, 0) = 1.0;
    obs.at(row, 1) = norm(v.x - ego.x, Observation::kPositionScaleX);
    obs.at(row, 2) = norm(v.y - ego.y, Observation::kPositionScaleY);
    obs.at(row, 3) = norm(v.speed * std::cos(v.heading) - ego_vx, Observation::kSpeedScale);
    obs.at(row, 4) = norm(v.speed * std::sin(v.heading) - ego_vy, Observation::kSpeedScale);
  }
  return obs;
}

ActionMask build_action_mask(const VehicleState& ego, const RoadGeometry& road) {
  ActionMask m{};
  m[to_index(Action::Idle)] = true;
  m[to_index(Action::LaneLeft)] = road.lane_change_allowed(ego.target_lane, ego.target_lane - 1, ego.x);
  m[to_index(Action::LaneRight)] = road.lane_change_allowed(ego.target_lane, ego.target_lane + 1, ego.x);
  m[to_index(Action::Faster)] = ego.target_speed < kMaxSpeed;
  m[to_index(Action::Slower)] = ego.target_speed > kMinSpeed;
  return m;
}

MergeEnv::MergeEnv(EnvConfig config) : config_(std::move(config)), rng_(config_.seed) {}

bool MergeEnv::try_spawn(int n_av, int n_hdv) {
  const auto& road = config_.model.road;
  const int points = config_.num_spawn_points;
  std::vector<int> order(static_cast<std::size_t>(points));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  std::uniform_real_distribution<double> noise(-config_.spawn_noise, config_.spawn_noise);
  std::uniform_real_distribution<double> speed(config_.init_speed_min, config_.init_speed_max);
  std::uniform_real_distribution<double> desired(config_.hdv_v0_min, config_.hdv_v0_max);

  std::vector<VehicleState> spawned;
  const double spacing = points > 1 ? config_.spawn_span / (points - 1) : 0.0;
  for (int k = 0; k < n_av + n_hdv; ++k) {
    const int point = order[static_cast<std::size_t>(k)];
    VehicleState v;
    v.id = k;
    v.kind = k < n_av ? VehicleKind::AV : VehicleKind::HDV;
    v.lane = point % 2 == 0 ? RoadGeometry::kThroughLane : RoadGeometry::kRampLane;
    v.target_lane = v.lane;
    v.on_ramp = v.lane == RoadGeometry::kRampLane;
    v.x = point * spacing + noise(rng_);
    v.y = road.lane_center_y(v.lane);
    v.speed = speed(rng_);
    v.target_speed = v.is_av() ? v.speed : desired(rng_);
    spawned.push_back(v);
  }
  for (std::size_t i = 0; i < spawned.size(); ++i) {
    for (std::size_t j = i + 1; j < spawned.size(); ++j) {
      if (spawned[i].lane == spawned[j].lane &&
          std::abs(spawned[i].x - spawned[j].x) <= kVehicleLength) {
        return false;
      }
    }
  }
  vehicles_ = std::move(spawned);
  num_agents_ = n_av;
  return true;
}

std::vector<AgentStep> MergeEnv::reset() {
  const auto [av_range, hdv_range] = vehicle_counts(config_.mode);
  for (;;) {
    std::uniform_int_distribution<int> av_count(av_range.min, av_range.max);
    std::uniform_int_distribution<int> hdv_count(hdv_range.min, hdv_range.max);
    const int n_av = av_count(rng_);
    const int n_hdv = hdv_count(rng_);
    if (n_av + n_hdv > config_.num_spawn_points) continue;
    for (int attempt = 0; attempt < 100; ++attempt) {
      if (try_spawn(n_av, n_hdv)) {
        t_ = 0;
        done_ = false;
        return initial_steps();
      }
    }
    spdlog::warn("spawn of {} AVs + {} HDVs infeasible after 100 attempts, redrawing counts", n_av,
                 n_hdv);
  }
}

std::vector<AgentStep> MergeEnv::reset_to(std::vector<VehicleState> vehicles) {
  int n_av = 0;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (vehicles[i].is_av()) {
      if (vehicles[i].id != n_av || static_cast<int>(i) != n_av) {
        throw std::invalid_argument("AVs must come first with ids 0..n_av-1");
      }
      ++n_av;
    }
  }
  vehicles_ = std::move(vehicles);
  num_agents_ = n_av;
  t_ = 0;
  done_ = false;
  return initial_steps();
}

std::vector<AgentStep> MergeEnv::initial_steps() const {
  std::vector<AgentStep> out(static_cast<std::size_t>(num_agents_));
  for (int i = 0; i < num_agents_; ++i) {
    auto& s = out[static_cast<std::size_t>(i)];
    s.agent = i;
    s.observation = observe(i);
    s.mask = action_mask(i);
  }
  return out;
}

Observation MergeEnv::observe(int agent) const {
  return build_observation(agent_state(agent), vehicles_, config_);
}

ActionMask MergeEnv::action_mask(int agent) const {
  return build_action_mask(agent_state(agent), config_.model.road);
}

std::vector<int> MergeEnv::neighborhood(int agent) const {
  std::vector<int> out;
  const auto& ego = agent_state(agent);
  for (int j = 0; j < num_agents_; ++j) {
    if (j != agent && perceivable(ego, agent_state(j), config_)) out.push_back(j);
  }
  return out;
}

StepResult MergeEnv::step(std::span<const Action> actions) {
  if (done_) throw std::logic_error("step() called on a finished episode");
  if (static_cast<int>(actions.size()) != num_agents_) {
    throw std::invalid_argument("one action per agent required");
  }
  for (int i = 0; i < num_agents_; ++i) {
    const auto a = actions[static_cast<std::size_t>(i)];
    if (!action_mask(i)[static_cast<std::size_t>(to_index(a))]) {
      throw std::invalid_argument("action " + std::string(action_name(a)) + " is masked for agent " +
                                  std::to_string(i));
    }
  }

  const auto& model = config_.model;
  for (int i = 0; i < num_agents_; ++i) {
    apply_meta_action(vehicles_[static_cast<std::size_t>(i)], actions[static_cast<std::size_t>(i)],
                      model);
  }
  decide_hdv_lane_changes(vehicles_, model);

  std::vector<bool> crashed(vehicles_.size(), false);
  const auto barrier = model.road.ramp_barrier();
  const ActuationNoise noise{&rng_, config_.hdv_noise};
  for (int s = 0; s < model.kinematics.substeps_per_action; ++s) {
    physics_substep(vehicles_, model, noise);
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      if (collision_check(vehicles_[i], barrier)) crashed[i] = true;
      for (std::size_t j = i + 1; j < vehicles_.size(); ++j) {
        if (collision_check(vehicles_[i], vehicles_[j])) crashed[i] = crashed[j] = true;
      }
    }
  }
  ++t_;

  StepResult result;
  const auto n = static_cast<std::size_t>(num_agents_);
  result.agents.resize(n);
  std::vector<double> rewards(n);
  std::vector<std::vector<int>> neighborhoods(n);
  double speed_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = result.agents[i];
    s.agent = static_cast<int>(i);
    s.components = compute_reward(vehicles_[i], vehicles_, crashed[i], config_);
    s.reward = s.components.total;
    rewards[i] = s.reward;
    neighborhoods[i] = neighborhood(static_cast<int>(i));
    speed_sum += vehicles_[i].speed;
    if (crashed[i]) result.info.collision = true;
  }
  const auto shared = local_reward(rewards, neighborhoods, config_.reward_mode);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = result.agents[i];
    s.local_reward = shared[i];
    s.observation = observe(static_cast<int>(i));
    s.mask = action_mask(static_cast<int>(i));
  }
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (crashed[i]) result.info.crashed_ids.push_back(vehicles_[i].id);
  }
  result.info.avg_speed = n > 0 ? speed_sum / static_cast<double>(n) : 0.0;
  done_ = result.info.collision || t_ >= config_.episode_horizon;
  result.done = done_;
  return result;
}

}  // namespace onramp
