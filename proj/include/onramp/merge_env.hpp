#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <random>
#include <span>
#include <vector>

#include "onramp/traffic.hpp"
#include "onramp/vehicle.hpp"

namespace onramp {

enum class TrafficMode : std::uint8_t { Easy, Medium, Hard };
enum class RewardMode : std::uint8_t { Local, GlobalAverage };

struct CountRange {
  int min = 0;
  int max = 0;
};

struct RewardWeights {
  double collision = 200.0;
  double speed = 1.0;
  double headway = 4.0;
  double merge = 4.0;
};

struct EnvConfig {
  TrafficMode mode = TrafficMode::Easy;
  std::uint64_t seed = 0;
  int episode_horizon = 100;
  RewardWeights weights;
  double headway_threshold = 1.2;  // t_h [s]
  RewardMode reward_mode = RewardMode::Local;

  int num_spawn_points = 12;
  double spawn_span = 220.0;
  double spawn_noise = 1.5;
  double init_speed_min = 25.0;
  double init_speed_max = 27.0;
  double hdv_v0_min = 23.0;
  double hdv_v0_max = 27.0;
  /// Relative amplitude of HDV actuation noise; 0 disables it.
  double hdv_noise = 0.05;

  double perception_distance = 150.0;
  int num_neighbors = 5;
  double headway_clamp = 5.0;

  TrafficModel model;
};

std::string_view to_string(TrafficMode m);
std::string_view to_string(RewardMode m);

/// AV and HDV count ranges for a traffic mode.
std::pair<CountRange, CountRange> vehicle_counts(TrafficMode mode);

/// Ego-relative feature matrix: row 0 is the ego, rows 1.. the nearest
/// neighbors by |dx|. Columns: ispresent, x, y, vx, vy.
struct Observation {
  static constexpr int kRows = 6;
  static constexpr int kFeatures = 5;
  static constexpr int kSize = kRows * kFeatures;

  static constexpr double kPositionScaleX = 150.0;
  static constexpr double kPositionScaleY = 8.0;
  static constexpr double kSpeedScale = 30.0;

  std::array<double, kSize> data{};

  double& at(int row, int col) { return data[static_cast<std::size_t>(row * kFeatures + col)]; }
  double at(int row, int col) const { return data[static_cast<std::size_t>(row * kFeatures + col)]; }

  bool operator==(const Observation&) const = default;
};

using ActionMask = std::array<bool, kNumActions>;

inline int count_valid(const ActionMask& m) {
  int n = 0;
  for (bool b : m) n += b ? 1 : 0;
  return n;
}

struct RewardComponents {
  double collision = 0.0;  // r_c in {-1, 0}
  double speed = 0.0;      // r_s
  double headway = 0.0;    // r_h
  double merge = 0.0;      // r_m
  double total = 0.0;

  bool operator==(const RewardComponents&) const = default;
};

struct AgentStep {
  int agent = 0;
  Observation observation;
  ActionMask mask{};
  double reward = 0.0;        // own weighted reward
  double local_reward = 0.0;  // reward after neighborhood / global averaging
  RewardComponents components;

  bool operator==(const AgentStep&) const = default;
};

struct StepInfo {
  bool collision = false;
  double avg_speed = 0.0;
  std::vector<int> crashed_ids;

  bool operator==(const StepInfo&) const = default;
};

struct StepResult {
  std::vector<AgentStep> agents;
  bool done = false;
  StepInfo info;

  bool operator==(const StepResult&) const = default;
};

/// r_s clamped to [0, 1].
double speed_reward(double speed);
/// log(headway / (t_h v)) clamped to [-clamp, clamp]; 0 without leader or at v <= 0.
double headway_reward(std::optional<double> headway, double speed, double t_h, double clamp);
/// -exp(-(x - L)^2 / (10 L)) where x is the distance along the merge section.
double merge_cost(double ramp_progress, double ramp_length);

/// Leader relevant for the headway term. During a lane change (lateral offset
/// beyond a quarter lane width toward the target) the target-lane leader is used.
std::optional<VehicleState> headway_leader(const VehicleState& ego,
                                           std::span<const VehicleState> scene,
                                           const RoadGeometry& road);

RewardComponents compute_reward(const VehicleState& ego, std::span<const VehicleState> vehicles,
                                bool crashed, const EnvConfig& config);

/// Averages each agent's reward over itself and its neighbors (or over all
/// agents in GlobalAverage mode). `neighborhoods[i]` lists the other agents near agent i.
std::vector<double> local_reward(std::span<const double> rewards,
                                 std::span<const std::vector<int>> neighborhoods, RewardMode mode);

/// Whether `other` can be perceived from `ego` (longitudinal range, not past road end).
bool perceivable(const VehicleState& ego, const VehicleState& other, const EnvConfig& config);

Observation build_observation(const VehicleState& ego, std::span<const VehicleState> vehicles,
                              const EnvConfig& config);

ActionMask build_action_mask(const VehicleState& ego, const RoadGeometry& road);

class MergeEnv {
 public:
  explicit MergeEnv(EnvConfig config);

  /// Draws a new scene from the environment's RNG and returns per-agent steps
  /// holding the initial observations (rewards zero).
  std::vector<AgentStep> reset();

  /// Replaces the scene directly. AVs must have ids 0..n_av-1 in order.
  std::vector<AgentStep> reset_to(std::vector<VehicleState> vehicles);

  /// Advances one policy period. `actions[i]` is the action of agent i and
  /// must be valid under its mask; otherwise std::invalid_argument.
  StepResult step(std::span<const Action> actions);

  Observation observe(int agent) const;
  ActionMask action_mask(int agent) const;
  std::vector<int> neighborhood(int agent) const;

  const std::vector<VehicleState>& vehicles() const { return vehicles_; }
  const VehicleState& agent_state(int agent) const { return vehicles_.at(static_cast<std::size_t>(agent)); }
  int num_agents() const { return num_agents_; }
  int time_step() const { return t_; }
  bool done() const { return done_; }
  const EnvConfig& config() const { return config_; }
  EnvConfig& mutable_config() { return config_; }

 private:
  std::vector<AgentStep> initial_steps() const;
  bool try_spawn(int n_av, int n_hdv);

  EnvConfig config_;
  std::mt19937_64 rng_;
  std::vector<VehicleState> vehicles_;
  int num_agents_ = 0;
  int t_ = 0;
  bool done_ = false;
};

}  // namespace onramp
