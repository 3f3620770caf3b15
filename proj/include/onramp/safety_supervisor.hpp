#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "onramp/merge_env.hpp"
#include "onramp/traffic.hpp"

namespace onramp {

struct SupervisorConfig {
  int horizon = 8;  // T_n, in policy steps
  double alpha_merge = 1.0;
  double alpha_distance = 1.0;
  double alpha_headway = 1.0;
  double sigma_std = 0.001;
  double conflict_buffer = 0.5;  // [m] inflation on every side of each footprint
  double headway_threshold = 1.2;
  double headway_score_clamp = 10.0;
};

struct PriorityScore {
  double merge = 0.0;     // p_m
  double distance = 0.0;  // p_d
  double headway = 0.0;   // p_h
  double sigma = 0.0;
  double total = 0.0;
};

/// Priority score with an explicit tie-breaking draw.
PriorityScore priority_score(const VehicleState& av, std::span<const VehicleState> vehicles,
                             const RoadGeometry& road, const SupervisorConfig& cfg, double sigma);

/// Priority score with sigma ~ Normal(0, sigma_std^2) drawn from `rng`.
PriorityScore priority_score(const VehicleState& av, std::span<const VehicleState> vehicles,
                             const RoadGeometry& road, const SupervisorConfig& cfg,
                             std::mt19937_64& rng);

struct PredictedPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  int lane = 0;
};

struct PredictedTrajectory {
  int id = 0;
  VehicleKind kind = VehicleKind::HDV;
  bool is_static = false;
  double length = kVehicleLength;
  double width = kVehicleWidth;
  std::vector<PredictedPose> poses;  // poses at policy steps 1..T_n
};

/// Counts predicted world steps (one step = every vehicle advanced one policy period).
struct PredictionCounter {
  std::int64_t world_steps = 0;
};

/// Rolls the whole scene forward `horizon` policy steps. AVs (ids 0..n_av-1,
/// stored first) apply `av_actions[id]` at the first step and hold their
/// targets afterwards; HDVs follow noise-free IDM/MOBIL. The ramp-end barrier
/// is appended as a static trajectory with id -1.
std::vector<PredictedTrajectory> predict_trajectories(std::span<const VehicleState> snapshot,
                                                      std::span<const Action> av_actions,
                                                      int horizon, const TrafficModel& model,
                                                      PredictionCounter* counter = nullptr);

/// True if the inflated footprints overlap at any predicted step.
bool conflict(const PredictedTrajectory& a, const PredictedTrajectory& b, double buffer);

inline constexpr double kNoMarginSentinel = 1e9;

/// Minimum over the horizon of the action-dependent safety margin [m].
/// Lane changes: bumper distance to the nearest preceding and following
/// vehicles on the current and target lanes. Other actions: distance headway
/// to the leader in the ego's predicted lane.
double safety_margin(Action action, const PredictedTrajectory& ego,
                     std::span<const PredictedTrajectory> others, int current_lane,
                     int target_lane);

struct SupervisionResult {
  std::vector<Action> actions;
  std::vector<bool> replaced;
  std::vector<int> order;  // agents in processing order
  std::vector<PriorityScore> scores;
  bool no_safe_action = false;
  std::vector<bool> unsafe;  // per agent: no conflict-free action existed
  std::int64_t prediction_steps = 0;
  double latency_ms = 0.0;

  int num_replaced() const {
    int n = 0;
    for (bool r : replaced) n += r ? 1 : 0;
    return n;
  }
};

/// Priority-ordered action shield. `snapshot` holds AVs first (ids 0..n_av-1)
/// followed by HDVs; `proposed`, `masks` and `last_actions` are per AV. An
/// empty `last_actions` means every AV is assumed Idle.
SupervisionResult supervise(std::span<const VehicleState> snapshot,
                            std::span<const Action> proposed, std::span<const ActionMask> masks,
                            std::span<const Action> last_actions, const SupervisorConfig& cfg,
                            const TrafficModel& model, std::mt19937_64& rng);

}  // namespace onramp
