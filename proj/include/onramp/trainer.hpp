#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "onramp/merge_env.hpp"
#include "onramp/network.hpp"
#include "onramp/safety_supervisor.hpp"

namespace onramp {

struct TrainerConfig {
  EnvConfig env;
  SupervisorConfig supervisor;
  bool use_supervisor = true;

  double gamma = 0.99;
  AdamConfig adam;
  LossCoefficients loss;

  std::int64_t total_steps = 50'000;
  int eval_every_episodes = 200;
  int eval_episodes = 3;
  std::uint64_t seed = 0;

  std::optional<std::filesystem::path> init_from;  // curriculum warm start
  std::filesystem::path out_dir;                   // empty: nothing written
  /// When false the latency column is written as 0 so logs are byte-stable.
  bool record_latency = true;
};

struct Transition {
  Observation observation;
  ActionMask mask{};
  Action action = Action::Idle;  // executed (post-supervision) action
  RewardComponents components;
  double reward = 0.0;        // own reward
  double local_reward = 0.0;  // reward used for learning
  double value = 0.0;         // V(s_t) at collection time
  double next_value = 0.0;    // V(s_{t+1}); 0 at terminal steps
  bool done = false;
  bool replaced = false;
};

/// Per-agent on-policy transitions of one episode.
using ExperienceBuffer = std::vector<std::vector<Transition>>;

struct EpisodeMetrics {
  double episode_reward = 0.0;  // sum over steps of the mean agent reward
  double mean_speed = 0.0;      // mean AV speed over steps
  bool collision = false;
  bool no_safe_action = false;
  int steps = 0;
  int decisions = 0;
  int interventions = 0;
  int supervisor_calls = 0;
  double supervisor_latency_ms = 0.0;  // summed over calls
};

struct EpisodeOutcome {
  ExperienceBuffer buffers;
  EpisodeMetrics metrics;
};

struct PolicyDecision {
  Action action = Action::Idle;
  double value = 0.0;
};

using Policy = std::function<PolicyDecision(int agent, const Observation&, const ActionMask&,
                                            std::mt19937_64&)>;

/// Samples from the masked policy (explore) or takes its argmax.
Policy network_policy(const NetworkParams& params, bool explore);

/// Uniformly random valid action; value 0.
Policy random_valid_policy();

struct EpisodeOptions {
  std::ostream* trace = nullptr;
  int episode_index = 0;
};

/// Plays one episode on an already reset env. When `supervisor` is set every
/// joint action passes through the safety shield before execution and the
/// executed action is stored.
EpisodeOutcome run_policy_episode(MergeEnv& env, const Policy& policy,
                                  const SupervisorConfig* supervisor, std::mt19937_64& rng,
                                  const EpisodeOptions& options = {});

EpisodeOutcome run_episode(MergeEnv& env, const NetworkParams& params,
                           const SupervisorConfig* supervisor, std::mt19937_64& rng, bool explore,
                           const EpisodeOptions& options = {});

struct AdvantageEstimate {
  double advantage = 0.0;
  double value_target = 0.0;
};

/// One-step advantages A_t = r_t + gamma V(s_{t+1}) - V(s_t).
std::vector<AdvantageEstimate> compute_advantages(std::span<const Transition> transitions,
                                                  double gamma);

/// Pools every agent's transitions into one batch.
std::vector<TrainingSample> build_batch(const ExperienceBuffer& buffers, double gamma);

struct UpdateReport {
  bool applied = false;
  std::size_t samples = 0;
  LossTerms loss;
};

/// One gradient step on the pooled batch, then clears the buffers.
UpdateReport update(NetworkParams& params, OptimizerState& opt, ExperienceBuffer& buffers,
                    const TrainerConfig& config);

struct Metrics {
  int episodes = 0;
  double mean_reward = 0.0;
  double mean_speed = 0.0;
  double collision_rate = 0.0;
  double intervention_rate = 0.0;
  double supervisor_latency_ms = 0.0;  // mean per decision
  int no_safe_action_episodes = 0;
};

/// Greedy evaluation on one episode per seed.
Metrics evaluate(const NetworkParams& params, const TrainerConfig& config,
                 std::span<const std::uint64_t> seeds);

/// Fixed evaluation seeds derived from the run seed.
std::vector<std::uint64_t> evaluation_seeds(std::uint64_t run_seed, int count);

struct MetricsRow {
  std::int64_t step = 0;
  int episode = 0;
  Metrics metrics;
};

inline constexpr const char* kMetricsHeader =
    "step,episode,eval_reward,avg_speed,collision_rate,intervention_rate,supervisor_latency_ms";

std::string format_metrics_row(const MetricsRow& row, bool record_latency);

struct TrainingSummary {
  std::vector<MetricsRow> evaluations;
  NetworkParams params;
  int episodes = 0;
  std::int64_t steps = 0;
  int skipped_updates = 0;
};

/// Full training loop. Writes metrics.csv, latest.ckpt and best.ckpt under
/// out_dir when it is set.
TrainingSummary train(const TrainerConfig& config);

std::uint64_t config_hash(const TrainerConfig& config);

/// splitmix64 step used to derive independent seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace onramp
