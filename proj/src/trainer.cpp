#include "onramp/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "onramp/checkpoint.hpp"
#include "onramp/config.hpp"
#include "onramp/trace.hpp"

namespace onramp {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t config_hash(const TrainerConfig& config) {
  auto j = to_json(config);
  j.erase("out_dir");
  j.erase("init_from");
  return fnv1a64(j.dump());
}

Policy network_policy(const NetworkParams& params, bool explore) {
  return [&params, explore](int, const Observation& obs, const ActionMask& mask,
                            std::mt19937_64& rng) {
    const auto out = forward(params, obs, mask);
    int chosen = -1;
    if (explore) {
      std::discrete_distribution<int> dist(out.probs.begin(), out.probs.end());
      chosen = dist(rng);
    }
    if (chosen < 0 || !mask[static_cast<std::size_t>(chosen)]) {
      double best = -1.0;
      for (int i = 0; i < kNumActions; ++i) {
        if (mask[static_cast<std::size_t>(i)] && out.probs[static_cast<std::size_t>(i)] > best) {
          best = out.probs[static_cast<std::size_t>(i)];
          chosen = i;
        }
      }
    }
    return PolicyDecision{action_from_index(chosen), out.value};
  };
}

Policy random_valid_policy() {
  return [](int, const Observation&, const ActionMask& mask, std::mt19937_64& rng) {
    std::vector<int> valid;
    for (int i = 0; i < kNumActions; ++i) {
      if (mask[static_cast<std::size_t>(i)]) valid.push_back(i);
    }
    if (valid.empty()) throw std::invalid_argument("random_valid_policy: every action is masked");
    std::uniform_int_distribution<std::size_t> pick(0, valid.size() - 1);
    return PolicyDecision{action_from_index(valid[pick(rng)]), 0.0};
  };
}

EpisodeOutcome run_policy_episode(MergeEnv& env, const Policy& policy,
                                  const SupervisorConfig* supervisor, std::mt19937_64& rng,
                                  const EpisodeOptions& options) {
  const int n = env.num_agents();
  const auto un = static_cast<std::size_t>(n);
  EpisodeOutcome outcome;
  outcome.buffers.resize(un);
  auto& m = outcome.metrics;

  std::vector<Observation> observations(un);
  std::vector<ActionMask> masks(un);
  for (int i = 0; i < n; ++i) {
    observations[static_cast<std::size_t>(i)] = env.observe(i);
    masks[static_cast<std::size_t>(i)] = env.action_mask(i);
  }
  std::vector<Action> last_actions(un, Action::Idle);
  if (options.trace) write_trace_step(*options.trace, options.episode_index, env, {}, {}, nullptr);

  double speed_sum = 0.0;
  std::vector<Action> proposed(un);
  std::vector<double> values(un);
  while (!env.done()) {
    for (std::size_t i = 0; i < un; ++i) {
      const auto d = policy(static_cast<int>(i), observations[i], masks[i], rng);
      proposed[i] = d.action;
      values[i] = d.value;
      // The previous transition bootstraps from this state's value.
      if (!outcome.buffers[i].empty()) outcome.buffers[i].back().next_value = d.value;
    }

    std::vector<Action> executed = proposed;
    auto replaced = std::make_unique<bool[]>(un);
    if (supervisor) {
      const auto sr = supervise(env.vehicles(), proposed, masks, last_actions, *supervisor,
                                env.config().model, rng);
      executed = sr.actions;
      for (std::size_t i = 0; i < un; ++i) replaced[i] = sr.replaced[i];
      m.interventions += sr.num_replaced();
      m.supervisor_calls += 1;
      m.supervisor_latency_ms += sr.latency_ms;
      m.no_safe_action = m.no_safe_action || sr.no_safe_action;
    }

    const auto result = env.step(executed);
    if (options.trace) {
      write_trace_step(*options.trace, options.episode_index, env, executed,
                       std::span<const bool>(replaced.get(), un), &result);
    }

    double reward_sum = 0.0;
    for (std::size_t i = 0; i < un; ++i) {
      const auto& s = result.agents[i];
      Transition tr;
      tr.observation = observations[i];
      tr.mask = masks[i];
      tr.action = executed[i];
      tr.components = s.components;
      tr.reward = s.reward;
      tr.local_reward = s.local_reward;
      tr.value = values[i];
      tr.next_value = 0.0;
      tr.done = result.done;
      tr.replaced = replaced[i];
      outcome.buffers[i].push_back(tr);
      reward_sum += s.reward;
      observations[i] = s.observation;
      masks[i] = s.mask;
    }
    last_actions = executed;
    m.steps += 1;
    m.decisions += n;
    m.episode_reward += n > 0 ? reward_sum / n : 0.0;
    speed_sum += result.info.avg_speed;
    m.collision = m.collision || result.info.collision;
  }
  m.mean_speed = m.steps > 0 ? speed_sum / m.steps : 0.0;
  return outcome;
}

EpisodeOutcome run_episode(MergeEnv& env, const NetworkParams& params,
                           const SupervisorConfig* supervisor, std::mt19937_64& rng, bool explore,
                           const EpisodeOptions& options) {
  return run_policy_episode(env, network_policy(params, explore), supervisor, rng, options);
}

std::vector<AdvantageEstimate> compute_advantages(std::span<const Transition> transitions,
                                                  double gamma) {
  std::vector<AdvantageEstimate> out;
  out.reserve(transitions.size());
  for (const auto& t : transitions) {
    const double bootstrap = t.done ? 0.0 : t.next_value;
    const double target = t.local_reward + gamma * bootstrap;
    out.push_back({target - t.value, target});
  }
  return out;
}

std::vector<TrainingSample> build_batch(const ExperienceBuffer& buffers, double gamma) {
  std::vector<TrainingSample> batch;
  for (const auto& agent : buffers) {
    const auto adv = compute_advantages(agent, gamma);
    for (std::size_t k = 0; k < agent.size(); ++k) {
      const auto& t = agent[k];
      batch.push_back({t.observation, t.mask, t.action, adv[k].advantage, adv[k].value_target});
    }
  }
  return batch;
}

UpdateReport update(NetworkParams& params, OptimizerState& opt, ExperienceBuffer& buffers,
                    const TrainerConfig& config) {
  UpdateReport report;
  const auto batch = build_batch(buffers, config.gamma);
  for (auto& b : buffers) b.clear();
  report.samples = batch.size();
  if (batch.empty()) return report;

  auto result = loss_and_gradients(params, batch, config.loss);
  report.loss = result.loss;
  if (result.non_finite_sample || !std::isfinite(result.loss.total) || !result.gradient.allFinite()) {
    spdlog::warn("skipping update: non-finite loss (sample {})",
                 result.non_finite_sample ? static_cast<long>(*result.non_finite_sample) : -1L);
    return report;
  }
  optimizer_step(opt, params, std::move(result.gradient), config.adam);
  report.applied = true;
  return report;
}

std::vector<std::uint64_t> evaluation_seeds(std::uint64_t run_seed, int count) {
  std::vector<std::uint64_t> seeds;
  const std::uint64_t base = derive_seed(run_seed, 0xE7A1);
  for (int i = 0; i < count; ++i) seeds.push_back(derive_seed(base, static_cast<std::uint64_t>(i)));
  return seeds;
}

Metrics evaluate(const NetworkParams& params, const TrainerConfig& config,
                 std::span<const std::uint64_t> seeds) {
  Metrics out;
  int decisions = 0;
  int interventions = 0;
  int calls = 0;
  double latency = 0.0;
  const SupervisorConfig* sup = config.use_supervisor ? &config.supervisor : nullptr;
  for (const auto seed : seeds) {
    EnvConfig env_cfg = config.env;
    env_cfg.seed = seed;
    MergeEnv env(env_cfg);
    env.reset();
    std::mt19937_64 rng(derive_seed(seed, 1));
    const auto ep = run_episode(env, params, sup, rng, false);
    const auto& m = ep.metrics;
    out.episodes += 1;
    out.mean_reward += m.episode_reward;
    out.mean_speed += m.mean_speed;
    out.collision_rate += m.collision ? 1.0 : 0.0;
    out.no_safe_action_episodes += m.no_safe_action ? 1 : 0;
    decisions += m.decisions;
    interventions += m.interventions;
    calls += m.supervisor_calls;
    latency += m.supervisor_latency_ms;
  }
  if (out.episodes > 0) {
    out.mean_reward /= out.episodes;
    out.mean_speed /= out.episodes;
    out.collision_rate /= out.episodes;
  }
  out.intervention_rate = decisions > 0 ? static_cast<double>(interventions) / decisions : 0.0;
  out.supervisor_latency_ms = calls > 0 ? latency / calls : 0.0;
  return out;
}

std::string format_metrics_row(const MetricsRow& row, bool record_latency) {
  std::ostringstream s;
  s << row.step << ',' << row.episode << std::fixed << std::setprecision(6) << ','
    << row.metrics.mean_reward << ',' << row.metrics.mean_speed << ','
    << row.metrics.collision_rate << ',' << row.metrics.intervention_rate << ','
    << (record_latency ? row.metrics.supervisor_latency_ms : 0.0);
  return s.str();
}

namespace {

NetworkParams initial_params(const TrainerConfig& config, std::mt19937_64& rng) {
  auto params = NetworkParams::random(rng);
  if (!config.init_from) return params;
  Checkpoint ck;
  try {
    ck = load_checkpoint(*config.init_from);
  } catch (const CheckpointError& e) {
    throw std::invalid_argument("cannot initialize from " + config.init_from->string() + ": " +
                                e.what());
  }
  if (ck.params.values.size() != params.values.size()) {
    throw std::invalid_argument("curriculum checkpoint has the wrong parameter shape");
  }
  if (ck.config_hash != config_hash(config)) {
    spdlog::warn("warm start from {}: checkpoint was trained under a different config",
                 config.init_from->string());
  }
  return ck.params;
}

}  // namespace

TrainingSummary train(const TrainerConfig& config) {
  if (!(config.gamma > 0.0 && config.gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in (0, 1]");
  }
  std::mt19937_64 rng(derive_seed(config.seed, 0));
  TrainingSummary summary;
  summary.params = initial_params(config, rng);
  auto& params = summary.params;
  auto opt = OptimizerState::zeros();
  const auto hash = config_hash(config);

  EnvConfig env_cfg = config.env;
  env_cfg.seed = derive_seed(config.seed, 2);
  MergeEnv env(env_cfg);
  const auto eval_seeds = evaluation_seeds(config.seed, config.eval_episodes);
  const SupervisorConfig* sup = config.use_supervisor ? &config.supervisor : nullptr;

  std::ofstream metrics_out;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    metrics_out.open(config.out_dir / "metrics.csv", std::ios::trunc);
    if (!metrics_out) throw std::runtime_error("cannot write metrics.csv in " + config.out_dir.string());
    metrics_out << kMetricsHeader << '\n';
  }

  double best_reward = -std::numeric_limits<double>::infinity();
  int last_eval_episode = -1;
  auto run_evaluation = [&]() {
    MetricsRow row{summary.steps, summary.episodes, evaluate(params, config, eval_seeds)};
    summary.evaluations.push_back(row);
    last_eval_episode = summary.episodes;
    spdlog::debug("eval step {} reward {:.3f} speed {:.2f}", row.step, row.metrics.mean_reward,
                  row.metrics.mean_speed);
    if (config.out_dir.empty()) return;
    metrics_out << format_metrics_row(row, config.record_latency) << '\n' << std::flush;
    const Checkpoint ck{params, opt, summary.steps, hash};
    save_checkpoint(config.out_dir / "latest.ckpt", ck);
    if (row.metrics.mean_reward > best_reward) {
      best_reward = row.metrics.mean_reward;
      save_checkpoint(config.out_dir / "best.ckpt", ck);
    }
  };

  run_evaluation();
  while (summary.steps < config.total_steps) {
    env.reset();
    auto ep = run_episode(env, params, sup, rng, true);
    summary.steps += ep.metrics.steps;
    summary.episodes += 1;
    const auto report = update(params, opt, ep.buffers, config);
    if (report.samples > 0 && !report.applied) summary.skipped_updates += 1;
    if (config.eval_every_episodes > 0 && summary.episodes % config.eval_every_episodes == 0) {
      run_evaluation();
    }
  }
  if (last_eval_episode != summary.episodes) run_evaluation();
  return summary;
}

}  // namespace onramp
