#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "onramp/network.hpp"

namespace onramp::testing {

inline Observation random_observation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> rows(0, Observation::kRows - 1);
  Observation obs;
  const int present = 1 + rows(rng);
  for (int r = 0; r < present; ++r) {
    obs.at(r, 0) = 1.0;
    for (int c = 1; c < Observation::kFeatures; ++c) obs.at(r, c) = u(rng);
  }
  return obs;
}

inline ActionMask random_mask(std::mt19937_64& rng) {
  ActionMask m{};
  do {
    for (auto& b : m) b = (rng() & 1U) != 0;
  } while (count_valid(m) == 0);
  return m;
}

inline Action random_valid_action(const ActionMask& m, std::mt19937_64& rng) {
  std::vector<Action> valid;
  for (auto a : kAllActions) {
    if (m[static_cast<std::size_t>(to_index(a))]) valid.push_back(a);
  }
  return valid[rng() % valid.size()];
}

inline std::vector<TrainingSample> random_batch(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<TrainingSample> batch;
  for (int k = 0; k < size; ++k) {
    TrainingSample s;
    s.observation = random_observation(rng);
    s.mask = random_mask(rng);
    s.action = random_valid_action(s.mask, rng);
    s.advantage = u(rng);
    s.value_target = u(rng);
    batch.push_back(s);
  }
  return batch;
}

/// Random weights plus small random biases, so every bias path is exercised.
inline NetworkParams random_params(std::mt19937_64& rng) {
  auto p = NetworkParams::random(rng);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (const auto& t : network_layout()) {
    if (t.cols != 1) continue;
    for (std::size_t i = 0; i < t.size(); ++i) p.values[static_cast<Eigen::Index>(t.offset + i)] = u(rng);
  }
  return p;
}

/// Mean actor-critic loss computed from forward() outputs only. When
/// `pattern` is given it receives the sign of every rectifier input.
inline double reference_loss(const NetworkParams& params, const std::vector<TrainingSample>& batch,
                             const LossCoefficients& coefficients,
                             std::vector<bool>* pattern = nullptr) {
  double total = 0.0;
  if (pattern) pattern->clear();
  for (const auto& s : batch) {
    const auto out = forward(params, s.observation, s.mask);
    if (pattern) {
      const auto& c = out.cache;
      for (const auto* v : {&c.presence_pre, &c.position_pre, &c.speed_pre, &c.trunk_pre}) {
        for (Eigen::Index i = 0; i < v->size(); ++i) pattern->push_back((*v)[i] > 0.0);
      }
    }
    double entropy = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
      const double p = out.probs[static_cast<std::size_t>(i)];
      if (s.mask[static_cast<std::size_t>(i)] && p > 0.0) entropy -= p * std::log(p);
    }
    const double err = out.value - s.value_target;
    total += -std::log(out.probs[static_cast<std::size_t>(to_index(s.action))]) * s.advantage +
             coefficients.value * err * err - coefficients.entropy * entropy;
  }
  return total / static_cast<double>(batch.size());
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::vector<double> per_tensor;  // worst relative error per tensor in layout order
  std::size_t checked = 0;
  std::size_t skipped = 0;  // stencils that crossed a rectifier kink
};

/// Central finite differences on `per_tensor` random entries of every tensor
/// (all entries when the tensor is smaller). Relative error is measured as
/// |analytic - numeric| / max(|analytic|, |numeric|, floor). A stencil whose
/// perturbation flips any rectifier is not differentiable there and is skipped.
inline GradientCheck finite_difference_check(const NetworkParams& params,
                                             const std::vector<TrainingSample>& batch,
                                             const LossCoefficients& coefficients,
                                             std::mt19937_64& rng, std::size_t per_tensor,
                                             double eps = 1e-5, double floor = 1e-6) {
  const auto analytic = loss_and_gradients(params, batch, coefficients).gradient;
  GradientCheck out;
  NetworkParams probe = params;
  std::vector<bool> base, pattern_up, pattern_down;
  reference_loss(params, batch, coefficients, &base);
  for (const auto& t : network_layout()) {
    std::vector<std::size_t> entries(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) entries[i] = t.offset + i;
    if (entries.size() > per_tensor) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(per_tensor);
    }
    double worst = 0.0;
    for (const auto idx : entries) {
      const auto i = static_cast<Eigen::Index>(idx);
      const double saved = probe.values[i];
      probe.values[i] = saved + eps;
      const double up = reference_loss(probe, batch, coefficients, &pattern_up);
      probe.values[i] = saved - eps;
      const double down = reference_loss(probe, batch, coefficients, &pattern_down);
      probe.values[i] = saved;
      if (pattern_up != base || pattern_down != base) {
        ++out.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, rel);
      ++out.checked;
    }
    out.per_tensor.push_back(worst);
    out.max_relative_error = std::max(out.max_relative_error, worst);
  }
  return out;
}

}  // namespace onramp::testing
