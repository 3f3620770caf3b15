#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onramp/merge_env.hpp"

namespace onramp {

inline constexpr int kEncoderWidth = 64;
inline constexpr int kTrunkWidth = 128;
inline constexpr double kMaskedLogit = -1e8;

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  bool operator==(const TensorInfo&) const = default;
};

/// Index of each tensor in the layout.
enum class Tensor : std::uint8_t {
  PresenceW, PresenceB, PositionW, PositionB, SpeedW, SpeedB,
  TrunkW, TrunkB, ActorW, ActorB, CriticW, CriticB,
};

/// Tensor table of the shared network. Weights are stored column-major.
const std::vector<TensorInfo>& network_layout();
std::size_t network_parameter_count();

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;

/// All weights of the policy/value network in one flat vector. One instance
/// serves every agent.
struct NetworkParams {
  Eigen::VectorXd values;

  static NetworkParams zeros();
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
  static NetworkParams random(std::mt19937_64& rng);

  ConstMatrixMap tensor(Tensor t) const;
  MatrixMap tensor(Tensor t);
  bool all_finite() const { return values.allFinite(); }
};

struct ForwardCache {
  Eigen::VectorXd presence_in, position_in, speed_in;
  Eigen::VectorXd presence_pre, position_pre, speed_pre;
  Eigen::VectorXd concat;  // rectified encoder outputs
  Eigen::VectorXd trunk_pre, trunk;
  std::array<double, kNumActions> logits{};  // after masking
  ActionMask mask{};
};

struct ForwardOutput {
  std::array<double, kNumActions> probs{};
  double value = 0.0;
  ForwardCache cache;
};

/// Splits the observation into the presence, position and speed groups.
void group_features(const Observation& obs, Eigen::VectorXd& presence, Eigen::VectorXd& position,
                    Eigen::VectorXd& speed);

/// Throws std::invalid_argument if no action is valid.
ForwardOutput forward(const NetworkParams& params, const Observation& obs, const ActionMask& mask);

/// Softmax over valid entries; invalid logits replaced by kMaskedLogit first.
std::array<double, kNumActions> masked_softmax(const std::array<double, kNumActions>& logits,
                                               const ActionMask& mask);

struct TrainingSample {
  Observation observation;
  ActionMask mask{};
  Action action = Action::Idle;
  double advantage = 0.0;
  double value_target = 0.0;
};

struct LossCoefficients {
  double value = 1.0;     // beta_1
  double entropy = 0.01;  // beta_2
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;   // -mean(log pi(a|s) A)
  double value = 0.0;    // mean((target - V)^2)
  double entropy = 0.0;  // mean H over valid actions
};

struct LossResult {
  LossTerms loss;
  Eigen::VectorXd gradient;
  /// Index of the first sample that produced a non-finite loss, if any.
  std::optional<std::size_t> non_finite_sample;
};

/// Mean-reduced actor-critic loss and its exact gradient. Advantages and
/// value targets are constants.
LossResult loss_and_gradients(const NetworkParams& params, std::span<const TrainingSample> batch,
                              const LossCoefficients& coefficients);

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.5;
};

struct OptimizerState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::int64_t step = 0;

  static OptimizerState zeros();
};

/// Rescales `gradient` in place so that its norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_by_global_norm(Eigen::VectorXd& gradient, double max_norm);

/// Clips the gradient, then applies one adaptive-moment update.
void optimizer_step(OptimizerState& opt, NetworkParams& params, Eigen::VectorXd gradient,
                    const AdamConfig& config);

}  // namespace onramp
