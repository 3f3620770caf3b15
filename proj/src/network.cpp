#include "onramp/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace onramp {

namespace {

constexpr int kPresenceInputs = Observation::kRows;
constexpr int kPositionInputs = Observation::kRows * 2;
constexpr int kSpeedInputs = Observation::kRows * 2;
constexpr int kConcatWidth = 3 * kEncoderWidth;

std::vector<TensorInfo> build_layout() {
  std::vector<TensorInfo> layout = {
      {"presence.weight", kEncoderWidth, kPresenceInputs, 0},
      {"presence.bias", kEncoderWidth, 1, 0},
      {"position.weight", kEncoderWidth, kPositionInputs, 0},
      {"position.bias", kEncoderWidth, 1, 0},
      {"speed.weight", kEncoderWidth, kSpeedInputs, 0},
      {"speed.bias", kEncoderWidth, 1, 0},
      {"trunk.weight", kTrunkWidth, kConcatWidth, 0},
      {"trunk.bias", kTrunkWidth, 1, 0},
      {"actor.weight", kNumActions, kTrunkWidth, 0},
      {"actor.bias", kNumActions, 1, 0},
      {"critic.weight", 1, kTrunkWidth, 0},
      {"critic.bias", 1, 1, 0},
  };
  std::size_t offset = 0;
  for (auto& t : layout) {
    t.offset = offset;
    offset += t.size();
  }
  return layout;
}

const TensorInfo& info(Tensor t) { return network_layout()[static_cast<std::size_t>(t)]; }

Eigen::VectorXd relu(const Eigen::VectorXd& x) { return x.cwiseMax(0.0); }

Eigen::VectorXd relu_grad(const Eigen::VectorXd& pre, const Eigen::VectorXd& upstream) {
  return (pre.array() > 0.0).select(upstream, 0.0);
}

struct GradientView {
  Eigen::VectorXd& g;
  MatrixMap operator()(Tensor t) {
    const auto& ti = info(t);
    return MatrixMap(g.data() + ti.offset, ti.rows, ti.cols);
  }
};

}  // namespace

const std::vector<TensorInfo>& network_layout() {
  static const std::vector<TensorInfo> layout = build_layout();
  return layout;
}

std::size_t network_parameter_count() {
  const auto& last = network_layout().back();
  return last.offset + last.size();
}

NetworkParams NetworkParams::zeros() {
  return NetworkParams{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(network_parameter_count()))};
}

NetworkParams NetworkParams::random(std::mt19937_64& rng) {
  auto p = zeros();
  for (const auto& t : network_layout()) {
    if (t.cols == 1 && t.name.ends_with(".bias")) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < t.size(); ++i) {
      p.values[static_cast<Eigen::Index>(t.offset + i)] = dist(rng);
    }
  }
  return p;
}

ConstMatrixMap NetworkParams::tensor(Tensor t) const {
  const auto& ti = info(t);
  return ConstMatrixMap(values.data() + ti.offset, ti.rows, ti.cols);
}

MatrixMap NetworkParams::tensor(Tensor t) {
  const auto& ti = info(t);
  return MatrixMap(values.data() + ti.offset, ti.rows, ti.cols);
}

void group_features(const Observation& obs, Eigen::VectorXd& presence, Eigen::VectorXd& position,
                    Eigen::VectorXd& speed) {
  presence.resize(kPresenceInputs);
  position.resize(kPositionInputs);
  speed.resize(kSpeedInputs);
  for (int r = 0; r < Observation::kRows; ++r) {
    presence[r] = obs.at(r, 0);
    position[2 * r] = obs.at(r, 1);
    position[2 * r + 1] = obs.at(r, 2);
    speed[2 * r] = obs.at(r, 3);
    speed[2 * r + 1] = obs.at(r, 4);
  }
}

std::array<double, kNumActions> masked_softmax(const std::array<double, kNumActions>& logits,
                                               const ActionMask& mask) {
  std::array<double, kNumActions> z{};
  double top = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumActions; ++i) {
    z[i] = mask[i] ? logits[i] : kMaskedLogit;
    top = std::max(top, z[i]);
  }
  double sum = 0.0;
  std::array<double, kNumActions> p{};
  for (int i = 0; i < kNumActions; ++i) {
    p[i] = std::exp(z[i] - top);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

ForwardOutput forward(const NetworkParams& params, const Observation& obs, const ActionMask& mask) {
  if (count_valid(mask) == 0) throw std::invalid_argument("forward: every action is masked");
  ForwardOutput out;
  auto& c = out.cache;
  group_features(obs, c.presence_in, c.position_in, c.speed_in);

  c.presence_pre = params.tensor(Tensor::PresenceW) * c.presence_in + params.tensor(Tensor::PresenceB);
  c.position_pre = params.tensor(Tensor::PositionW) * c.position_in + params.tensor(Tensor::PositionB);
  c.speed_pre = params.tensor(Tensor::SpeedW) * c.speed_in + params.tensor(Tensor::SpeedB);
  c.concat.resize(kConcatWidth);
  c.concat << relu(c.presence_pre), relu(c.position_pre), relu(c.speed_pre);

  c.trunk_pre = params.tensor(Tensor::TrunkW) * c.concat + params.tensor(Tensor::TrunkB);
  c.trunk = relu(c.trunk_pre);

  const Eigen::VectorXd logits = params.tensor(Tensor::ActorW) * c.trunk + params.tensor(Tensor::ActorB);
  c.mask = mask;
  for (int i = 0; i < kNumActions; ++i) c.logits[i] = mask[i] ? logits[i] : kMaskedLogit;
  out.probs = masked_softmax(c.logits, mask);
  out.value = (params.tensor(Tensor::CriticW) * c.trunk)(0, 0) + params.tensor(Tensor::CriticB)(0, 0);
  return out;
}

LossResult loss_and_gradients(const NetworkParams& params, std::span<const TrainingSample> batch,
                              const LossCoefficients& coefficients) {
  if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
  LossResult result;
  result.gradient = Eigen::VectorXd::Zero(params.values.size());
  GradientView grad{result.gradient};
  const double scale = 1.0 / static_cast<double>(batch.size());

  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& sample = batch[n];
    const auto fwd = forward(params, sample.observation, sample.mask);
    const auto& c = fwd.cache;
    const auto& p = fwd.probs;
    const int a = to_index(sample.action);
    if (!sample.mask[a]) throw std::invalid_argument("loss_and_gradients: action is masked");

    double top = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < kNumActions; ++i) {
      if (sample.mask[i]) top = std::max(top, c.logits[i]);
    }
    double sum = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
      if (sample.mask[i]) sum += std::exp(c.logits[i] - top);
    }
    const double log_z = top + std::log(sum);

    std::array<double, kNumActions> log_p{};
    double entropy = 0.0;
    for (int i = 0; i < kNumActions; ++i) {
      if (!sample.mask[i]) continue;
      log_p[i] = c.logits[i] - log_z;
      entropy -= p[i] * log_p[i];
    }
    const double value_error = fwd.value - sample.value_target;
    const double policy_term = -log_p[a] * sample.advantage;
    const double value_term = value_error * value_error;
    const double sample_loss =
        policy_term + coefficients.value * value_term - coefficients.entropy * entropy;
    if (!std::isfinite(sample_loss) && !result.non_finite_sample) result.non_finite_sample = n;

    result.loss.policy += scale * policy_term;
    result.loss.value += scale * value_term;
    result.loss.entropy += scale * entropy;

    // d(loss)/d(logit_j) over valid actions; masked logits are constants.
    Eigen::VectorXd d_logits = Eigen::VectorXd::Zero(kNumActions);
    for (int j = 0; j < kNumActions; ++j) {
      if (!sample.mask[j]) continue;
      const double policy_grad = -sample.advantage * ((j == a ? 1.0 : 0.0) - p[j]);
      const double entropy_grad = -p[j] * (log_p[j] + entropy);  // dH/dz_j
      d_logits[j] = scale * (policy_grad - coefficients.entropy * entropy_grad);
    }
    const double d_value = scale * 2.0 * coefficients.value * value_error;

    grad(Tensor::ActorW).noalias() += d_logits * c.trunk.transpose();
    grad(Tensor::ActorB) += d_logits;
    grad(Tensor::CriticW).noalias() += d_value * c.trunk.transpose();
    grad(Tensor::CriticB)(0, 0) += d_value;

    Eigen::VectorXd d_trunk = params.tensor(Tensor::ActorW).transpose() * d_logits;
    d_trunk += d_value * params.tensor(Tensor::CriticW).transpose();
    const Eigen::VectorXd d_trunk_pre = relu_grad(c.trunk_pre, d_trunk);
    grad(Tensor::TrunkW).noalias() += d_trunk_pre * c.concat.transpose();
    grad(Tensor::TrunkB) += d_trunk_pre;

    const Eigen::VectorXd d_concat = params.tensor(Tensor::TrunkW).transpose() * d_trunk_pre;
    const Eigen::VectorXd d_presence = relu_grad(c.presence_pre, d_concat.segment(0, kEncoderWidth));
    const Eigen::VectorXd d_position =
        relu_grad(c.position_pre, d_concat.segment(kEncoderWidth, kEncoderWidth));
    const Eigen::VectorXd d_speed =
        relu_grad(c.speed_pre, d_concat.segment(2 * kEncoderWidth, kEncoderWidth));
    grad(Tensor::PresenceW).noalias() += d_presence * c.presence_in.transpose();
    grad(Tensor::PresenceB) += d_presence;
    grad(Tensor::PositionW).noalias() += d_position * c.position_in.transpose();
    grad(Tensor::PositionB) += d_position;
    grad(Tensor::SpeedW).noalias() += d_speed * c.speed_in.transpose();
    grad(Tensor::SpeedB) += d_speed;
  }
  result.loss.total = result.loss.policy + coefficients.value * result.loss.value -
                      coefficients.entropy * result.loss.entropy;
  return result;
}

OptimizerState OptimizerState::zeros() {
  const auto n = static_cast<Eigen::Index>(network_parameter_count());
  return OptimizerState{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
}

double clip_by_global_norm(Eigen::VectorXd& gradient, double max_norm) {
  const double norm = gradient.norm();
  if (norm > max_norm && norm > 0.0) gradient *= max_norm / norm;
  return norm;
}

void optimizer_step(OptimizerState& opt, NetworkParams& params, Eigen::VectorXd gradient,
                    const AdamConfig& config) {
  if (gradient.size() != params.values.size() || opt.first_moment.size() != params.values.size()) {
    throw std::invalid_argument("optimizer_step: shape mismatch");
  }
  clip_by_global_norm(gradient, config.clip_norm);
  ++opt.step;
  opt.first_moment = config.beta1 * opt.first_moment + (1.0 - config.beta1) * gradient;
  opt.second_moment =
      config.beta2 * opt.second_moment + (1.0 - config.beta2) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(opt.step));
  params.values.array() -= config.learning_rate * (opt.first_moment.array() / c1) /
                           ((opt.second_moment.array() / c2).sqrt() + config.epsilon);
}

}  // namespace onramp
