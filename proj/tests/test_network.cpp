#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "onramp/network.hpp"
#include "support.hpp"

using namespace onramp;
using namespace onramp::testing;

TEST_CASE("layout") {
  const auto& layout = network_layout();
  REQUIRE(layout.size() == 12);
  CHECK(layout[static_cast<std::size_t>(Tensor::TrunkW)].rows == 128);
  CHECK(layout[static_cast<std::size_t>(Tensor::TrunkW)].cols == 3 * 64);
  CHECK(layout[static_cast<std::size_t>(Tensor::PresenceW)].cols == 6);
  CHECK(layout[static_cast<std::size_t>(Tensor::PositionW)].cols == 12);
  CHECK(layout[static_cast<std::size_t>(Tensor::ActorW)].rows == 5);
  CHECK(layout[static_cast<std::size_t>(Tensor::CriticW)].rows == 1);
  std::size_t expected = 0;
  for (const auto& t : layout) {
    CHECK(t.offset == expected);
    expected += t.size();
  }
  CHECK(network_parameter_count() == expected);
}

TEST_CASE("random init bounds") {
  std::mt19937_64 rng(1);
  const auto p = NetworkParams::random(rng);
  for (const auto& t : network_layout()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(t.cols));
    const auto m = p.values.segment(static_cast<Eigen::Index>(t.offset), static_cast<Eigen::Index>(t.size()));
    if (t.name.ends_with(".bias")) {
      CHECK(m.isZero(0.0));
    } else {
      CHECK(m.cwiseAbs().maxCoeff() <= bound);
      CHECK(m.cwiseAbs().maxCoeff() > 0.5 * bound);
    }
  }
}

TEST_CASE("forward examples") {
  const auto zeros = NetworkParams::zeros();
  std::mt19937_64 rng(2);
  const auto obs = random_observation(rng);
  const ActionMask full = {true, true, true, true, true};
  const auto out = forward(zeros, obs, full);
  for (double p : out.probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(out.value == 0.0);

  const ActionMask one_off = {true, false, true, true, true};
  const auto masked = forward(zeros, obs, one_off);
  CHECK(masked.probs[1] < 1e-30);
  for (int i : {0, 2, 3, 4}) CHECK(masked.probs[static_cast<std::size_t>(i)] == doctest::Approx(0.25).epsilon(1e-15));

  const ActionMask none = {false, false, false, false, false};
  CHECK_THROWS_AS(forward(zeros, obs, none), std::invalid_argument);
}

TEST_CASE("masked softmax properties") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 10000; ++k) {
    std::array<double, kNumActions> logits{};
    for (auto& l : logits) l = u(rng);
    const auto mask = random_mask(rng);
    const auto p = masked_softmax(logits, mask);
    REQUIRE(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
    for (int i = 0; i < kNumActions; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) REQUIRE(p[static_cast<std::size_t>(i)] < 1e-30);
    }
    const double c = u(rng);
    auto shifted = logits;
    for (auto& l : shifted) l += c;
    const auto q = masked_softmax(shifted, mask);
    for (int i = 0; i < kNumActions; ++i) REQUIRE(std::abs(p[static_cast<std::size_t>(i)] - q[static_cast<std::size_t>(i)]) < 1e-12);
  }
}

TEST_CASE("network outputs on random inputs") {
  std::mt19937_64 rng(4);
  const auto params = random_params(rng);
  for (int k = 0; k < 2000; ++k) {
    const auto obs = random_observation(rng);
    const auto mask = random_mask(rng);
    const auto out = forward(params, obs, mask);
    REQUIRE(std::abs(std::accumulate(out.probs.begin(), out.probs.end(), 0.0) - 1.0) < 1e-12);
    for (int i = 0; i < kNumActions; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) REQUIRE(out.probs[static_cast<std::size_t>(i)] < 1e-30);
    }
    // One parameter set serves every agent: identical inputs, identical outputs.
    const auto again = forward(params, obs, mask);
    REQUIRE(again.probs == out.probs);
    REQUIRE(again.value == out.value);
  }
}

TEST_CASE("loss at the uniform policy") {
  const auto zeros = NetworkParams::zeros();
  std::mt19937_64 rng(5);
  TrainingSample s;
  s.observation = random_observation(rng);
  s.mask = {true, true, false, true, false};
  s.action = Action::Idle;
  s.advantage = 0.0;
  s.value_target = 0.0;
  const std::vector<TrainingSample> batch = {s};
  const LossCoefficients coef;
  const auto r = loss_and_gradients(zeros, batch, coef);
  CHECK(r.loss.policy == 0.0);
  CHECK(r.loss.value == 0.0);
  CHECK(r.loss.entropy == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(r.loss.total == doctest::Approx(-0.01 * std::log(3.0)).epsilon(1e-14));
  CHECK_FALSE(r.non_finite_sample.has_value());
}

TEST_CASE("analytic gradient matches finite differences in every layer") {
  std::mt19937_64 rng(6);
  const LossCoefficients coef;
  for (int trial = 0; trial < 5; ++trial) {
    const auto params = random_params(rng);
    const auto batch = random_batch(rng, 8);
    const auto check = finite_difference_check(params, batch, coef, rng, 150);
    CAPTURE(trial);
    CHECK(check.skipped * 100 < check.checked);
    for (std::size_t t = 0; t < check.per_tensor.size(); ++t) {
      CAPTURE(network_layout()[t].name);
      CHECK(check.per_tensor[t] < 1e-4);
    }
  }
}

TEST_CASE("gradient decomposes into its loss terms") {
  std::mt19937_64 rng(7);
  const auto params = random_params(rng);
  const auto batch = random_batch(rng, 8);
  const auto pg = loss_and_gradients(params, batch, {0.0, 0.0});
  const auto vg = loss_and_gradients(params, batch, {1.0, 0.0});
  const auto eg = loss_and_gradients(params, batch, {0.0, 1.0});
  const auto full = loss_and_gradients(params, batch, {0.7, 0.03});

  // Pure policy gradient: nothing reaches the critic head.
  const auto& critic_w = network_layout()[static_cast<std::size_t>(Tensor::CriticW)];
  CHECK(pg.gradient.segment(static_cast<Eigen::Index>(critic_w.offset), 129).isZero(0.0));
  CHECK(pg.loss.total == doctest::Approx(pg.loss.policy).epsilon(1e-15));

  const Eigen::VectorXd expected = pg.gradient + 0.7 * (vg.gradient - pg.gradient) + 0.03 * (eg.gradient - pg.gradient);
  CHECK((full.gradient - expected).cwiseAbs().maxCoeff() < 1e-12);

  // The pure policy term alone also matches finite differences.
  const auto check = finite_difference_check(params, batch, {0.0, 0.0}, rng, 100);
  CHECK(check.max_relative_error < 1e-4);
}

TEST_CASE("non-finite input is reported") {
  std::mt19937_64 rng(8);
  const auto params = random_params(rng);
  auto batch = random_batch(rng, 4);
  batch[2].observation.at(0, 1) = std::numeric_limits<double>::quiet_NaN();
  const auto r = loss_and_gradients(params, batch, {});
  REQUIRE(r.non_finite_sample.has_value());
  CHECK(*r.non_finite_sample == 2);
}

TEST_CASE("optimizer step") {
  std::mt19937_64 rng(9);
  const AdamConfig cfg;

  SUBCASE("zero gradient leaves parameters unchanged") {
    auto params = random_params(rng);
    const auto before = params.values;
    auto opt = OptimizerState::zeros();
    optimizer_step(opt, params, Eigen::VectorXd::Zero(params.values.size()), cfg);
    CHECK(params.values == before);
    CHECK(opt.step == 1);
  }

  SUBCASE("clipping") {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
    g << 6.0, 8.0, 0.0, 0.0;
    CHECK(clip_by_global_norm(g, 0.5) == doctest::Approx(10.0));
    CHECK(g.norm() == doctest::Approx(0.5));
    CHECK(g[0] == doctest::Approx(0.3));
    Eigen::VectorXd small = Eigen::VectorXd::Constant(4, 0.1);
    clip_by_global_norm(small, 0.5);
    CHECK(small == Eigen::VectorXd::Constant(4, 0.1));
  }

  SUBCASE("first step moves each parameter by about the learning rate") {
    auto params = random_params(rng);
    const auto before = params.values;
    auto opt = OptimizerState::zeros();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(params.values.size());
    g[0] = 60.0;
    g[1] = -80.0;  // norm 100, clipped to 0.5 before the moments
    optimizer_step(opt, params, g, cfg);
    CHECK(opt.first_moment[0] == doctest::Approx(0.1 * 0.3));
    CHECK(opt.second_moment[1] == doctest::Approx(0.001 * 0.16));
    CHECK(params.values[0] - before[0] == doctest::Approx(-5e-4 * 0.3 / (0.3 + 1e-8)));
    CHECK(params.values[1] - before[1] == doctest::Approx(5e-4 * 0.4 / (0.4 + 1e-8)));
    CHECK(params.values[2] == before[2]);
  }

  SUBCASE("identical calls give identical results") {
    auto a = random_params(rng);
    auto b = a;
    auto oa = OptimizerState::zeros();
    auto ob = oa;
    const auto batch = random_batch(rng, 8);
    for (int k = 0; k < 3; ++k) {
      optimizer_step(oa, a, loss_and_gradients(a, batch, {}).gradient, cfg);
      optimizer_step(ob, b, loss_and_gradients(b, batch, {}).gradient, cfg);
    }
    CHECK(a.values == b.values);
    CHECK(oa.second_moment == ob.second_moment);
  }

  SUBCASE("shape mismatch is rejected") {
    auto params = random_params(rng);
    auto opt = OptimizerState::zeros();
    CHECK_THROWS_AS(optimizer_step(opt, params, Eigen::VectorXd::Zero(3), cfg), std::invalid_argument);
  }
}
