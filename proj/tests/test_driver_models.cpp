#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "onramp/driver_models.hpp"

using namespace onramp;

namespace {

VehicleState car(int id, double x, int lane, double speed, double v0 = 25.0) {
  VehicleState v;
  v.id = id;
  v.x = x;
  v.lane = lane;
  v.target_lane = lane;
  v.speed = speed;
  v.target_speed = v0;
  return v;
}

// Textbook IDM written out from scratch, for cross-checking.
double reference_idm(double v, double v0, std::optional<std::pair<double, double>> gap_and_lead_speed) {
  const double a_max = 3.0, b = 5.0, s0 = 5.0, T = 1.5;
  double a = a_max * (1.0 - std::pow(v / v0, 4.0));
  if (gap_and_lead_speed) {
    const auto [s, vl] = *gap_and_lead_speed;
    if (s <= 0.0) return -5.0;
    const double s_star = s0 + std::max(0.0, v * T + v * (v - vl) / (2.0 * std::sqrt(a_max * b)));
    a -= a_max * (s_star / s) * (s_star / s);
  }
  return std::clamp(a, -5.0, 5.0);
}

}  // namespace

TEST_CASE("idm free road") {
  IdmParams p;
  p.v0 = 30.0;
  CHECK(idm_acceleration(car(0, 0, 0, 30.0), std::nullopt, p) == doctest::Approx(0.0));
  CHECK(idm_acceleration(car(0, 0, 0, 15.0), std::nullopt, p) == doctest::Approx(2.8125).epsilon(1e-15));
}

TEST_CASE("idm equilibrium gap") {
  IdmParams p;
  p.v0 = 30.0;
  const double s_eq = 28.401877872187722;  // 27.5 / sqrt(0.9375)
  const auto ego = car(0, 0.0, 0, 15.0);
  const auto lead = car(1, ego.front() + s_eq + 0.5 * kVehicleLength, 0, 15.0);
  CHECK(std::abs(idm_acceleration(ego, lead, p)) < 1e-9);
}

TEST_CASE("idm non-positive gap returns the emergency floor") {
  IdmParams p;
  const auto ego = car(0, 0.0, 0, 20.0);
  CHECK(idm_acceleration(ego, car(1, 5.0, 0, 20.0), p) == -5.0);
  CHECK(idm_acceleration(ego, car(1, 3.0, 0, 20.0), p) == -5.0);
}

TEST_CASE("idm matches an independent formula and is monotone") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  IdmParams p;
  for (int k = 0; k < 10000; ++k) {
    const double v = 30.0 * u(rng);
    const double vl = 30.0 * u(rng);
    const double gap = 0.1 + 100.0 * u(rng);
    p.v0 = 23.0 + 4.0 * u(rng);
    const auto ego = car(0, 0.0, 0, v);
    const auto lead = car(1, ego.front() + gap + 0.5 * kVehicleLength, 0, vl);
    const double a = idm_acceleration(ego, lead, p);
    REQUIRE(a == doctest::Approx(reference_idm(v, p.v0, std::pair{gap, vl})).epsilon(1e-9));

    // Faster ego at the same gap and the same closing speed.
    const double dv = v - vl;
    const double v2 = v + 5.0 * u(rng);
    const auto faster = car(0, 0.0, 0, v2);
    const auto lead2 = car(1, faster.front() + gap + 0.5 * kVehicleLength, 0, v2 - dv);
    REQUIRE(idm_acceleration(faster, lead2, p) <= a + 1e-12);

    const auto farther = car(1, lead.x + 10.0 * u(rng), 0, vl);
    REQUIRE(idm_acceleration(ego, farther, p) >= a - 1e-12);
  }
}

TEST_CASE("leader and follower search") {
  const std::vector<VehicleState> scene = {car(0, 50, 0, 20), car(1, 80, 0, 20), car(2, 120, 0, 20),
                                           car(3, 60, 1, 20), car(4, 20, 0, 20)};
  const auto ego = scene[0];
  CHECK(find_leader(ego, scene, 0)->id == 1);
  CHECK(find_follower(ego, scene, 0)->id == 4);
  CHECK(find_leader(ego, scene, 1)->id == 3);
  CHECK_FALSE(find_follower(ego, scene, 1).has_value());
}

TEST_CASE("mobil examples") {
  const MobilParams mp;
  const IdmParams idm;
  const std::vector<int> lanes = {1};

  SUBCASE("empty road keeps the lane") {
    const auto ego = car(0, 100.0, 0, 25.0);
    const std::vector<VehicleState> scene = {ego};
    CHECK_FALSE(mobil_decision(ego, scene, lanes, mp, idm).has_value());
  }

  SUBCASE("close target-lane follower fails the safety test") {
    const auto ego = car(0, 100.0, 0, 25.0);
    const auto slow = car(1, 100.0 + 25.0, 0, 10.0);
    const auto follower = car(2, ego.rear() - 6.0 - 0.5 * kVehicleLength, 1, 25.0);
    const std::vector<VehicleState> scene = {ego, slow, follower};
    const auto ev = mobil_evaluate(ego, scene, 1, mp, idm);
    CHECK_FALSE(ev.safe);
    CHECK(ev.new_follower_accel < -mp.b_safe);
    CHECK_FALSE(mobil_decision(ego, scene, lanes, mp, idm).has_value());
  }

  SUBCASE("slow leader ahead and an empty target lane trigger a change") {
    const auto ego = car(0, 100.0, 0, 25.0);
    const auto slow = car(1, ego.front() + 20.0 + 0.5 * kVehicleLength, 0, 10.0);
    const std::vector<VehicleState> scene = {ego, slow};
    const auto ev = mobil_evaluate(ego, scene, 1, mp, idm);
    CHECK(ev.safe);
    CHECK(ev.incentive > mp.gain_threshold);
    CHECK(mobil_decision(ego, scene, lanes, mp, idm) == 1);
  }
}

namespace {

std::vector<VehicleState> random_scene(std::mt19937_64& rng, int lanes) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 8);
  const int n = count(rng);
  std::vector<VehicleState> scene;
  scene.push_back(car(0, 100.0, lanes / 2, 10.0 + 20.0 * u(rng), 23.0 + 4.0 * u(rng)));
  for (int i = 1; i <= n; ++i) {
    const int lane = std::uniform_int_distribution<int>(0, lanes - 1)(rng);
    scene.push_back(car(i, 100.0 + (u(rng) - 0.5) * 120.0, lane, 30.0 * u(rng), 23.0 + 4.0 * u(rng)));
  }
  return scene;
}

}  // namespace

TEST_CASE("mobil never accepts an unsafe change") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MobilParams mp;
  const IdmParams idm;
  int accepted = 0;
  for (int k = 0; k < 10000; ++k) {
    const auto scene = random_scene(rng, 2);
    const auto& ego = scene[0];
    mp.politeness = u(rng) < 0.5 ? 0.0 : u(rng);
    const int candidate = 1 - ego.lane;
    const std::vector<int> lanes = {candidate};
    const auto decision = mobil_decision(ego, scene, lanes, mp, idm);
    if (!decision) continue;
    ++accepted;

    // Re-check against the nearest vehicle behind ego on the target lane.
    const VehicleState* follower = nullptr;
    for (const auto& o : scene) {
      if (o.id == ego.id || o.lane != *decision) continue;
      const bool behind = o.x < ego.x || (o.x == ego.x && o.id < ego.id);
      if (behind && (!follower || o.x > follower->x)) follower = &o;
    }
    if (!follower) continue;
    const double gap = ego.rear() - follower->front();
    const double a = reference_idm(follower->speed, follower->target_speed, std::pair{gap, ego.speed});
    REQUIRE(a >= -mp.b_safe);
  }
  CHECK(accepted > 100);
}

TEST_CASE("mobil is mirror symmetric") {
  std::mt19937_64 rng(5);
  const MobilParams mp;
  const IdmParams idm;
  constexpr int kLanes = 3;
  int changes = 0;
  for (int k = 0; k < 5000; ++k) {
    auto scene = random_scene(rng, kLanes);
    auto mirrored = scene;
    for (auto& v : mirrored) v.lane = v.target_lane = kLanes - 1 - v.lane;
    const std::vector<int> lanes = {0, 2};
    const std::vector<int> mirrored_lanes = {2, 0};
    const auto d = mobil_decision(scene[0], scene, lanes, mp, idm);
    const auto dm = mobil_decision(mirrored[0], mirrored, mirrored_lanes, mp, idm);
    REQUIRE(d.has_value() == dm.has_value());
    if (d) {
      REQUIRE(*dm == kLanes - 1 - *d);
      ++changes;
    }
  }
  CHECK(changes > 50);
}
