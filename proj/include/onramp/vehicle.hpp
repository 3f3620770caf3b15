#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace onramp {

inline constexpr double kVehicleLength = 5.0;
inline constexpr double kVehicleWidth = 2.0;
inline constexpr double kMinSpeed = 10.0;
inline constexpr double kMaxSpeed = 30.0;
inline constexpr double kMaxAcceleration = 5.0;
inline constexpr double kMaxSteering = 0.785398163397448309616;  // pi/4
inline constexpr double kPolicyPeriod = 0.2;

enum class VehicleKind : std::uint8_t { AV, HDV };

/// Discrete meta-actions. The numeric order is the network's logit order.
enum class Action : std::uint8_t { LaneLeft = 0, Idle = 1, LaneRight = 2, Faster = 3, Slower = 4 };

inline constexpr int kNumActions = 5;

inline constexpr std::array<Action, kNumActions> kAllActions = {
    Action::LaneLeft, Action::Idle, Action::LaneRight, Action::Faster, Action::Slower};

constexpr int to_index(Action a) { return static_cast<int>(a); }
constexpr Action action_from_index(int i) { return static_cast<Action>(i); }
constexpr bool is_lane_change(Action a) { return a == Action::LaneLeft || a == Action::LaneRight; }

std::string_view action_name(Action a);

struct VehicleState {
  int id = 0;
  VehicleKind kind = VehicleKind::HDV;
  double x = 0.0;        // longitudinal, road frame [m]
  double y = 0.0;        // lateral, positive toward the ramp [m]
  double heading = 0.0;  // [rad]
  double speed = 0.0;    // [m/s], never negative
  int lane = 0;
  double target_speed = 0.0;
  int target_lane = 0;
  double length = kVehicleLength;
  double width = kVehicleWidth;
  bool on_ramp = false;

  double front() const { return x + 0.5 * length; }
  double rear() const { return x - 0.5 * length; }
  bool is_av() const { return kind == VehicleKind::AV; }

  bool operator==(const VehicleState&) const = default;
};

struct ControlInput {
  double acceleration = 0.0;  // [m/s^2]
  double steering = 0.0;      // [rad]

  bool operator==(const ControlInput&) const = default;
};

}  // namespace onramp
