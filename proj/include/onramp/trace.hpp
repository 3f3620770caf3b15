#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onramp/merge_env.hpp"

namespace onramp {

/// One (step, vehicle) row of a trajectory trace. Stored as JSON lines.
struct TraceRecord {
  int episode = 0;
  int step = 0;
  int id = 0;
  VehicleKind kind = VehicleKind::HDV;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  int lane = 0;
  std::optional<Action> action;
  bool replaced = false;
  std::optional<RewardComponents> reward;

  bool operator==(const TraceRecord&) const = default;
};

std::string to_json_line(const TraceRecord& r);
TraceRecord trace_record_from_json(const std::string& line);

/// Writes every vehicle of the current env state. `actions`/`replaced` are
/// indexed by agent and may be empty (initial state); `step_result` supplies
/// reward components when present.
void write_trace_step(std::ostream& out, int episode, const MergeEnv& env,
                      std::span<const Action> actions, std::span<const bool> replaced,
                      const StepResult* step_result);

std::vector<TraceRecord> read_trace(std::istream& in);

}  // namespace onramp
