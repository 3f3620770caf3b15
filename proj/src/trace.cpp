#include "onramp/trace.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace onramp {

namespace {

std::optional<Action> action_from_name(const std::string& name) {
  for (Action a : kAllActions) {
    if (action_name(a) == name) return a;
  }
  return std::nullopt;
}

}  // namespace

std::string to_json_line(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["episode"] = r.episode;
  j["step"] = r.step;
  j["id"] = r.id;
  j["kind"] = r.kind == VehicleKind::AV ? "av" : "hdv";
  j["x"] = r.x;
  j["y"] = r.y;
  j["heading"] = r.heading;
  j["speed"] = r.speed;
  j["lane"] = r.lane;
  j["action"] = r.action ? nlohmann::ordered_json(std::string(action_name(*r.action))) : nullptr;
  j["replaced"] = r.replaced;
  if (r.reward) {
    j["reward"] = {{"collision", r.reward->collision}, {"speed", r.reward->speed},
                   {"headway", r.reward->headway},     {"merge", r.reward->merge},
                   {"total", r.reward->total}};
  } else {
    j["reward"] = nullptr;
  }
  return j.dump();
}

TraceRecord trace_record_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  TraceRecord r;
  r.episode = j.at("episode").get<int>();
  r.step = j.at("step").get<int>();
  r.id = j.at("id").get<int>();
  r.kind = j.at("kind").get<std::string>() == "av" ? VehicleKind::AV : VehicleKind::HDV;
  r.x = j.at("x").get<double>();
  r.y = j.at("y").get<double>();
  r.heading = j.at("heading").get<double>();
  r.speed = j.at("speed").get<double>();
  r.lane = j.at("lane").get<int>();
  if (!j.at("action").is_null()) {
    r.action = action_from_name(j.at("action").get<std::string>());
    if (!r.action) throw std::runtime_error("unknown action in trace: " + j.at("action").dump());
  }
  r.replaced = j.value("replaced", false);
  if (!j.at("reward").is_null()) {
    const auto& w = j.at("reward");
    r.reward = RewardComponents{w.at("collision").get<double>(), w.at("speed").get<double>(),
                                w.at("headway").get<double>(), w.at("merge").get<double>(),
                                w.at("total").get<double>()};
  }
  return r;
}

void write_trace_step(std::ostream& out, int episode, const MergeEnv& env,
                      std::span<const Action> actions, std::span<const bool> replaced,
                      const StepResult* step_result) {
  for (const auto& v : env.vehicles()) {
    TraceRecord r;
    r.episode = episode;
    r.step = env.time_step();
    r.id = v.id;
    r.kind = v.kind;
    r.x = v.x;
    r.y = v.y;
    r.heading = v.heading;
    r.speed = v.speed;
    r.lane = v.lane;
    if (v.is_av()) {
      const auto i = static_cast<std::size_t>(v.id);
      if (i < actions.size()) r.action = actions[i];
      if (i < replaced.size()) r.replaced = replaced[i];
      if (step_result != nullptr && i < step_result->agents.size()) {
        r.reward = step_result->agents[i].components;
      }
    }
    out << to_json_line(r) << '\n';
  }
}

std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(trace_record_from_json(line));
  }
  return out;
}

}  // namespace onramp
