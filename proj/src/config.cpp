#include "onramp/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <stdexcept>

namespace onramp {

TrafficMode parse_traffic_mode(const std::string& s) {
  if (s == "easy") return TrafficMode::Easy;
  if (s == "medium") return TrafficMode::Medium;
  if (s == "hard") return TrafficMode::Hard;
  throw std::invalid_argument("unknown traffic mode: " + s);
}

RewardMode parse_reward_mode(const std::string& s) {
  if (s == "local") return RewardMode::Local;
  if (s == "global") return RewardMode::GlobalAverage;
  throw std::invalid_argument("unknown reward mode: " + s);
}

namespace {

using Json = nlohmann::json;
using Setter = std::function<void(const Json&)>;

void apply_fields(const Json& j, const std::string& section, const std::map<std::string, Setter>& fields) {
  if (!j.is_object()) throw std::invalid_argument("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw std::invalid_argument("unknown config key '" + section + "." + key + "'");
    try {
      it->second(value);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("bad value for '" + section + "." + key + "': " + e.what());
    }
  }
}

template <typename T>
Setter set(T& field) {
  return [&field](const Json& v) { field = v.get<T>(); };
}

}  // namespace

nlohmann::ordered_json to_json(const EnvConfig& c) {
  const auto& m = c.model;
  nlohmann::ordered_json j;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["episode_horizon"] = c.episode_horizon;
  j["reward_weights"] = {{"collision", c.weights.collision},
                         {"speed", c.weights.speed},
                         {"headway", c.weights.headway},
                         {"merge", c.weights.merge}};
  j["headway_threshold"] = c.headway_threshold;
  j["reward_mode"] = to_string(c.reward_mode);
  j["num_spawn_points"] = c.num_spawn_points;
  j["spawn_span"] = c.spawn_span;
  j["spawn_noise"] = c.spawn_noise;
  j["init_speed_min"] = c.init_speed_min;
  j["init_speed_max"] = c.init_speed_max;
  j["hdv_v0_min"] = c.hdv_v0_min;
  j["hdv_v0_max"] = c.hdv_v0_max;
  j["hdv_noise"] = c.hdv_noise;
  j["perception_distance"] = c.perception_distance;
  j["num_neighbors"] = c.num_neighbors;
  j["headway_clamp"] = c.headway_clamp;
  j["road"] = {{"road_length", m.road.road_length},
               {"merge_entrance_x", m.road.merge_entrance_x},
               {"ramp_length", m.road.ramp_length},
               {"lane_width", m.road.lane_width}};
  j["kinematics"] = {{"half_wheelbase", m.kinematics.half_wheelbase},
                     {"physics_dt", m.kinematics.physics_dt},
                     {"substeps_per_action", m.kinematics.substeps_per_action},
                     {"speed_increment", m.kinematics.speed_increment}};
  j["gains"] = {{"k_speed", m.gains.k_speed},
                {"k_lateral", m.gains.k_lateral},
                {"k_heading", m.gains.k_heading}};
  j["idm"] = {{"a_max", m.idm.a_max}, {"b_comf", m.idm.b_comf},         {"s0", m.idm.s0},
              {"time_gap", m.idm.time_gap}, {"delta", m.idm.delta}};
  j["mobil"] = {{"politeness", m.mobil.politeness},
                {"gain_threshold", m.mobil.gain_threshold},
                {"b_safe", m.mobil.b_safe}};
  return j;
}

void apply_json(EnvConfig& c, const Json& j) {
  auto& m = c.model;
  apply_fields(j, "env",
               {
                   {"mode", [&](const Json& v) { c.mode = parse_traffic_mode(v.get<std::string>()); }},
                   {"seed", set(c.seed)},
                   {"episode_horizon", set(c.episode_horizon)},
                   {"reward_weights",
                    [&](const Json& v) {
                      apply_fields(v, "env.reward_weights",
                                   {{"collision", set(c.weights.collision)},
                                    {"speed", set(c.weights.speed)},
                                    {"headway", set(c.weights.headway)},
                                    {"merge", set(c.weights.merge)}});
                    }},
                   {"headway_threshold", set(c.headway_threshold)},
                   {"reward_mode",
                    [&](const Json& v) { c.reward_mode = parse_reward_mode(v.get<std::string>()); }},
                   {"num_spawn_points", set(c.num_spawn_points)},
                   {"spawn_span", set(c.spawn_span)},
                   {"spawn_noise", set(c.spawn_noise)},
                   {"init_speed_min", set(c.init_speed_min)},
                   {"init_speed_max", set(c.init_speed_max)},
                   {"hdv_v0_min", set(c.hdv_v0_min)},
                   {"hdv_v0_max", set(c.hdv_v0_max)},
                   {"hdv_noise", set(c.hdv_noise)},
                   {"perception_distance", set(c.perception_distance)},
                   {"num_neighbors", set(c.num_neighbors)},
                   {"headway_clamp", set(c.headway_clamp)},
                   {"road",
                    [&](const Json& v) {
                      apply_fields(v, "env.road",
                                   {{"road_length", set(m.road.road_length)},
                                    {"merge_entrance_x", set(m.road.merge_entrance_x)},
                                    {"ramp_length", set(m.road.ramp_length)},
                                    {"lane_width", set(m.road.lane_width)}});
                    }},
                   {"kinematics",
                    [&](const Json& v) {
                      apply_fields(v, "env.kinematics",
                                   {{"half_wheelbase", set(m.kinematics.half_wheelbase)},
                                    {"physics_dt", set(m.kinematics.physics_dt)},
                                    {"substeps_per_action", set(m.kinematics.substeps_per_action)},
                                    {"speed_increment", set(m.kinematics.speed_increment)}});
                    }},
                   {"gains",
                    [&](const Json& v) {
                      apply_fields(v, "env.gains",
                                   {{"k_speed", set(m.gains.k_speed)},
                                    {"k_lateral", set(m.gains.k_lateral)},
                                    {"k_heading", set(m.gains.k_heading)}});
                    }},
                   {"idm",
                    [&](const Json& v) {
                      apply_fields(v, "env.idm",
                                   {{"a_max", set(m.idm.a_max)},
                                    {"b_comf", set(m.idm.b_comf)},
                                    {"s0", set(m.idm.s0)},
                                    {"time_gap", set(m.idm.time_gap)},
                                    {"delta", set(m.idm.delta)}});
                    }},
                   {"mobil",
                    [&](const Json& v) {
                      apply_fields(v, "env.mobil",
                                   {{"politeness", set(m.mobil.politeness)},
                                    {"gain_threshold", set(m.mobil.gain_threshold)},
                                    {"b_safe", set(m.mobil.b_safe)}});
                    }},
               });
  const double policy_period = m.kinematics.physics_dt * m.kinematics.substeps_per_action;
  if (std::abs(policy_period - kPolicyPeriod) > 1e-9) {
    throw std::invalid_argument("physics_dt * substeps_per_action must equal 0.2 s");
  }
  if (c.weights.collision < 0 || c.weights.speed < 0 || c.weights.headway < 0 || c.weights.merge < 0) {
    throw std::invalid_argument("reward weights must be nonnegative");
  }
}

nlohmann::ordered_json to_json(const TrainerConfig& c) {
  nlohmann::ordered_json j;
  j["env"] = to_json(c.env);
  j["supervisor"] = {{"enabled", c.use_supervisor},
                     {"horizon", c.supervisor.horizon},
                     {"alpha_merge", c.supervisor.alpha_merge},
                     {"alpha_distance", c.supervisor.alpha_distance},
                     {"alpha_headway", c.supervisor.alpha_headway},
                     {"sigma_std", c.supervisor.sigma_std},
                     {"conflict_buffer", c.supervisor.conflict_buffer},
                     {"headway_score_clamp", c.supervisor.headway_score_clamp}};
  j["gamma"] = c.gamma;
  j["learning_rate"] = c.adam.learning_rate;
  j["clip_norm"] = c.adam.clip_norm;
  j["value_coef"] = c.loss.value;
  j["entropy_coef"] = c.loss.entropy;
  j["total_steps"] = c.total_steps;
  j["eval_every_episodes"] = c.eval_every_episodes;
  j["eval_episodes"] = c.eval_episodes;
  j["seed"] = c.seed;
  j["record_latency"] = c.record_latency;
  j["init_from"] = c.init_from ? nlohmann::ordered_json(c.init_from->string()) : nullptr;
  j["out_dir"] = c.out_dir.string();
  return j;
}

void apply_json(TrainerConfig& c, const Json& j) {
  apply_fields(
      j, "config",
      {
          {"env", [&](const Json& v) { apply_json(c.env, v); }},
          {"supervisor",
           [&](const Json& v) {
             apply_fields(v, "supervisor",
                          {{"enabled", set(c.use_supervisor)},
                           {"horizon", set(c.supervisor.horizon)},
                           {"alpha_merge", set(c.supervisor.alpha_merge)},
                           {"alpha_distance", set(c.supervisor.alpha_distance)},
                           {"alpha_headway", set(c.supervisor.alpha_headway)},
                           {"sigma_std", set(c.supervisor.sigma_std)},
                           {"conflict_buffer", set(c.supervisor.conflict_buffer)},
                           {"headway_score_clamp", set(c.supervisor.headway_score_clamp)}});
           }},
          {"gamma", set(c.gamma)},
          {"learning_rate", set(c.adam.learning_rate)},
          {"clip_norm", set(c.adam.clip_norm)},
          {"value_coef", set(c.loss.value)},
          {"entropy_coef", set(c.loss.entropy)},
          {"total_steps", set(c.total_steps)},
          {"eval_every_episodes", set(c.eval_every_episodes)},
          {"eval_episodes", set(c.eval_episodes)},
          {"seed", set(c.seed)},
          {"record_latency", set(c.record_latency)},
          {"init_from",
           [&](const Json& v) {
             if (v.is_null()) {
               c.init_from.reset();
             } else {
               c.init_from = v.get<std::string>();
             }
           }},
          {"out_dir", [&](const Json& v) { c.out_dir = v.get<std::string>(); }},
      });
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (c.supervisor.horizon < 1) throw std::invalid_argument("supervisor.horizon must be >= 1");
  c.supervisor.headway_threshold = c.env.headway_threshold;
}

TrainerConfig load_trainer_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  TrainerConfig c;
  apply_json(c, Json::parse(in));
  return c;
}

}  // namespace onramp
