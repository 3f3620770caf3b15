#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "onramp/trainer.hpp"

namespace onramp {

TrafficMode parse_traffic_mode(const std::string& s);
RewardMode parse_reward_mode(const std::string& s);

nlohmann::ordered_json to_json(const EnvConfig& c);
nlohmann::ordered_json to_json(const TrainerConfig& c);

/// Missing keys keep their defaults; unknown keys are rejected.
void apply_json(EnvConfig& c, const nlohmann::json& j);
void apply_json(TrainerConfig& c, const nlohmann::json& j);

TrainerConfig load_trainer_config(const std::filesystem::path& path);

}  // namespace onramp
