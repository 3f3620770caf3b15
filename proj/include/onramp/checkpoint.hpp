#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "onramp/network.hpp"

namespace onramp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  NetworkParams params;
  OptimizerState optimizer;
  std::int64_t train_step = 0;
  std::uint64_t config_hash = 0;
};

/// Binary layout (little endian): 8-byte magic, u32 version, u64 config hash,
/// i64 training step, i64 optimizer step, u32 tensor count, then per tensor
/// {u32 name length, name, u32 rows, u32 cols}, then the f64 payload
/// (parameters, first moments, second moments) and a u64 FNV-1a checksum of
/// everything before it. Written to a temporary file and renamed.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws CheckpointError on any mismatch or corruption; never returns partial state.
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace onramp
