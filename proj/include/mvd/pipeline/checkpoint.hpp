#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mvd/ndgrad/nn.hpp"

namespace mvd::pipeline {

inline constexpr char kCheckpointMagic[8] = {'M', 'V', 'D', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all integers little-endian:
///   8-byte magic "MVDCKPT\0", u32 version,
///   string module, string config hash, string RNG state, u64 tensor count,
///   then per tensor: string name, u32 rank, rank x u64 extents, f64 values (row-major).
/// Strings are a u64 byte count followed by the bytes.
struct Checkpoint {
  std::string module;
  std::string config_hash;
  std::string rng_state;
  std::vector<std::pair<std::string, ndgrad::Matrix>> tensors;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Refuses a bad magic, another version, truncation or trailing bytes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of named tensors' current values.
std::vector<std::pair<std::string, ndgrad::Matrix>> snapshot(const ndgrad::NamedTensors& tensors);
/// Copies checkpoint values into `target` in place; names, order and shapes must match.
void restore(const ndgrad::NamedTensors& target, const std::vector<std::pair<std::string, ndgrad::Matrix>>& values);

}  // namespace mvd::pipeline
