#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dwt/model.hpp"

namespace dwt {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;

  bool operator==(const CheckpointEntry&) const = default;
};

/// On disk: "DWTC", u32 version, then length-prefixed config text, u64 step,
/// length-prefixed metrics text, u32 entry count and per entry the name,
/// u32 rank, u64 extents and the row-major float32 payload. Integers and
/// floats are little-endian. Aliased parameters appear once.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig config;
  std::uint64_t step = 0;
  std::string metrics;
  std::vector<CheckpointEntry> entries;

  bool operator==(const Checkpoint&) const = default;
};

template <typename T>
Checkpoint make_checkpoint(const Model<T>& model, std::uint64_t step, std::string metrics = {});

/// Copies checkpoint values into the model; throws InputError on a config or
/// schema mismatch.
template <typename T>
void apply_checkpoint(const Checkpoint& checkpoint, Model<T>& model);

template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& checkpoint);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Elementwise mean per parameter; step and metrics come from the last input.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& checkpoints);
Checkpoint average_checkpoints(const std::vector<std::filesystem::path>& paths);

}  // namespace dwt
