#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dwt/analysis.hpp"
#include "dwt/grad_check.hpp"
#include "dwt/key_values.hpp"
#include "dwt/model.hpp"
#include "dwt/tasks.hpp"
#include "dwt/training.hpp"

namespace dwt::cli {

/// Everything a run needs, parsed from a flat key=value file plus overrides.
struct RunConfig {
  ModelConfig model;
  OptimHyper optim;
  TaskConfig task;
  TrainConfig train;

  // eval
  std::vector<std::filesystem::path> checkpoints;
  std::size_t beam = 4;
  /// 0: the task's longest target (max_len + 1).
  std::size_t max_decode_len = 0;
  bool length_norm = true;

  // distill
  std::optional<Side> side;
  std::optional<std::size_t> layer_index;
  std::size_t distill_steps = 2000;
  double distill_lr = 1e-4;
  /// Pins one dwlstm layer to the identity before training ("encoder:2").
  std::optional<std::pair<Side, std::size_t>> identity_layer;

  // gradcheck
  std::size_t gradcheck_len = 5;
  std::size_t gradcheck_batch = 2;
  double gradcheck_tol = 1e-4;
  double gradcheck_step = 3e-4;
  Stencil gradcheck_stencil = Stencil::central4;
  /// Op whose backward rule is deliberately corrupted; test fixture only.
  std::string gradcheck_fault;

  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "run";

  /// Every key with its resolved value; parsing it back yields this config.
  KeyValues to_key_values() const;
};

/// Applies file pairs and then overrides. Unknown keys and a missing
/// `variant` throw ConfigError naming the key.
RunConfig resolve_config(const KeyValues& file_pairs, const KeyValues& overrides);

ProbeConfig probe_config(const RunConfig& config);

}  // namespace dwt::cli
