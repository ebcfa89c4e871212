#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "dwt/rng.hpp"
#include "dwt/tokens.hpp"

namespace dwt {

enum class TaskKind { copy, reverse, sort };

std::string_view to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view s);

/// Synthetic sequence-to-sequence task. Payload ids are drawn uniformly from
/// [3, 3 + vocab_size); ids 0, 1, 2 are pad, bos and eos.
struct TaskConfig {
  TaskKind kind = TaskKind::copy;
  std::size_t vocab_size = 16;
  std::size_t min_len = 5;
  std::size_t max_len = 20;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;

  void validate() const;
  /// Model vocabulary: payload ids plus the reserved ones.
  std::size_t model_vocab_size() const { return vocab_size + kFirstPayloadId; }
};

/// Offset separating the validation stream's seed from the training seed.
inline constexpr std::uint64_t kValidationSeedOffset = 1000003;

struct Batch {
  Tokens src;      // payload + eos
  Tokens tgt_in;   // bos + target payload
  Tokens tgt_out;  // target payload + eos
};

/// Ground-truth transform applied to a source payload.
std::vector<int> task_target(TaskKind kind, std::vector<int> payload);

Batch gen_batch(const TaskConfig& config, Rng& rng);

/// Builds a batch from explicit source payloads.
Batch make_batch(TaskKind kind, const std::vector<std::vector<int>>& payloads);

/// Rows [begin, end) of a batch, re-padded to their own extents.
Batch slice_batch(const Batch& batch, std::size_t begin, std::size_t end);

/// Owned, seeded batch stream.
class TaskStream {
 public:
  explicit TaskStream(const TaskConfig& config) : config_(config), rng_(config.seed) { config_.validate(); }
  Batch next() { return gen_batch(config_, rng_); }
  const TaskConfig& config() const { return config_; }

 private:
  TaskConfig config_;
  Rng rng_;
};

/// Matches over non-pad gold positions divided by their count.
double token_accuracy(const Tokens& pred, const Tokens& gold, int pad_id = kPadId);

/// Fraction of rows whose non-pad gold positions all match.
double seq_accuracy(const Tokens& pred, const Tokens& gold, int pad_id = kPadId);

/// One line per row: space-separated source ids, a tab, target ids
/// (bos ... eos), without padding.
void export_batch(const Batch& batch, std::ostream& out);

}  // namespace dwt
