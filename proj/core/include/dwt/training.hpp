#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dwt/model.hpp"
#include "dwt/tasks.hpp"

namespace dwt {

struct OptimHyper {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  std::size_t warmup_steps = 4000;
  /// Multiplier on the scheduled rate.
  double lr_scale = 1.0;
  std::size_t accum_batches = 1;

  void validate() const;
};

/// Cross-entropy against the label-smoothed target: 1 - eps on the gold class,
/// eps / (V - 2) on every other class except pad, 0 on pad. Positions whose
/// target is pad are skipped. The summed loss is divided by `normalizer`, or
/// by the number of counted positions when it is absent.
template <typename T>
Tensor<T> label_smoothed_ce(const Tensor<T>& logits, const Tokens& targets, double eps,
                            int pad_id = kPadId, std::optional<double> normalizer = std::nullopt);

std::size_t count_non_pad(const Tokens& tokens, int pad_id = kPadId);

/// d^-0.5 * min(step^-0.5, step * warmup^-1.5); exactly continuous at step == warmup.
double lr_schedule(std::size_t step, std::size_t d_model, std::size_t warmup);

template <typename T>
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of every parameter that requires a gradient.
/// A missing gradient counts as zero. Throws NumericalError naming the
/// parameter when a gradient is not finite.
template <typename T>
void adam_step(const std::vector<NamedTensor<T>>& params, AdamState<T>& state, const OptimHyper& h,
               double lr);

struct MetricsRow {
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_token_acc = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;

  static constexpr const char* kHeader = "step,lr,train_loss,val_loss,val_token_acc";
  std::string to_csv() const;
  void write(const std::filesystem::path& path) const;
};

struct EvalResult {
  double loss = 0.0;       // label-smoothed loss per non-pad target position
  double token_acc = 0.0;  // teacher-forced argmax accuracy
};

/// Teacher-forced evaluation with dropout off.
template <typename T>
EvalResult evaluate(const Model<T>& model, const std::vector<Batch>& batches, double label_smoothing,
                    const AffineProbe<T>* probe = nullptr);

/// Validation batches drawn from the stream seeded at task.seed + kValidationSeedOffset.
std::vector<Batch> validation_batches(const TaskConfig& task, std::size_t count);

struct TrainConfig {
  std::size_t steps = 1000;
  double label_smoothing = 0.1;
  std::size_t eval_interval = 500;
  /// 0 disables checkpoint files.
  std::size_t checkpoint_interval = 500;
  std::size_t val_batches = 4;
  /// Stop after the first validation event at or above this accuracy; 0 disables.
  double stop_at_acc = 0.0;
  std::uint64_t seed = 1;
  /// Empty: nothing is written to disk.
  std::filesystem::path out_dir;

  void validate() const;
};

struct TrainResult {
  MetricsLog log;
  std::vector<double> step_losses;
  std::size_t steps_run = 0;
  std::optional<std::size_t> reached_target_at;
  std::vector<std::filesystem::path> checkpoints;
};

/// Runs the optimisation loop. Each step draws one batch, splits it into
/// `accum_batches` micro-batches whose losses are normalised by the full
/// batch's target count, and applies one scheduled Adam update. A non-finite
/// loss or gradient throws NumericalError carrying the step number.
template <typename T>
TrainResult train(Model<T>& model, const TaskConfig& task, const OptimHyper& hyper,
                  const TrainConfig& config);

}  // namespace dwt
