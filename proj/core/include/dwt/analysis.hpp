#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dwt/model.hpp"
#include "dwt/tasks.hpp"

namespace dwt {

struct ProbeConfig {
  Side side = Side::encoder;
  std::size_t layer = 1;  // 1-based
  std::size_t distill_steps = 2000;
  double distill_lr = 1e-4;
  /// Objective smoothing; the metric itself is unsmoothed token accuracy.
  double label_smoothing = 0.1;
};

template <typename T>
struct ProbeResult {
  Side side = Side::encoder;
  std::size_t layer = 1;
  double baseline_metric = 0.0;
  double probed_metric = 0.0;
  double delta_percent = 0.0;
  AffineProbe<T> probe;
};

/// Identity weight and zero bias for the given layer.
template <typename T>
AffineProbe<T> identity_probe(Side side, std::size_t layer, std::size_t d_model);

double delta_percent(double baseline, double probed);

/// Replaces one layer with an affine map and trains only that map on
/// `train_task` (a fresh stream per call) with Adam at a fixed rate. The model
/// parameters are frozen for the duration and left bit-identical. Metrics are
/// teacher-forced token accuracy on `eval`.
template <typename T>
ProbeResult<T> distill_layer(Model<T>& model, const ProbeConfig& config, const TaskConfig& train_task,
                             const std::vector<Batch>& eval);

struct ReportRow {
  std::string side;
  std::string layer;
  double metric = 0.0;
  double delta_percent = 0.0;
};

struct DegradationReport {
  double baseline_metric = 0.0;
  std::vector<ReportRow> rows;  // baseline row first

  static constexpr const char* kHeader = "side,layer,metric,delta_percent";
  std::string to_csv() const;
};

/// Probes every layer of both stacks, or only `only` when given.
template <typename T>
DegradationReport degradation_report(Model<T>& model, const ProbeConfig& base, const TaskConfig& train_task,
                                     const std::vector<Batch>& eval,
                                     std::optional<std::pair<Side, std::size_t>> only = std::nullopt);

/// Makes dwlstm layer `layer` (1-based, >= 2) of one stack exactly the
/// identity on its output: its gates are pinned to f = 1, i = 0, o = 1, its
/// hidden path is zeroed, and the previous layer's output gate is pinned to
/// 1 so that Output == Cell going in. The pinned tensors stop requiring
/// gradients. Requires sharing = none.
template <typename T>
void make_identity_layer(Model<T>& model, Side side, std::size_t layer);

}  // namespace dwt
