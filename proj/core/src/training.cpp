#include "dwt/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dwt/checkpoint.hpp"
#include "dwt/errors.hpp"

namespace dwt {

void OptimHyper::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (warmup_steps == 0) throw ConfigError("warmup_steps must be positive");
  if (!(lr_scale > 0.0)) throw ConfigError("lr_scale must be positive");
  if (accum_batches == 0) throw ConfigError("accum_batches must be positive");
}

void TrainConfig::validate() const {
  if (steps == 0) throw ConfigError("steps must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw ConfigError("label_smoothing must lie in [0, 1)");
  }
  if (eval_interval == 0) throw ConfigError("eval_interval must be positive");
  if (val_batches == 0) throw ConfigError("val_batches must be positive");
  if (stop_at_acc < 0.0 || stop_at_acc > 1.0) throw ConfigError("stop_at_acc must lie in [0, 1]");
}

std::size_t count_non_pad(const Tokens& tokens, int pad_id) {
  return static_cast<std::size_t>(std::count_if(tokens.ids.begin(), tokens.ids.end(),
                                                [pad_id](int id) { return id != pad_id; }));
}

template <typename T>
Tensor<T> label_smoothed_ce(const Tensor<T>& logits, const Tokens& targets, double eps, int pad_id,
                            std::optional<double> normalizer) {
  if (!(eps >= 0.0 && eps < 1.0)) throw InputError("label smoothing must lie in [0, 1)");
  if (logits.rank() != 3 || logits.extent(0) != targets.rows || logits.extent(1) != targets.cols) {
    throw InputError("logits " + shape_to_string(logits.shape()) + " do not match targets [" +
                     std::to_string(targets.rows) + ", " + std::to_string(targets.cols) + "]");
  }
  const std::size_t vocab = logits.extent(2);
  if (vocab < 3) throw InputError("label smoothing needs at least three classes");
  const bool pad_in_vocab = pad_id >= 0 && static_cast<std::size_t>(pad_id) < vocab;
  const double off = eps / static_cast<double>(vocab - 2);
  const std::size_t positions = targets.rows * targets.cols;
  const std::size_t counted = count_non_pad(targets, pad_id);
  if (counted == 0) throw InputError("all target positions are padding");
  const double denom = normalizer.value_or(static_cast<double>(counted));

  const auto z = logits.values();
  // Per counted position: softmax probabilities, kept for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(positions * vocab, 0.0);
  double total = 0.0;
  for (std::size_t p = 0; p < positions; ++p) {
    const int gold = targets.ids[p];
    if (gold == pad_id) continue;
    if (gold < 0 || static_cast<std::size_t>(gold) >= vocab) {
      throw InputError("target id " + std::to_string(gold) + " outside vocabulary");
    }
    const T* row = z.data() + p * vocab;
    double mx = -INFINITY;
    for (std::size_t c = 0; c < vocab; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double s = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) s += std::exp(static_cast<double>(row[c]) - mx);
    const double log_z = mx + std::log(s);
    double* pr = probs->data() + p * vocab;
    for (std::size_t c = 0; c < vocab; ++c) {
      const double log_p = static_cast<double>(row[c]) - log_z;
      pr[c] = std::exp(log_p);
      double q = off;
      if (static_cast<int>(c) == gold) q = 1.0 - eps;
      else if (pad_in_vocab && static_cast<int>(c) == pad_id) q = 0.0;
      if (q != 0.0) total -= q * log_p;
    }
  }
  const double loss = total / denom;

  Tokens tgt = targets;
  return make_op_result<T>(
      "label_smoothed_ce", {1}, {static_cast<T>(loss)}, {logits},
      [probs, tgt = std::move(tgt), vocab, eps, off, pad_id, pad_in_vocab, denom](detail::Node<T>& node) {
        auto& in = *node.inputs[0];
        if (!in.requires_grad) return;
        T* g = in.grad_buffer();
        const double up = static_cast<double>(node.grad[0]) / denom;
        for (std::size_t p = 0; p < tgt.ids.size(); ++p) {
          const int gold = tgt.ids[p];
          if (gold == pad_id) continue;
          const double* pr = probs->data() + p * vocab;
          for (std::size_t c = 0; c < vocab; ++c) {
            double q = off;
            if (static_cast<int>(c) == gold) q = 1.0 - eps;
            else if (pad_in_vocab && static_cast<int>(c) == pad_id) q = 0.0;
            // The smoothed target sums to one, so d/dz = p - q.
            g[p * vocab + c] += static_cast<T>(up * (pr[c] - q));
          }
        }
      });
}

double lr_schedule(std::size_t step, std::size_t d_model, std::size_t warmup) {
  if (step == 0) throw InputError("lr_schedule: step must be at least 1");
  if (d_model == 0 || warmup == 0) throw InputError("lr_schedule: d_model and warmup must be positive");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  // step * warmup^-1.5 written as (step / warmup) * warmup^-0.5 so both branches agree bitwise at step == warmup.
  return std::pow(static_cast<double>(d_model), -0.5) * std::min(std::pow(s, -0.5), (s / w) * std::pow(w, -0.5));
}

template <typename T>
void adam_step(const std::vector<NamedTensor<T>>& params, AdamState<T>& state, const OptimHyper& h, double lr) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.size(), 0.0);
      state.v.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw InputError("Adam state does not match the parameter list");
  // Validate every gradient before touching any parameter.
  for (const auto& p : params) {
    if (!p.tensor.requires_grad() || !p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(static_cast<double>(g))) throw NumericalError("non-finite gradient in parameter " + p.name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> p = params[i].tensor;
    if (!p.requires_grad()) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != p.size()) throw InputError("Adam moment shape mismatch for " + params[i].name);
    const bool has = p.has_grad();
    const auto grad = p.grad();
    auto w = p.mutable_values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double g = has ? static_cast<double>(grad[k]) : 0.0;
      m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g;
      v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] = static_cast<T>(static_cast<double>(w[k]) - lr * m_hat / (std::sqrt(v_hat) + h.epsilon));
    }
  }
}

std::string MetricsLog::to_csv() const {
  std::ostringstream out;
  out << kHeader << '\n';
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%zu,%.10f,%.6f,%.6f,%.6f\n", r.step, r.lr, r.train_loss, r.val_loss,
                  r.val_token_acc);
    out << line;
  }
  return out.str();
}

void MetricsLog::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << to_csv();
  if (!out) throw InputError("cannot write " + path.string());
}

template <typename T>
EvalResult evaluate(const Model<T>& model, const std::vector<Batch>& batches, double label_smoothing,
                    const AffineProbe<T>* probe) {
  if (batches.empty()) throw InputError("evaluate: no batches");
  NoGradGuard no_grad;
  const auto ctx = DropoutContext::inference();
  double loss_sum = 0.0;
  std::size_t tokens = 0;
  std::size_t hits = 0;
  for (const auto& b : batches) {
    const Tensor<T> logits = forward(model, b.src, b.tgt_in, ctx, probe);
    const std::size_t n = count_non_pad(b.tgt_out);
    loss_sum += static_cast<double>(label_smoothed_ce(logits, b.tgt_out, label_smoothing, kPadId, 1.0).item());
    tokens += n;
    const std::size_t vocab = logits.extent(2);
    const auto z = logits.values();
    for (std::size_t p = 0; p < b.tgt_out.ids.size(); ++p) {
      const int gold = b.tgt_out.ids[p];
      if (gold == kPadId) continue;
      const T* row = z.data() + p * vocab;
      const auto best = static_cast<int>(std::max_element(row, row + vocab) - row);
      hits += best == gold ? 1 : 0;
    }
  }
  return {loss_sum / static_cast<double>(tokens), static_cast<double>(hits) / static_cast<double>(tokens)};
}

std::vector<Batch> validation_batches(const TaskConfig& task, std::size_t count) {
  TaskConfig v = task;
  v.seed = task.seed + kValidationSeedOffset;
  TaskStream stream(v);
  std::vector<Batch> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(stream.next());
  return out;
}

namespace {

std::string metrics_snapshot(const MetricsRow& r) {
  return format_key_values({{"step", std::to_string(r.step)},
                            {"lr", format_real(r.lr)},
                            {"train_loss", format_real(r.train_loss)},
                            {"val_loss", format_real(r.val_loss)},
                            {"val_token_acc", format_real(r.val_token_acc)}});
}

}  // namespace

template <typename T>
TrainResult train(Model<T>& model, const TaskConfig& task, const OptimHyper& hyper, const TrainConfig& config) {
  task.validate();
  hyper.validate();
  config.validate();
  model.config.validate();
  if (task.model_vocab_size() > model.config.vocab_size) {
    throw ConfigError("vocab_size " + std::to_string(model.config.vocab_size) + " is smaller than the task needs (" +
                      std::to_string(task.model_vocab_size()) + ")");
  }
  if (task.batch_size % hyper.accum_batches != 0) {
    throw ConfigError("accum_batches must divide batch_size");
  }
  if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

  TaskConfig train_task = task;
  train_task.seed = config.seed;
  TaskStream stream(train_task);
  const std::vector<Batch> val = validation_batches(train_task, config.val_batches);
  Rng dropout_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  const DropoutContext ctx{model.config.dropout, true, &dropout_rng};

  TrainResult result;
  AdamState<T> adam;
  const std::size_t micro = task.batch_size / hyper.accum_batches;
  double window_loss = 0.0;
  std::size_t window_steps = 0;

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const Batch batch = stream.next();
    const double tokens = static_cast<double>(count_non_pad(batch.tgt_out));
    model.params.zero_grad();
    double step_loss = 0.0;
    double lr = 0.0;
    try {
      for (std::size_t k = 0; k < hyper.accum_batches; ++k) {
        const Batch part = slice_batch(batch, k * micro, (k + 1) * micro);
        const Tensor<T> logits = forward(model, part.src, part.tgt_in, ctx);
        const Tensor<T> loss = label_smoothed_ce(logits, part.tgt_out, config.label_smoothing, kPadId, tokens);
        const double value = static_cast<double>(loss.item());
        if (!std::isfinite(value)) throw NumericalError("non-finite loss");
        step_loss += value;
        loss.backward();
      }
      lr = lr_schedule(step, model.config.d_model, hyper.warmup_steps) * hyper.lr_scale;
      adam_step(model.params.entries(), adam, hyper, lr);
    } catch (const NumericalError& e) {
      throw NumericalError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    result.step_losses.push_back(step_loss);
    result.steps_run = step;
    window_loss += step_loss;
    ++window_steps;

    const bool last = step == config.steps;
    if (step % config.eval_interval == 0 || last) {
      const EvalResult ev = evaluate(model, val, config.label_smoothing);
      MetricsRow row{step, lr, window_loss / static_cast<double>(window_steps), ev.loss, ev.token_acc};
      result.log.rows.push_back(row);
      window_loss = 0.0;
      window_steps = 0;
      const bool reached = config.stop_at_acc > 0.0 && ev.token_acc >= config.stop_at_acc;
      if (!config.out_dir.empty()) {
        result.log.write(config.out_dir / "metrics.csv");
        const bool scheduled = config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0;
        if (scheduled || reached || last) {
          const auto path = config.out_dir / ("checkpoint_" + std::to_string(step) + ".bin");
          save_checkpoint(make_checkpoint(model, step, metrics_snapshot(row)), path);
          result.checkpoints.push_back(path);
        }
      }
      if (reached) {
        result.reached_target_at = step;
        break;
      }
    } else if (!config.out_dir.empty() && config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0) {
      const auto path = config.out_dir / ("checkpoint_" + std::to_string(step) + ".bin");
      const MetricsRow row{step, lr, window_loss / static_cast<double>(window_steps), 0.0, 0.0};
      save_checkpoint(make_checkpoint(model, step, metrics_snapshot(row)), path);
      result.checkpoints.push_back(path);
    }
  }
  if (!config.out_dir.empty()) result.log.write(config.out_dir / "metrics.csv");
  return result;
}

#define DWT_INSTANTIATE_TRAINING(T)                                                                     \
  template Tensor<T> label_smoothed_ce(const Tensor<T>&, const Tokens&, double, int, std::optional<double>); \
  template void adam_step(const std::vector<NamedTensor<T>>&, AdamState<T>&, const OptimHyper&, double);   \
  template EvalResult evaluate(const Model<T>&, const std::vector<Batch>&, double, const AffineProbe<T>*);  \
  template TrainResult train(Model<T>&, const TaskConfig&, const OptimHyper&, const TrainConfig&);

DWT_INSTANTIATE_TRAINING(float)
DWT_INSTANTIATE_TRAINING(double)

}  // namespace dwt
