#include "dwt/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dwt/errors.hpp"
#include "dwt/training.hpp"

namespace dwt {

template <typename T>
AffineProbe<T> identity_probe(Side side, std::size_t layer, std::size_t d_model) {
  AffineProbe<T> p;
  p.side = side;
  p.layer = layer;
  p.weight = Tensor<T>::zeros({d_model, d_model}, true);
  auto w = p.weight.mutable_values();
  for (std::size_t i = 0; i < d_model; ++i) w[i * d_model + i] = T(1);
  p.bias = Tensor<T>::zeros({d_model}, true);
  return p;
}

double delta_percent(double baseline, double probed) {
  if (baseline == 0.0) throw InputError("delta_percent: baseline metric is zero");
  return (probed - baseline) / baseline * 100.0;
}

namespace {

std::size_t stack_depth(const ModelConfig& c, Side side) {
  return side == Side::encoder ? c.n_enc_layers : c.n_dec_layers;
}

/// Disables gradients on every model parameter and restores the flags on exit.
template <typename T>
class FreezeGuard {
 public:
  explicit FreezeGuard(ParamStore<T>& store) : store_(store) {
    for (const auto& p : store_.entries()) {
      flags_.push_back(p.tensor.requires_grad());
      Tensor<T> t = p.tensor;
      t.set_requires_grad(false);
      t.zero_grad();
    }
  }
  ~FreezeGuard() {
    for (std::size_t i = 0; i < flags_.size(); ++i) {
      Tensor<T> t = store_.entries()[i].tensor;
      t.set_requires_grad(flags_[i]);
    }
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParamStore<T>& store_;
  std::vector<bool> flags_;
};

}  // namespace

template <typename T>
ProbeResult<T> distill_layer(Model<T>& model, const ProbeConfig& config, const TaskConfig& train_task,
                             const std::vector<Batch>& eval) {
  const std::size_t depth = stack_depth(model.config, config.side);
  if (config.layer == 0 || config.layer > depth) {
    throw ConfigError("layer_index " + std::to_string(config.layer) + " outside 1.." + std::to_string(depth));
  }
  ProbeResult<T> r;
  r.side = config.side;
  r.layer = config.layer;
  r.probe = identity_probe<T>(config.side, config.layer, model.config.d_model);
  r.baseline_metric = evaluate(model, eval, config.label_smoothing).token_acc;

  {
    FreezeGuard<T> freeze(model.params);
    const std::vector<NamedTensor<T>> trainable{{"probe.weight", r.probe.weight}, {"probe.bias", r.probe.bias}};
    OptimHyper hyper;
    AdamState<T> adam;
    TaskStream stream(train_task);
    const auto ctx = DropoutContext::inference();
    for (std::size_t step = 1; step <= config.distill_steps; ++step) {
      const Batch b = stream.next();
      for (auto p : trainable) p.tensor.zero_grad();
      try {
        const Tensor<T> logits = forward(model, b.src, b.tgt_in, ctx, &r.probe);
        const Tensor<T> loss = label_smoothed_ce(logits, b.tgt_out, config.label_smoothing);
        if (!std::isfinite(static_cast<double>(loss.item()))) throw NumericalError("non-finite loss");
        loss.backward();
        adam_step(trainable, adam, hyper, config.distill_lr);
      } catch (const NumericalError& e) {
        throw NumericalError("distillation of " + std::string(to_string(config.side)) + " layer " +
                             std::to_string(config.layer) + " diverged at step " + std::to_string(step) + ": " +
                             e.what());
      }
    }
  }
  r.probe.weight.zero_grad();
  r.probe.bias.zero_grad();
  r.probed_metric = evaluate(model, eval, config.label_smoothing, &r.probe).token_acc;
  r.delta_percent = delta_percent(r.baseline_metric, r.probed_metric);
  return r;
}

std::string DegradationReport::to_csv() const {
  std::ostringstream out;
  out << kHeader << '\n';
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), ",%.6f,%.2f\n", r.metric, r.delta_percent);
    out << r.side << ',' << r.layer << line;
  }
  return out.str();
}

template <typename T>
DegradationReport degradation_report(Model<T>& model, const ProbeConfig& base, const TaskConfig& train_task,
                                     const std::vector<Batch>& eval,
                                     std::optional<std::pair<Side, std::size_t>> only) {
  DegradationReport report;
  report.baseline_metric = evaluate(model, eval, base.label_smoothing).token_acc;
  report.rows.push_back({"all", "none", report.baseline_metric, 0.0});
  for (Side side : {Side::encoder, Side::decoder}) {
    for (std::size_t layer = 1; layer <= stack_depth(model.config, side); ++layer) {
      if (only && (only->first != side || only->second != layer)) continue;
      ProbeConfig pc = base;
      pc.side = side;
      pc.layer = layer;
      const ProbeResult<T> r = distill_layer(model, pc, train_task, eval);
      report.rows.push_back({std::string(to_string(side)), std::to_string(layer), r.probed_metric, r.delta_percent});
    }
  }
  if (only && report.rows.size() != 2) {
    throw ConfigError("layer_index " + std::to_string(only->second) + " outside the " +
                      std::string(to_string(only->first)) + " stack");
  }
  return report;
}

namespace {

template <typename T>
void pin(Tensor<T> t, T value) {
  for (auto& v : t.mutable_values()) v = value;
  t.set_requires_grad(false);
}

template <typename T>
void pin_gate(const Tensor<T>& w, const Tensor<T>& b, const LayerNormParams<T>& ln, T level) {
  pin(w, T(0));
  pin(b, T(0));
  pin(ln.gain, T(0));
  pin(ln.bias, level);
}

template <typename T>
void pin_hidden(const HiddenParams<T>& h) {
  for (const Tensor<T>* t : {&h.w_h, &h.b_h, &h.ln_h.gain, &h.ln_h.bias, &h.w_h1, &h.b_h1, &h.ln_h1.gain,
                             &h.ln_h1.bias, &h.w_h2, &h.b_h2}) {
    if (t->defined()) pin(*t, T(0));
  }
}

}  // namespace

template <typename T>
void make_identity_layer(Model<T>& model, Side side, std::size_t layer) {
  const ModelConfig& c = model.config;
  if (c.variant != Variant::dwlstm) throw ConfigError("identity layer fixture needs the dwlstm variant");
  if (c.sharing != SharingMode::none) throw ConfigError("identity layer fixture needs sharing = none");
  const std::size_t depth = stack_depth(c, side);
  if (layer < 2 || layer > depth) {
    throw ConfigError("identity layer must lie in 2.." + std::to_string(depth));
  }
  // sigmoid(40) rounds to 1 and sigmoid(-40) is below 1e-17.
  const T high(40);
  auto force = [&](const GateParams<T>& g, const HiddenParams<T>& h) {
    pin_gate(g.w_ig, g.b_ig, g.ln_ig, -high);
    pin_gate(g.w_fg, g.b_fg, g.ln_fg, high);
    pin_gate(g.w_og, g.b_og, g.ln_og, high);
    pin_hidden(h);
  };
  if (side == Side::encoder) {
    const auto& prev = model.encoder[layer - 2].gates;
    pin_gate(prev.w_og, prev.b_og, prev.ln_og, high);
    force(model.encoder[layer - 1].gates, model.encoder[layer - 1].hidden);
  } else {
    const auto& prev = model.decoder[layer - 2].gates;
    pin_gate(prev.w_og, prev.b_og, prev.ln_og, high);
    force(model.decoder[layer - 1].gates, model.decoder[layer - 1].hidden);
  }
}

#define DWT_INSTANTIATE_ANALYSIS(T)                                                                         \
  template AffineProbe<T> identity_probe(Side, std::size_t, std::size_t);                                   \
  template ProbeResult<T> distill_layer(Model<T>&, const ProbeConfig&, const TaskConfig&,                   \
                                        const std::vector<Batch>&);                                         \
  template DegradationReport degradation_report(Model<T>&, const ProbeConfig&, const TaskConfig&,           \
                                                const std::vector<Batch>&,                                  \
                                                std::optional<std::pair<Side, std::size_t>>);              \
  template void make_identity_layer(Model<T>&, Side, std::size_t);

DWT_INSTANTIATE_ANALYSIS(float)
DWT_INSTANTIATE_ANALYSIS(double)

}  // namespace dwt
