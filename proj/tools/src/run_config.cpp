#include "dwt_cli/run_config.hpp"

#include <sstream>

#include "dwt/errors.hpp"

namespace dwt::cli {

namespace {

Side parse_side(std::string_view s) {
  if (s == "encoder") return Side::encoder;
  if (s == "decoder") return Side::decoder;
  throw ConfigError("side must be encoder or decoder, got '" + std::string(s) + "'");
}

std::pair<Side, std::size_t> parse_layer_ref(std::string_view key, std::string_view value) {
  const auto colon = value.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError(std::string(key) + " must look like encoder:2, got '" + std::string(value) + "'");
  }
  return {parse_side(value.substr(0, colon)), parse_size(key, value.substr(colon + 1))};
}

Stencil parse_stencil(std::string_view s) {
  if (s == "central2") return Stencil::central2;
  if (s == "central4") return Stencil::central4;
  throw ConfigError("gradcheck_stencil must be central2 or central4, got '" + std::string(s) + "'");
}

std::vector<std::filesystem::path> parse_paths(std::string_view value) {
  std::vector<std::filesystem::path> out;
  std::string item;
  std::istringstream in{std::string(value)};
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

std::string join_paths(const std::vector<std::filesystem::path>& paths) {
  std::string out;
  for (const auto& p : paths) out += (out.empty() ? "" : ",") + p.string();
  return out;
}

bool apply(RunConfig& c, bool& vocab_given, std::string_view key, std::string_view value) {
  if (key == "vocab_size") vocab_given = true;
  if (c.model.set(key, value)) return true;
  const auto size = [&] { return parse_size(key, value); };
  const auto real = [&] { return parse_real(key, value); };
  if (key == "beta1") c.optim.beta1 = real();
  else if (key == "beta2") c.optim.beta2 = real();
  else if (key == "epsilon") c.optim.epsilon = real();
  else if (key == "warmup_steps") c.optim.warmup_steps = size();
  else if (key == "lr_scale") c.optim.lr_scale = real();
  else if (key == "accum_batches") c.optim.accum_batches = size();
  else if (key == "task") c.task.kind = parse_task_kind(value);
  else if (key == "task_vocab") c.task.vocab_size = size();
  else if (key == "min_len") c.task.min_len = size();
  else if (key == "max_len") c.task.max_len = size();
  else if (key == "batch_size") c.task.batch_size = size();
  else if (key == "steps") c.train.steps = size();
  else if (key == "label_smoothing") c.train.label_smoothing = real();
  else if (key == "eval_interval") c.train.eval_interval = size();
  else if (key == "checkpoint_interval") c.train.checkpoint_interval = size();
  else if (key == "val_batches") c.train.val_batches = size();
  else if (key == "stop_at_acc") c.train.stop_at_acc = real();
  else if (key == "seed") c.seed = size();
  else if (key == "out_dir") c.out_dir = std::string(value);
  else if (key == "checkpoint") c.checkpoints = parse_paths(value);
  else if (key == "beam") c.beam = size();
  else if (key == "max_decode_len") c.max_decode_len = size();
  else if (key == "length_norm") c.length_norm = parse_bool(key, value);
  else if (key == "side") c.side = parse_side(value);
  else if (key == "layer_index") c.layer_index = size();
  else if (key == "distill_steps") c.distill_steps = size();
  else if (key == "distill_lr") c.distill_lr = real();
  else if (key == "identity_layer") c.identity_layer = parse_layer_ref(key, value);
  else if (key == "gradcheck_len") c.gradcheck_len = size();
  else if (key == "gradcheck_batch") c.gradcheck_batch = size();
  else if (key == "gradcheck_tol") c.gradcheck_tol = real();
  else if (key == "gradcheck_step") c.gradcheck_step = real();
  else if (key == "gradcheck_stencil") c.gradcheck_stencil = parse_stencil(value);
  else if (key == "gradcheck_fault") c.gradcheck_fault = std::string(value);
  else return false;
  return true;
}

}  // namespace

RunConfig resolve_config(const KeyValues& file_pairs, const KeyValues& overrides) {
  RunConfig c;
  bool vocab_given = false;
  bool variant_given = false;
  for (const auto* pairs : {&file_pairs, &overrides}) {
    for (const auto& [k, v] : *pairs) {
      if (k == "variant") variant_given = true;
      if (!apply(c, vocab_given, k, v)) throw ConfigError("unknown key " + k);
    }
  }
  if (!variant_given) throw ConfigError("missing required key variant");
  if (!vocab_given) c.model.vocab_size = c.task.model_vocab_size();
  c.task.seed = c.seed;
  c.train.seed = c.seed;
  c.train.out_dir = c.out_dir;
  c.model.validate();
  c.optim.validate();
  c.task.validate();
  c.train.validate();
  if (c.model.vocab_size < c.task.model_vocab_size()) {
    throw ConfigError("vocab_size " + std::to_string(c.model.vocab_size) + " is below task_vocab + 3");
  }
  if (c.beam == 0) throw ConfigError("beam must be positive");
  if (c.layer_index && !c.side) throw ConfigError("layer_index requires side");
  if (c.gradcheck_len < 2) throw ConfigError("gradcheck_len must be at least 2");
  if (c.gradcheck_batch == 0) throw ConfigError("gradcheck_batch must be positive");
  if (!(c.gradcheck_step > 0.0)) throw ConfigError("gradcheck_step must be positive");
  return c;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv = model.to_key_values();
  auto put = [&kv](std::string k, std::string v) { kv.emplace_back(std::move(k), std::move(v)); };
  auto size = [](std::size_t v) { return std::to_string(v); };
  put("beta1", format_real(optim.beta1));
  put("beta2", format_real(optim.beta2));
  put("epsilon", format_real(optim.epsilon));
  put("warmup_steps", size(optim.warmup_steps));
  put("lr_scale", format_real(optim.lr_scale));
  put("accum_batches", size(optim.accum_batches));
  put("task", std::string(to_string(task.kind)));
  put("task_vocab", size(task.vocab_size));
  put("min_len", size(task.min_len));
  put("max_len", size(task.max_len));
  put("batch_size", size(task.batch_size));
  put("steps", size(train.steps));
  put("label_smoothing", format_real(train.label_smoothing));
  put("eval_interval", size(train.eval_interval));
  put("checkpoint_interval", size(train.checkpoint_interval));
  put("val_batches", size(train.val_batches));
  put("stop_at_acc", format_real(train.stop_at_acc));
  put("seed", std::to_string(seed));
  put("out_dir", out_dir.string());
  if (!checkpoints.empty()) put("checkpoint", join_paths(checkpoints));
  put("beam", size(beam));
  put("max_decode_len", size(max_decode_len));
  put("length_norm", length_norm ? "true" : "false");
  if (side) put("side", std::string(to_string(*side)));
  if (layer_index) put("layer_index", size(*layer_index));
  put("distill_steps", size(distill_steps));
  put("distill_lr", format_real(distill_lr));
  if (identity_layer) {
    put("identity_layer", std::string(to_string(identity_layer->first)) + ":" + size(identity_layer->second));
  }
  put("gradcheck_len", size(gradcheck_len));
  put("gradcheck_batch", size(gradcheck_batch));
  put("gradcheck_tol", format_real(gradcheck_tol));
  put("gradcheck_step", format_real(gradcheck_step));
  put("gradcheck_stencil", gradcheck_stencil == Stencil::central2 ? "central2" : "central4");
  if (!gradcheck_fault.empty()) put("gradcheck_fault", gradcheck_fault);
  return kv;
}

ProbeConfig probe_config(const RunConfig& config) {
  ProbeConfig pc;
  pc.distill_steps = config.distill_steps;
  pc.distill_lr = config.distill_lr;
  pc.label_smoothing = config.train.label_smoothing;
  return pc;
}

}  // namespace dwt::cli
