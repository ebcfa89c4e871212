#include "dwt_cli/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dwt/checkpoint.hpp"
#include "dwt/decode.hpp"
#include "dwt/errors.hpp"
#include "dwt/grad_check.hpp"

namespace dwt::cli {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw InputError("cannot write " + path.string());
}

void prepare_out_dir(const RunConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  write_text(config.out_dir / "resolved.cfg", format_key_values(config.to_key_values()));
}

Model<float> load_model(const RunConfig& config) {
  if (config.checkpoints.empty()) throw ConfigError("checkpoint: no checkpoint given");
  Model<float> model = build_model<float>(config.model, config.seed);
  apply_checkpoint(average_checkpoints(config.checkpoints), model);
  return model;
}

/// Hypothesis tokens laid out against the gold matrix; missing positions
/// hold -1 so they never match.
Tokens align(const std::vector<Hypothesis>& hyps, const Tokens& gold) {
  Tokens pred(gold.rows, gold.cols, -1);
  for (std::size_t r = 0; r < gold.rows; ++r) {
    const auto& t = hyps[r].tokens;
    for (std::size_t c = 0; c < gold.cols && c < t.size(); ++c) pred.at(r, c) = t[c];
  }
  return pred;
}

}  // namespace

int cmd_train(const RunConfig& config, std::ostream& out) {
  prepare_out_dir(config);
  Model<float> model = build_model<float>(config.model, config.seed);
  if (config.identity_layer) make_identity_layer(model, config.identity_layer->first, config.identity_layer->second);
  const TrainResult r = train(model, config.task, config.optim, config.train);
  out << "steps " << r.steps_run << '\n';
  if (!r.log.rows.empty()) {
    const auto& last = r.log.rows.back();
    out << "val_token_acc " << std::fixed << std::setprecision(6) << last.val_token_acc << '\n';
  }
  if (r.reached_target_at) out << "reached_target_at " << *r.reached_target_at << '\n';
  return kExitOk;
}

int cmd_eval(const RunConfig& config, std::ostream& out) {
  prepare_out_dir(config);
  const Model<float> model = load_model(config);
  const std::vector<Batch> val = validation_batches(config.task, config.train.val_batches);
  const EvalResult tf = evaluate(model, val, config.train.label_smoothing);
  const std::size_t max_len = config.max_decode_len ? config.max_decode_len : config.task.max_len + 1;

  // Pool decoded predictions over all batches before forming the ratios.
  std::vector<std::vector<int>> pred_rows, gold_rows;
  for (const auto& b : val) {
    const Tokens pred = align(beam_decode(model, b.src, config.beam, max_len, config.length_norm), b.tgt_out);
    for (std::size_t r = 0; r < b.tgt_out.rows; ++r) {
      pred_rows.emplace_back(pred.ids.begin() + static_cast<std::ptrdiff_t>(r * pred.cols),
                             pred.ids.begin() + static_cast<std::ptrdiff_t>((r + 1) * pred.cols));
      gold_rows.push_back(unpad_row(b.tgt_out, r));
    }
  }
  const Tokens gold = pack_rows(gold_rows);
  Tokens pred(gold.rows, gold.cols, -1);
  for (std::size_t r = 0; r < gold.rows; ++r) {
    for (std::size_t c = 0; c < gold.cols && c < pred_rows[r].size(); ++c) pred.at(r, c) = pred_rows[r][c];
  }
  const double dec_tok = token_accuracy(pred, gold);
  const double dec_seq = seq_accuracy(pred, gold);

  std::ostringstream csv;
  csv << std::fixed << std::setprecision(6);
  csv << "metric,value\n"
      << "val_loss," << tf.loss << '\n'
      << "val_token_acc," << tf.token_acc << '\n'
      << "decoded_token_acc," << dec_tok << '\n'
      << "decoded_seq_acc," << dec_seq << '\n';
  write_text(config.out_dir / "eval.csv", csv.str());
  out << std::fixed << std::setprecision(6) << "val_token_acc " << tf.token_acc << '\n'
      << "decoded_token_acc " << dec_tok << '\n'
      << "decoded_seq_acc " << dec_seq << '\n';
  return kExitOk;
}

int cmd_distill(const RunConfig& config, std::ostream& out) {
  prepare_out_dir(config);
  Model<float> model = load_model(config);
  const std::vector<Batch> val = validation_batches(config.task, config.train.val_batches);
  std::optional<std::pair<Side, std::size_t>> only;
  if (config.layer_index) only = std::make_pair(*config.side, *config.layer_index);
  const DegradationReport report = degradation_report(model, probe_config(config), config.task, val, only);
  const std::string csv = report.to_csv();
  write_text(config.out_dir / "report.csv", csv);
  out << csv;
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out) {
  ModelConfig mc = config.model;
  mc.dropout = 0.0;
  Model<double> model = build_model<double>(mc, config.seed);
  TaskConfig task = config.task;
  task.batch_size = config.gradcheck_batch;
  task.min_len = std::min<std::size_t>(2, config.gradcheck_len - 1);
  task.max_len = config.gradcheck_len - 1;
  Rng rng(config.seed);
  const Batch batch = gen_batch(task, rng);
  const double eps = config.train.label_smoothing;
  const auto loss_fn = [&] {
    return label_smoothed_ce(forward(model, batch.src, batch.tgt_in, DropoutContext::inference()), batch.tgt_out, eps);
  };

  GradCheckOptions options;
  options.step = config.gradcheck_step;
  options.stencil = config.gradcheck_stencil;
  options.seed = config.seed;
  set_backward_fault(config.gradcheck_fault);
  GradCheckReport report;
  try {
    report = grad_check(loss_fn, model.params.entries(), options);
  } catch (...) {
    set_backward_fault("");
    throw;
  }
  set_backward_fault("");

  out << std::scientific << std::setprecision(3);
  for (const auto& p : report.params) {
    out << p.name << ' ' << p.max_relative_error << " (index " << p.worst_index << ", autodiff " << p.autodiff
        << ", numeric " << p.numeric << ")\n";
  }
  out << "max_relative_error " << report.max_relative_error() << '\n';
  const auto failing = report.failing(config.gradcheck_tol);
  if (!failing.empty()) {
    out << "FAILED";
    for (const auto& name : failing) out << ' ' << name;
    out << '\n';
    return kExitGradCheck;
  }
  out << "OK\n";
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depth-wise LSTM Transformer experiments"};
  app.require_subcommand(1);
  std::string config_path;
  const char* names[] = {"train", "eval", "distill", "gradcheck"};
  for (const char* name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "key = value configuration file")->required();
    sub->allow_extras();
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    KeyValues overrides;
    const auto extras = sub->remaining();
    for (std::size_t i = 0; i < extras.size(); ++i) {
      const std::string& flag = extras[i];
      if (flag.rfind("--", 0) != 0 || i + 1 >= extras.size()) {
        throw ConfigError("expected --key value, got '" + flag + "'");
      }
      overrides.emplace_back(flag.substr(2), extras[++i]);
    }
    std::ifstream f(config_path);
    if (!f) throw ConfigError("config: cannot read " + config_path);
    std::stringstream text;
    text << f.rdbuf();
    const RunConfig config = resolve_config(parse_key_values(text.str()), overrides);

    const std::string name = sub->get_name();
    if (name == "train") return cmd_train(config, out);
    if (name == "eval") return cmd_eval(config, out);
    if (name == "distill") return cmd_distill(config, out);
    return cmd_gradcheck(config, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace dwt::cli
