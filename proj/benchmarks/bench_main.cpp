#include <malloc.h>

#include <benchmark/benchmark.h>

#include <filesystem>

#include "dwt/attention.hpp"
#include "dwt/checkpoint.hpp"
#include "dwt/decode.hpp"
#include "dwt/dwlstm.hpp"
#include "dwt/training.hpp"

namespace {

using namespace dwt;

Tensor<float> random_input(Rng& rng, Shape shape, bool requires_grad = false) {
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return Tensor<float>(std::move(shape), std::move(v), requires_grad);
}

ModelConfig bench_config(Variant variant, std::size_t layers) {
  ModelConfig c;
  c.variant = variant;
  c.n_enc_layers = layers;
  c.n_dec_layers = layers;
  c.d_model = 64;
  c.d_ff = 128;
  c.heads = 4;
  c.vocab_size = 19;
  c.dropout = 0.0;
  return c;
}

TaskConfig bench_task() {
  TaskConfig t;
  t.kind = TaskKind::sort;
  t.min_len = 5;
  t.max_len = 20;
  t.batch_size = 64;
  return t;
}

// Args: sequence length.
void BM_AttentionForwardBackward(benchmark::State& state) {
  const std::size_t len = static_cast<std::size_t>(state.range(0));
  ParamStore<float> store;
  Rng rng(1);
  ParamFactory<float> f(store, rng);
  const auto params = make_attention_params(f, "attn", 64, 4);
  for (const auto& e : store.entries()) {
    Tensor<float> t = e.tensor;
    t.set_requires_grad(true);
  }
  const auto x = random_input(rng, {16, len, 64}, true);
  for (auto _ : state) {
    const auto y = multi_head_attention(x, x, x, static_cast<const AttentionMask<float>*>(nullptr), params);
    sum(y).backward();
    benchmark::DoNotOptimize(x.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(16 * len));
}
BENCHMARK(BM_AttentionForwardBackward)->Arg(8)->Arg(32)->Unit(benchmark::kMicrosecond);

// Args: hidden variant (0 single, 1 ffn2).
void BM_DepthStep(benchmark::State& state) {
  const auto variant = state.range(0) ? HiddenVariant::ffn2 : HiddenVariant::single;
  ParamStore<float> store;
  Rng rng(2);
  ParamFactory<float> f(store, rng);
  const auto gates = make_gate_params(f, "g", 64, 1.0);
  const auto hidden = make_hidden_params(f, "h", variant, 64, 128);
  const auto input = random_input(rng, {16, 20, 64});
  const auto prev = init_state(random_input(rng, {16, 20, 64}));
  for (auto _ : state) {
    const auto next = dwlstm_step(input, prev, gates, hidden);
    benchmark::DoNotOptimize(next.output.values().data());
  }
}
BENCHMARK(BM_DepthStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

// Args: variant (0 residual, 1 dwlstm), layers per stack.
void BM_TrainStep(benchmark::State& state) {
  const auto variant = state.range(0) ? Variant::dwlstm : Variant::residual;
  auto model = build_model<float>(bench_config(variant, static_cast<std::size_t>(state.range(1))), 1);
  TaskStream stream(bench_task());
  const Batch batch = stream.next();
  AdamState<float> adam;
  const OptimHyper hyper;
  for (auto _ : state) {
    model.params.zero_grad();
    const auto loss = label_smoothed_ce(forward(model, batch.src, batch.tgt_in, DropoutContext::inference()),
                                        batch.tgt_out, 0.1);
    loss.backward();
    adam_step(model.params.entries(), adam, hyper, 1e-4);
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_TrainStep)->Args({0, 6})->Args({1, 6})->Args({1, 12})->Unit(benchmark::kMillisecond);

// Args: beam width (0 uses greedy decoding).
void BM_Decode(benchmark::State& state) {
  const auto model = build_model<float>(bench_config(Variant::dwlstm, 2), 1);
  TaskConfig task = bench_task();
  task.batch_size = 8;
  const Batch batch = TaskStream(task).next();
  const std::size_t beam = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    if (beam == 0) {
      benchmark::DoNotOptimize(greedy_decode(model, batch.src, 21));
    } else {
      benchmark::DoNotOptimize(beam_decode(model, batch.src, beam, 21));
    }
  }
}
BENCHMARK(BM_Decode)->Arg(0)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_CheckpointRoundTrip(benchmark::State& state) {
  const auto model = build_model<float>(bench_config(Variant::dwlstm, 6), 1);
  const auto path = std::filesystem::temp_directory_path() / "dwt_bench_checkpoint.bin";
  for (auto _ : state) {
    save_checkpoint(make_checkpoint(model, 1), path);
    benchmark::DoNotOptimize(load_checkpoint(path));
  }
  std::filesystem::remove(path);
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(model.parameter_count() * sizeof(float)));
}
BENCHMARK(BM_CheckpointRoundTrip)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
