#include <benchmark/benchmark.h>

#include "emog/config.hpp"
#include "emog/diffusion.hpp"
#include "emog/jcformer.hpp"
#include "emog/metrics.hpp"
#include "emog/ops.hpp"
#include "emog/rng.hpp"

using namespace emog;

namespace {

Tensor noise(const Shape& shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor(shape, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = noise({n, n}, rng), b = noise({n, n}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Attention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor q = noise({4, n, 128}, rng), k = noise({4, n, 128}, rng), v = noise({4, n, 128}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(attention(q, k, v, 8, 0.25));
}
BENCHMARK(BM_Attention)->Arg(34)->Arg(150);

void BM_AttentionBackward(benchmark::State& state) {
  Rng rng(3);
  const Tensor q = noise({4, 34, 128}, rng), k = noise({4, 34, 128}, rng), v = noise({4, 34, 128}, rng);
  for (auto _ : state) {
    Tensor qq(q.shape(), {q.data().begin(), q.data().end()}, true);
    sum(attention(qq, k, v, 8, 0.25)).backward();
    benchmark::DoNotOptimize(qq.grad().data());
  }
}
BENCHMARK(BM_AttentionBackward);

// One reverse-chain step of the toy model on a batch of 34-frame clips.
void BM_DenoiseStep(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const ModelConfig mc = ModelConfig::toy();
  JCFormer model(mc);
  const NoiseSchedule schedule = NoiseSchedule::make(RunConfig::toy().schedule);
  Rng rng(4);
  const Tensor x = noise({batch, 34, mc.channels()}, rng);
  DenoiseInput in;
  in.audio = noise({batch, 34, mc.audio_in_dim}, rng);
  in.speakers.assign(batch, 0);
  in.alpha_bar.assign(batch, schedule.alpha_bar(100));
  const std::vector<std::size_t> t(batch, 100);
  NoGradGuard guard;
  for (auto _ : state) {
    const Tensor eps = model.forward(x, t, in).eps;
    benchmark::DoNotOptimize(reverse_step(x.data(), 100, eps.data(), schedule, VarianceMode::kBeta, rng));
  }
}
BENCHMARK(BM_DenoiseStep)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Fgd(benchmark::State& state) {
  Rng rng(5);
  SampleMatrix a, b;
  std::vector<double> v(32);
  for (int i = 0; i < 400; ++i) {
    for (auto& x : v) x = rng.normal();
    a.append(v);
    for (auto& x : v) x = rng.normal() + 0.1;
    b.append(v);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fgd(a, b));
}
BENCHMARK(BM_Fgd);

}  // namespace

BENCHMARK_MAIN();
