#include <benchmark/benchmark.h>

#include "ganscope/encoders.hpp"
#include "ganscope/generator.hpp"
#include "ganscope/inversion.hpp"
#include "ganscope/ops.hpp"
#include "ganscope/scene.hpp"
#include "ganscope/seg_stats.hpp"

namespace {

using namespace ganscope;

Tensor filled(Shape s, std::uint64_t seed) {
  Tensor t(std::move(s));
  Rng rng(seed);
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Tensor x = filled({n, 16, 16, 16}, 1), k = filled({32, 16, 4, 4}, 2);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var y = ad::conv2d(tape.param(x), tape.param(k), {2, 1});
    tape.backward(ad::sum(y));
    benchmark::DoNotOptimize(k.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(1)->Arg(16);

void BM_ConvTranspose2dForwardBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Tensor x = filled({n, 32, 8, 8}, 3), k = filled({32, 16, 4, 4}, 4);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var y = ad::conv_transpose2d(tape.param(x), tape.param(k), {2, 1});
    tape.backward(ad::sum(y));
    benchmark::DoNotOptimize(k.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ConvTranspose2dForwardBackward)->Arg(1)->Arg(16);

void BM_GeneratorForward(benchmark::State& state) {
  gen::Generator g = gen::Generator::standard();
  g.init(1);
  const Tensor z = gen::sample_latents(static_cast<int>(state.range(0)), g.latent_dim(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(g.forward(z).data().data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GeneratorForward)->Arg(1)->Arg(64);

// Method (b) is one forward pass of the direct encoder per image.
void BM_DirectEncoderPerImage(benchmark::State& state) {
  gen::Generator g = gen::Generator::standard();
  g.init(1);
  nn::Sequential e = enc::make_inverter(g, 0, g.depth());
  Rng rng(3);
  e.init(rng);
  const inv::Models models{&g, nullptr, &e};
  const Tensor x = g.forward(gen::sample_latents(1, g.latent_dim(), 4));
  const inv::InversionConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(inv::invert(inv::Method::kB, x, models, cfg));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DirectEncoderPerImage)->Unit(benchmark::kMicrosecond);

void BM_LayerwiseInversionStep(benchmark::State& state) {
  gen::Generator g = gen::Generator::standard();
  g.init(1);
  const int n = static_cast<int>(state.range(0));
  const Tensor z = gen::sample_latents(n, g.latent_dim(), 5);
  const Tensor x = g.forward(gen::sample_latents(n, g.latent_dim(), 6));
  inv::InversionConfig cfg;
  cfg.steps = 10;
  for (auto _ : state) benchmark::DoNotOptimize(inv::invert_layerwise(g, z, x, cfg));
  state.SetItemsProcessed(state.iterations() * n * cfg.steps);
}
BENCHMARK(BM_LayerwiseInversionStep)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_RenderAndSegment(benchmark::State& state) {
  const scene::Inventory inv = scene::Inventory::standard();
  std::uint64_t k = 0;
  for (auto _ : state) {
    const scene::SceneSpec s = scene::sample_scene(k++, inv);
    benchmark::DoNotOptimize(scene::segment_image(scene::render(s, inv), inv));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RenderAndSegment);

void BM_Fsd(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(7);
  stats::SegStatsRecord a, b;
  for (stats::SegStatsRecord* r : {&a, &b}) {
    std::vector<double> f(static_cast<std::size_t>(n) * n);
    for (double& v : f) v = rng.normal();
    r->cov = stats::Matrix(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int q = 0; q < n; ++q) r->cov(i, j) += f[q * n + i] * f[q * n + j];
    r->mean.assign(n, 1.0);
    for (int i = 0; i < n; ++i) r->class_ids.push_back(i);
    r->n = 100;
  }
  for (auto _ : state) benchmark::DoNotOptimize(stats::fsd(a, b));
}
BENCHMARK(BM_Fsd)->Arg(9)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
