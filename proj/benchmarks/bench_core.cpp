#include <benchmark/benchmark.h>

#include "paco/experiment.hpp"

using namespace paco;

namespace {

PromptSpec bench_prompt() {
  RngStream s(1, 1);
  return random_prompt(s, 4);
}

void BM_Render(benchmark::State& state) {
  PromptSpec p = bench_prompt();
  RngStream s(2, 2);
  int d = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(render(p, 0, 0.01, s, d));
}
BENCHMARK(BM_Render)->Arg(32)->Arg(64)->Arg(256);

void BM_ExtractIdentity(benchmark::State& state) {
  PromptSpec p = bench_prompt();
  RngStream s(2, 2);
  Signal x = render(p, 0, 0.01, s, static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(extract_identity(x));
}
BENCHMARK(BM_ExtractIdentity)->Arg(32)->Arg(256);

void BM_ScorerScore(benchmark::State& state) {
  RngStream s(3, 3);
  PairScorer scorer = init_scorer(s);
  PromptSpec p = bench_prompt();
  Signal a = render(p, 0, 0.01, s, 64);
  Signal b = render(p, 1, 0.01, s, 64);
  for (auto _ : state)
    benchmark::DoNotOptimize(score(scorer, a, b));
}
BENCHMARK(BM_ScorerScore);

void BM_SdeStep(benchmark::State& state) {
  int d = static_cast<int>(state.range(0));
  RngStream s(4, 4);
  Signal x = band_noise(s, d);
  Signal v = band_noise(s, d);
  Signal e = band_noise(s, d);
  Tensor eps = Tensor::vec(e.samples);
  double sigma = noise_scale(0.5, 0.7);
  for (auto _ : state)
    benchmark::DoNotOptimize(sde_step(x, v, 0.5, -0.092, sigma, eps));
}
BENCHMARK(BM_SdeStep)->Arg(32)->Arg(256);

void BM_SampleTrajectory(benchmark::State& state) {
  RngStream init(5, 5);
  FlowModel model = init_flow_model(init);
  Condition cond{bench_prompt(), 0};
  int d = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        sample_trajectory(model, cond, d, 10, {1}, 0.7, RngStream(6, 6)));
}
BENCHMARK(BM_SampleTrajectory)->Arg(32)->Arg(64);

void BM_GrpoEpoch(benchmark::State& state) {
  RngStream init(7, 7);
  FlowModel policy = init_flow_model(init);
  AdamState adam = AdamState::init(policy.params);
  ExperimentConfig cfg;
  cfg.grpo.group_size = 8;
  cfg.grpo.conditions_per_epoch = 4;
  auto channels = make_channels(cfg, nullptr);
  std::vector<Condition> conds;
  RngStream ps(8, 8);
  for (int i = 0; i < 4; ++i) {
    RngStream local = ps.split(i);
    conds.push_back(Condition{random_prompt(local, 4), i % 4});
  }
  ParamSet ref = policy.params;
  int epoch = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(grpo_epoch(policy, adam, conds, channels,
                                        cfg.grpo, ref, RngStream(9, epoch++),
                                        epoch));
}
BENCHMARK(BM_GrpoEpoch);

}  // namespace

BENCHMARK_MAIN();
