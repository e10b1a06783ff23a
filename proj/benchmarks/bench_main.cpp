#include <dbest/bounds.hpp>
#include <dbest/design.hpp>
#include <dbest/linear.hpp>
#include <dbest/moments.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace dbest;

static void BM_ExactMomentsCrd(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto design = crd_design({n / 2, n - n / 2});
  for (auto _ : state) benchmark::DoNotOptimize(exact_moments(design).D.data());
}
BENCHMARK(BM_ExactMomentsCrd)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_McMoments(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto design = crd_design({n / 2, n - n / 2});
  for (auto _ : state) benchmark::DoNotOptimize(mc_moments(design, 10000, 1).D.data());
}
BENCHMARK(BM_McMoments)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_LargestEigenvalue(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Mat D = crd_first_order_matrix(n, n / 2);
  for (auto _ : state) benchmark::DoNotOptimize(largest_eigenvalue(D).value);
}
BENCHMARK(BM_LargestEigenvalue)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_PluginVarbound(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto design = bernoulli_design(n, {0.5, 0.5});
  const auto m = exact_moments(design);
  const auto b = aronow_samii_bound(m);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  Vec y(2 * n);
  for (auto& v : y) v = normal(rng);
  Rng r = make_stream(1, 0);
  const auto d = observe(sample_assignment(design, r), y, Mat(n, 0), m.pi);
  const auto fit = estimate_linear(EstimatorKind::HT, d);
  Vec c(2);
  c << -1, 1;
  const Vec rv = d.r();
  for (auto _ : state) benchmark::DoNotOptimize(plugin_varbound(fit.z_hat, rv, b, c).raw);
}
BENCHMARK(BM_PluginVarbound)->Arg(200)->Arg(1000);

BENCHMARK_MAIN();
