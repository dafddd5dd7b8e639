#include <random>

#include <benchmark/benchmark.h>

#include "histocell/objective.hpp"
#include "histocell/regressor.hpp"
#include "histocell/spatial.hpp"
#include "histocell/synthetic.hpp"

using namespace histocell;

namespace {

Matrix uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

std::vector<std::size_t> dims(std::size_t in, std::size_t width, std::size_t out) {
  std::vector<std::size_t> d{in};
  d.insert(d.end(), kHiddenLayers, width);
  d.push_back(out);
  return d;
}

void BM_Forward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto model = init_model(dims(1536, width, 12), 1);
  const Matrix x = uniform(rng, 256, 1536, -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, x));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_TrainBatch(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  const auto model = init_model(dims(1536, width, 12), 2);
  const Matrix x = uniform(rng, 256, 1536, -1, 1);
  const Matrix y = uniform(rng, 256, 12, 0, 2);
  Gradients g;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(model, x, y, LossWeights{}, g).total);
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_TrainBatch)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_CompositeLoss(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Matrix p = uniform(rng, 256, 12, 0, 2);
  const Matrix t = uniform(rng, 256, 12, 0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(composite_loss(p, t, LossWeights{}).total);
}
BENCHMARK(BM_CompositeLoss);

void BM_MoransR(benchmark::State& state) {
  const auto n = state.range(0);
  std::mt19937_64 rng(4);
  const auto w = rbf_weights(uniform(rng, n, 2, 0, 1000), 150.0);
  const Eigen::VectorXd x = uniform(rng, n, 1, 0, 1);
  const Eigen::VectorXd y = uniform(rng, n, 1, 0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(morans_r(x, y, w));
}
BENCHMARK(BM_MoransR)->Arg(500)->Arg(2000);

void BM_ColocalizationMatrix(benchmark::State& state) {
  const auto n = state.range(0);
  std::mt19937_64 rng(5);
  AbundanceMatrix ab;
  for (Eigen::Index i = 0; i < n; ++i) ab.spot_ids.push_back("s" + std::to_string(i));
  for (int c = 0; c < 12; ++c) ab.cell_types.push_back("t" + std::to_string(c));
  ab.values = uniform(rng, n, 12, 0, 1);
  const Matrix coords = uniform(rng, n, 2, 0, 1000);
  for (auto _ : state) benchmark::DoNotOptimize(colocalization_matrix(ab, coords, 150.0).r);
}
BENCHMARK(BM_ColocalizationMatrix)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
