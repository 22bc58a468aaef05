#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fuzzyjoin/ann_index.hpp"
#include "fuzzyjoin/encoder.hpp"
#include "fuzzyjoin/losses.hpp"
#include "fuzzyjoin/name_encoding.hpp"

using namespace fuzzyjoin;

namespace {

std::vector<IndexedVector> random_items(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<IndexedVector> items(n);
  for (std::size_t i = 0; i < n; ++i) {
    items[i].id = i;
    items[i].values.resize(dim);
    for (float& x : items[i].values) x = u(rng);
  }
  return items;
}

NameEncoding random_encoding(std::size_t dim, std::size_t tokens, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  NameEncoding enc;
  enc.dim = dim;
  enc.max_tokens = kDefaultMaxTokens;
  enc.valid_len = tokens;
  enc.matrix.assign(enc.max_tokens * dim, 0.0);
  for (std::size_t i = 0; i < tokens * dim; ++i) enc.matrix[i] = u(rng);
  return enc;
}

void BM_BuildForest(benchmark::State& state) {
  const auto items = random_items(static_cast<std::size_t>(state.range(0)), 32, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_forest(items, kDefaultTrees, kDefaultLeafSize, 1));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildForest)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Query(benchmark::State& state) {
  const auto items = random_items(static_cast<std::size_t>(state.range(0)), 32, 2);
  const auto forest = build_forest(items, kDefaultTrees, kDefaultLeafSize, 2);
  const auto queries = random_items(256, 32, 3);
  QueryConfig cfg;
  cfg.k = 10;
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& q = queries[i++ % queries.size()].values;
    benchmark::DoNotOptimize(forest.query(std::span<const float>(q), cfg));
  }
}
BENCHMARK(BM_Query)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_BruteForce(benchmark::State& state) {
  const auto items = random_items(static_cast<std::size_t>(state.range(0)), 32, 2);
  const auto queries = random_items(256, 32, 3);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& q = queries[i++ % queries.size()].values;
    benchmark::DoNotOptimize(brute_force_knn(items, q, 10));
  }
}
BENCHMARK(BM_BruteForce)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_EncoderForward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const std::vector<std::size_t> layers{hidden, hidden};
  const auto params = init_params(layers, 32, 1);
  const auto enc = random_encoding(32, 4, 1);
  for (auto _ : state) benchmark::DoNotOptimize(encode(enc, params));
}
BENCHMARK(BM_EncoderForward)->Arg(32)->Arg(128);

void BM_EncoderBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const std::vector<std::size_t> layers{hidden, hidden};
  const auto params = init_params(layers, 32, 1);
  const auto enc = random_encoding(32, 4, 1);
  const auto fwd = encoder_forward(enc, params);
  const std::vector<double> seed(hidden, 1.0);
  auto grads = params.zeros_like();
  for (auto _ : state) {
    encoder_backward(fwd.tape, seed, params, grads);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_EncoderBackward)->Arg(32)->Arg(128);

void BM_LossGradients(benchmark::State& state) {
  const auto kind = static_cast<LossKind>(state.range(0));
  const auto params = LossParams::defaults(kind);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> a(32), p(32), n(32);
  for (auto* v : {&a, &p, &n}) {
    for (double& x : *v) x = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradients({a, p, n}, params));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_LossGradients)->DenseRange(0, 3);

}  // namespace

BENCHMARK_MAIN();
