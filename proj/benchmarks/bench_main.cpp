/*
 * Copyright 2026 The Empathy-LSTM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "empathy/metrics.hpp"
#include "empathy/model.hpp"
#include "empathy/ops.hpp"
#include "empathy/optim.hpp"
#include "empathy/tensor.hpp"

namespace {

using namespace empathy;

std::vector<double> uniform(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return Tensor(Shape{rows, cols}, uniform(rows * cols, seed));
}

FeatureMap random_features(const ModelConfig& c, std::size_t steps, std::uint64_t seed) {
  FeatureMap f;
  for (Modality m : c.modalities) {
    Matrix x(steps, c.input_dim(m));
    x.data = uniform(x.data.size(), seed++);
    f[m] = std::move(x);
  }
  return f;
}

// Square products plus the LSTM input projection shape [batch x 896] * [896 x 2048].
void BM_Matmul(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Tensor a = random_tensor(m, k, 1);
  const Tensor b = random_tensor(k, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * m * k * n));
}
BENCHMARK(BM_Matmul)->Args({64, 64, 64})->Args({256, 256, 256})->Args({8, 896, 2048})->Args({480, 1290, 128});

void BM_MatmulBackward(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const Tensor a = random_tensor(m, k, 1);
  Tensor b = random_tensor(k, n, 2);
  b.set_requires_grad(true);
  for (auto _ : state) {
    Tape tape;
    tape.backward(ops::sum(ops::matmul(a, b)));
  }
}
BENCHMARK(BM_MatmulBackward)->Args({8, 896, 2048})->Args({256, 256, 256});

ModelConfig bench_config(std::size_t hidden) {
  ModelConfig c = variant_factory("AT");
  c.hidden_dim = hidden;
  c.seed = 3;
  return c;
}

// One recurrent step at batch 8.
void BM_LstmStep(benchmark::State& state) {
  const EmpathyModel model(bench_config(static_cast<std::size_t>(state.range(0))));
  const Tensor fused = random_tensor(8, model.config().fused_dim(), 4);
  const RecurrentState s0 = model.initial_state(8);
  for (auto _ : state) benchmark::DoNotOptimize(model.lstm_step(fused, s0));
}
BENCHMARK(BM_LstmStep)->Arg(128)->Arg(512);

SequenceBatch bench_batch(const ModelConfig& c, std::size_t steps, std::size_t batch,
                          std::vector<FeatureMap>& storage) {
  std::vector<SequenceView> views;
  for (std::size_t b = 0; b < batch; ++b) storage.push_back(random_features(c, steps, 10 * b + 5));
  for (const auto& f : storage) views.push_back({&f, 0, steps});
  return make_batch(views, c.modalities, steps);
}

// Forward over a 60-step batch of 8 segments at full AT widths.
void BM_SequenceForward(benchmark::State& state) {
  const EmpathyModel model(bench_config(static_cast<std::size_t>(state.range(0))));
  std::vector<FeatureMap> storage;
  const SequenceBatch batch = bench_batch(model.config(), 60, 8, storage);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward_raw(batch));
}
BENCHMARK(BM_SequenceForward)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

// Forward, backward and one Adam update: a single training batch.
void BM_SequenceTrainStep(benchmark::State& state) {
  EmpathyModel model(bench_config(static_cast<std::size_t>(state.range(0))));
  std::vector<FeatureMap> storage;
  const SequenceBatch batch = bench_batch(model.config(), 60, 8, storage);
  const Tensor target(Shape{60, 8}, uniform(480, 9));
  Optimizer optimizer(OptimizerOptions{});
  for (auto _ : state) {
    zero_grad(model.parameters());
    {
      Tape tape;
      tape.backward(ops::mse_loss(model.forward_raw(batch), target));
    }
    optimizer.step(model.parameters());
  }
}
BENCHMARK(BM_SequenceTrainStep)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Ccc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = uniform(n, 1);
  const auto y = uniform(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ccc(x, y));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Ccc)->Arg(300)->Arg(30000);

}  // namespace

BENCHMARK_MAIN();
