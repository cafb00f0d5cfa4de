// Copyright 2026 The unitlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Serial reference kernels against their OpenMP counterparts. Run with
// OMP_NUM_THREADS or --workers-style settings to compare thread counts.

#include <benchmark/benchmark.h>

#include <vector>

#include "unitlm/kernels.hpp"
#include "unitlm/rng.hpp"

namespace {

using namespace unitlm;

std::vector<float> Random(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.Normal(0.0, 1.0));
  return v;
}

template <bool kSerial>
void BM_MatMulNT(benchmark::State& state) {
  const int m = int(state.range(0)), n = m, k = m;
  const auto a = Random(std::size_t(m) * k, 1), b = Random(std::size_t(n) * k, 2);
  std::vector<float> c(std::size_t(m) * n);
  for (auto _ : state) {
    if constexpr (kSerial) {
      kernels::serial::MatMulNT<float>(a, b, c, m, n, k, false);
    } else {
      kernels::MatMulNT<float>(a, b, c, m, n, k, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2LL * m * n * k);
}

template <bool kSerial>
void BM_CausalAttention(benchmark::State& state) {
  const int len = int(state.range(0)), heads = 4, head_dim = 16, width = heads * head_dim;
  const auto q = Random(std::size_t(len) * width, 3), k = Random(std::size_t(len) * width, 4),
             v = Random(std::size_t(len) * width, 5);
  std::vector<float> probs(std::size_t(heads) * len * len), out(std::size_t(len) * width);
  for (auto _ : state) {
    if constexpr (kSerial) {
      kernels::serial::CausalAttention<float>(q, k, v, probs, out, len, heads, head_dim);
    } else {
      kernels::CausalAttention<float>(q, k, v, probs, out, len, heads, head_dim);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool kSerial>
void BM_SquaredDistances(benchmark::State& state) {
  const int n = int(state.range(0)), k = 100, dim = 40;
  const auto p = Random(std::size_t(n) * dim, 6), c = Random(std::size_t(k) * dim, 7);
  std::vector<double> out(std::size_t(n) * k);
  for (auto _ : state) {
    if constexpr (kSerial) {
      kernels::serial::SquaredDistances(p, c, out, n, k, dim);
    } else {
      kernels::SquaredDistances(p, c, out, n, k, dim);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

BENCHMARK(BM_MatMulNT<true>)->Name("MatMulNT/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_MatMulNT<false>)->Name("MatMulNT/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_CausalAttention<true>)->Name("CausalAttention/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_CausalAttention<false>)->Name("CausalAttention/parallel")->Arg(128)->Arg(512);
BENCHMARK(BM_SquaredDistances<true>)->Name("SquaredDistances/serial")->Arg(4096);
BENCHMARK(BM_SquaredDistances<false>)->Name("SquaredDistances/parallel")->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
