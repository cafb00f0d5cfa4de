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

#include <gtest/gtest.h>

#include <cstring>
#include <vector>

#include "unitlm/kernels.hpp"
#include "unitlm/rng.hpp"

namespace unitlm {
namespace {

template <typename T>
std::vector<T> Random(Rng& rng, std::size_t n) {
  std::vector<T> v(n);
  for (auto& x : v) x = T(rng.Normal(0.0, 1.0));
  return v;
}

template <typename T>
bool BitEqual(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

class WorkerCounts : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = kernels::WorkerCount();
    kernels::SetWorkerCount(GetParam());
  }
  void TearDown() override { kernels::SetWorkerCount(saved_); }
  int saved_ = 1;
};

TEST_P(WorkerCounts, MatMulsMatchSerialBitForBit) {
  Rng rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const int m = 1 + int(rng.Below(37)), n = 1 + int(rng.Below(29)), k = 1 + int(rng.Below(41));
    for (bool acc : {false, true}) {
      const auto a = Random<float>(rng, std::size_t(m) * k);
      const auto b_nt = Random<float>(rng, std::size_t(n) * k);
      const auto b_nn = Random<float>(rng, std::size_t(k) * n);
      const auto a_tn = Random<float>(rng, std::size_t(k) * m);
      const auto init = Random<float>(rng, std::size_t(m) * n);

      auto c1 = init, c2 = init;
      kernels::MatMulNT<float>(a, b_nt, c1, m, n, k, acc);
      kernels::serial::MatMulNT<float>(a, b_nt, c2, m, n, k, acc);
      EXPECT_TRUE(BitEqual(c1, c2)) << "NT " << m << "x" << n << "x" << k;

      c1 = init, c2 = init;
      kernels::MatMulNN<float>(a, b_nn, c1, m, n, k, acc);
      kernels::serial::MatMulNN<float>(a, b_nn, c2, m, n, k, acc);
      EXPECT_TRUE(BitEqual(c1, c2)) << "NN " << m << "x" << n << "x" << k;

      c1 = init, c2 = init;
      kernels::MatMulTN<float>(a_tn, b_nn, c1, m, n, k, acc);
      kernels::serial::MatMulTN<float>(a_tn, b_nn, c2, m, n, k, acc);
      EXPECT_TRUE(BitEqual(c1, c2)) << "TN " << m << "x" << n << "x" << k;
    }
  }
}

TEST_P(WorkerCounts, AttentionMatchesSerialBitForBit) {
  Rng rng(12);
  for (int len : {1, 5, 17}) {
    const int heads = 3, hd = 4, d = heads * hd;
    const auto q = Random<double>(rng, std::size_t(len) * d);
    const auto k = Random<double>(rng, std::size_t(len) * d);
    const auto v = Random<double>(rng, std::size_t(len) * d);
    const auto d_out = Random<double>(rng, std::size_t(len) * d);
    const std::size_t pn = std::size_t(heads) * len * len;
    std::vector<double> p1(pn), p2(pn), o1(q.size()), o2(q.size());
    kernels::CausalAttention<double>(q, k, v, p1, o1, len, heads, hd);
    kernels::serial::CausalAttention<double>(q, k, v, p2, o2, len, heads, hd);
    EXPECT_TRUE(BitEqual(p1, p2));
    EXPECT_TRUE(BitEqual(o1, o2));

    std::vector<double> dq1(q.size()), dk1(q.size()), dv1(q.size()), s1(pn);
    std::vector<double> dq2(q.size()), dk2(q.size()), dv2(q.size()), s2(pn);
    kernels::CausalAttentionBackward<double>(q, k, v, p1, d_out, dq1, dk1, dv1, s1, len, heads,
                                             hd);
    kernels::serial::CausalAttentionBackward<double>(q, k, v, p2, d_out, dq2, dk2, dv2, s2, len,
                                                     heads, hd);
    EXPECT_TRUE(BitEqual(dq1, dq2));
    EXPECT_TRUE(BitEqual(dk1, dk2));
    EXPECT_TRUE(BitEqual(dv1, dv2));
  }
}

TEST_P(WorkerCounts, SquaredDistancesMatchSerial) {
  Rng rng(13);
  const int n = 53, k = 7, dim = 9;
  const auto pts = Random<float>(rng, std::size_t(n) * dim);
  const auto cen = Random<float>(rng, std::size_t(k) * dim);
  std::vector<double> a(std::size_t(n) * k), b(a.size());
  kernels::SquaredDistances(pts, cen, a, n, k, dim);
  kernels::serial::SquaredDistances(pts, cen, b, n, k, dim);
  EXPECT_TRUE(BitEqual(a, b));
}

INSTANTIATE_TEST_SUITE_P(Threads, WorkerCounts, ::testing::Values(1, 2, 4));

TEST(Kernels, MatMulNTAgainstNaive) {
  // c = a * b^T for a = [[1,2],[3,4]], b = [[5,6],[7,8]].
  const std::vector<float> a{1, 2, 3, 4}, b{5, 6, 7, 8};
  std::vector<float> c(4, 0.0f);
  kernels::MatMulNT<float>(a, b, c, 2, 2, 2, false);
  EXPECT_EQ(c, (std::vector<float>{17, 23, 39, 53}));
  kernels::MatMulNT<float>(a, b, c, 2, 2, 2, true);
  EXPECT_EQ(c, (std::vector<float>{34, 46, 78, 106}));
}

TEST(Kernels, AttentionRowsAreCausalDistributions) {
  Rng rng(14);
  const int len = 6, heads = 2, hd = 3, d = heads * hd;
  const auto q = Random<float>(rng, std::size_t(len) * d);
  const auto k = Random<float>(rng, std::size_t(len) * d);
  const auto v = Random<float>(rng, std::size_t(len) * d);
  std::vector<float> p(std::size_t(heads) * len * len), o(q.size());
  kernels::CausalAttention<float>(q, k, v, p, o, len, heads, hd);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < len; ++i) {
      double sum = 0.0;
      for (int j = 0; j < len; ++j) {
        const float pij = p[(std::size_t(h) * len + i) * len + j];
        if (j > i) {
          EXPECT_EQ(pij, 0.0f);
        }
        sum += pij;
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

}  // namespace
}  // namespace unitlm
