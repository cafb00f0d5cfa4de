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

// Dense kernels used by the language model and the k-means trainer.
//
// Every kernel exists twice: `kernels::serial` is the plain reference loop
// nest, `kernels::` (top level) is the OpenMP version. Both compute each
// output element with the same reduction order, so their results are
// bit-identical for any thread count. Tests compare the two directly.
//
// All matrices are row-major and densely packed.

#pragma once

#include <cstddef>
#include <span>

namespace unitlm::kernels {

// c[m x n] (+)= a[m x k] * b[n x k]^T
template <typename T>
void MatMulNT(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate);

// c[m x n] (+)= a[m x k] * b[k x n]
template <typename T>
void MatMulNN(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate);

// c[m x n] (+)= a[k x m]^T * b[k x n]
template <typename T>
void MatMulTN(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate);

// Multi-head causal self-attention over a single sequence.
//   q, k, v, out: [len x heads*head_dim], head h owns columns
//                 [h*head_dim, (h+1)*head_dim).
//   probs:        [heads x len x len], row i holds the softmax over j <= i;
//                 entries j > i are written as zero.
template <typename T>
void CausalAttention(std::span<const T> q, std::span<const T> k,
                     std::span<const T> v, std::span<T> probs,
                     std::span<T> out, int len, int heads, int head_dim);

// Backward of CausalAttention. Gradients are overwritten, not accumulated.
// `scratch` must hold heads*len*len elements.
template <typename T>
void CausalAttentionBackward(std::span<const T> q, std::span<const T> k,
                             std::span<const T> v, std::span<const T> probs,
                             std::span<const T> d_out, std::span<T> d_q,
                             std::span<T> d_k, std::span<T> d_v,
                             std::span<T> scratch, int len, int heads,
                             int head_dim);

namespace serial {

template <typename T>
void MatMulNT(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate);
template <typename T>
void MatMulNN(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate);
template <typename T>
void MatMulTN(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate);
template <typename T>
void CausalAttention(std::span<const T> q, std::span<const T> k,
                     std::span<const T> v, std::span<T> probs,
                     std::span<T> out, int len, int heads, int head_dim);
template <typename T>
void CausalAttentionBackward(std::span<const T> q, std::span<const T> k,
                             std::span<const T> v, std::span<const T> probs,
                             std::span<const T> d_out, std::span<T> d_q,
                             std::span<T> d_k, std::span<T> d_v,
                             std::span<T> scratch, int len, int heads,
                             int head_dim);

}  // namespace serial

// Squared Euclidean distance from each of `n` points to each of `k`
// centroids, both [* x dim] float, accumulated in double. out: [n x k].
void SquaredDistances(std::span<const float> points,
                      std::span<const float> centroids, std::span<double> out,
                      int n, int k, int dim);

namespace serial {
void SquaredDistances(std::span<const float> points,
                      std::span<const float> centroids, std::span<double> out,
                      int n, int k, int dim);
}  // namespace serial

// Number of OpenMP worker threads the parallel kernels will use.
int WorkerCount();
void SetWorkerCount(int n);

}  // namespace unitlm::kernels
