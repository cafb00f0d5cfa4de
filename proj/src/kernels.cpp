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

#include "unitlm/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace unitlm::kernels {

// Reduction order contract shared by both implementations: every output
// element is sum_{p=0}^{k-1} term(p), accumulated left to right starting
// from zero, and only then added to the existing value when accumulating.

namespace serial {

template <typename T>
void MatMulNT(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate) {
  assert(a.size() >= std::size_t(m) * k && b.size() >= std::size_t(n) * k);
  assert(c.size() >= std::size_t(m) * n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

template <typename T>
void MatMulNN(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate) {
  assert(a.size() >= std::size_t(m) * k && b.size() >= std::size_t(k) * n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

template <typename T>
void MatMulTN(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate) {
  assert(a.size() >= std::size_t(k) * m && b.size() >= std::size_t(k) * n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

template <typename T>
void CausalAttention(std::span<const T> q, std::span<const T> k,
                     std::span<const T> v, std::span<T> probs,
                     std::span<T> out, int len, int heads, int head_dim) {
  const int d = heads * head_dim;
  const T scale = T(1) / std::sqrt(T(head_dim));
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < len; ++i) {
      T* p = probs.data() + (static_cast<std::size_t>(h) * len + i) * len;
      const T* qi = q.data() + std::size_t(i) * d + h * head_dim;
      T max_score = -std::numeric_limits<T>::infinity();
      for (int j = 0; j <= i; ++j) {
        const T* kj = k.data() + std::size_t(j) * d + h * head_dim;
        T s = 0;
        for (int c = 0; c < head_dim; ++c) s += qi[c] * kj[c];
        p[j] = s * scale;
        max_score = std::max(max_score, p[j]);
      }
      T total = 0;
      for (int j = 0; j <= i; ++j) {
        p[j] = std::exp(p[j] - max_score);
        total += p[j];
      }
      for (int j = 0; j <= i; ++j) p[j] /= total;
      for (int j = i + 1; j < len; ++j) p[j] = 0;
      T* oi = out.data() + std::size_t(i) * d + h * head_dim;
      for (int c = 0; c < head_dim; ++c) {
        T acc = 0;
        for (int j = 0; j <= i; ++j) {
          acc += p[j] * v[std::size_t(j) * d + h * head_dim + c];
        }
        oi[c] = acc;
      }
    }
  }
}

template <typename T>
void CausalAttentionBackward(std::span<const T> q, std::span<const T> k,
                             std::span<const T> v, std::span<const T> probs,
                             std::span<const T> d_out, std::span<T> d_q,
                             std::span<T> d_k, std::span<T> d_v,
                             std::span<T> scratch, int len, int heads,
                             int head_dim) {
  const int d = heads * head_dim;
  const T scale = T(1) / std::sqrt(T(head_dim));
  // Pass 1 (per query row): score gradients into scratch, then d_q.
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < len; ++i) {
      const T* p = probs.data() + (static_cast<std::size_t>(h) * len + i) * len;
      T* ds = scratch.data() + (static_cast<std::size_t>(h) * len + i) * len;
      const T* doi = d_out.data() + std::size_t(i) * d + h * head_dim;
      T dot = 0;
      for (int j = 0; j <= i; ++j) {
        const T* vj = v.data() + std::size_t(j) * d + h * head_dim;
        T dp = 0;
        for (int c = 0; c < head_dim; ++c) dp += doi[c] * vj[c];
        ds[j] = dp;
        dot += p[j] * dp;
      }
      for (int j = 0; j <= i; ++j) ds[j] = p[j] * (ds[j] - dot);
      T* dqi = d_q.data() + std::size_t(i) * d + h * head_dim;
      for (int c = 0; c < head_dim; ++c) {
        T acc = 0;
        for (int j = 0; j <= i; ++j) {
          acc += ds[j] * k[std::size_t(j) * d + h * head_dim + c];
        }
        dqi[c] = acc * scale;
      }
    }
  }
  // Pass 2 (per key row): d_k and d_v gather over queries i >= j.
  for (int h = 0; h < heads; ++h) {
    for (int j = 0; j < len; ++j) {
      T* dkj = d_k.data() + std::size_t(j) * d + h * head_dim;
      T* dvj = d_v.data() + std::size_t(j) * d + h * head_dim;
      for (int c = 0; c < head_dim; ++c) {
        T acc_k = 0;
        T acc_v = 0;
        for (int i = j; i < len; ++i) {
          const std::size_t row = (static_cast<std::size_t>(h) * len + i) * len + j;
          acc_k += scratch[row] * q[std::size_t(i) * d + h * head_dim + c];
          acc_v += probs[row] * d_out[std::size_t(i) * d + h * head_dim + c];
        }
        dkj[c] = acc_k * scale;
        dvj[c] = acc_v;
      }
    }
  }
}

void SquaredDistances(std::span<const float> points,
                      std::span<const float> centroids, std::span<double> out,
                      int n, int k, int dim) {
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < k; ++c) {
      double acc = 0;
      for (int f = 0; f < dim; ++f) {
        const double diff = double(points[std::size_t(i) * dim + f]) -
                            double(centroids[std::size_t(c) * dim + f]);
        acc += diff * diff;
      }
      out[std::size_t(i) * k + c] = acc;
    }
  }
}

}  // namespace serial

// Parallel versions. Rows of the output are distributed over threads; the
// inner loops are arranged for contiguous access but keep the per-element
// reduction order above.

template <typename T>
void MatMulNT(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate) {
  assert(a.size() >= std::size_t(m) * k && b.size() >= std::size_t(n) * k);
  assert(c.size() >= std::size_t(m) * n);
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* ai = pa + std::size_t(i) * k;
    T* ci = pc + std::size_t(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* bj = pb + std::size_t(j) * k;
      T acc = 0;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = accumulate ? ci[j] + acc : acc;
    }
  }
}

template <typename T>
void MatMulNN(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate) {
  assert(a.size() >= std::size_t(m) * k && b.size() >= std::size_t(k) * n);
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
#pragma omp parallel
  {
    std::vector<T> row(n);
#pragma omp for schedule(static)
    for (int i = 0; i < m; ++i) {
      std::fill(row.begin(), row.end(), T(0));
      const T* ai = pa + std::size_t(i) * k;
      for (int p = 0; p < k; ++p) {
        const T aip = ai[p];
        const T* bp = pb + std::size_t(p) * n;
        for (int j = 0; j < n; ++j) row[j] += aip * bp[j];
      }
      T* ci = pc + std::size_t(i) * n;
      for (int j = 0; j < n; ++j) ci[j] = accumulate ? ci[j] + row[j] : row[j];
    }
  }
}

template <typename T>
void MatMulTN(std::span<const T> a, std::span<const T> b, std::span<T> c,
              int m, int n, int k, bool accumulate) {
  assert(a.size() >= std::size_t(k) * m && b.size() >= std::size_t(k) * n);
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
#pragma omp parallel
  {
    std::vector<T> row(n);
#pragma omp for schedule(static)
    for (int i = 0; i < m; ++i) {
      std::fill(row.begin(), row.end(), T(0));
      for (int p = 0; p < k; ++p) {
        const T api = pa[std::size_t(p) * m + i];
        const T* bp = pb + std::size_t(p) * n;
        for (int j = 0; j < n; ++j) row[j] += api * bp[j];
      }
      T* ci = pc + std::size_t(i) * n;
      for (int j = 0; j < n; ++j) ci[j] = accumulate ? ci[j] + row[j] : row[j];
    }
  }
}

template <typename T>
void CausalAttention(std::span<const T> q, std::span<const T> k,
                     std::span<const T> v, std::span<T> probs,
                     std::span<T> out, int len, int heads, int head_dim) {
  const int d = heads * head_dim;
  const T scale = T(1) / std::sqrt(T(head_dim));
  const int rows = heads * len;
#pragma omp parallel
  {
    std::vector<T> acc(head_dim);
#pragma omp for schedule(dynamic, 8)
    for (int r = 0; r < rows; ++r) {
      const int h = r / len;
      const int i = r % len;
      T* p = probs.data() + std::size_t(r) * len;
      const T* qi = q.data() + std::size_t(i) * d + h * head_dim;
      T max_score = -std::numeric_limits<T>::infinity();
      for (int j = 0; j <= i; ++j) {
        const T* kj = k.data() + std::size_t(j) * d + h * head_dim;
        T s = 0;
        for (int c = 0; c < head_dim; ++c) s += qi[c] * kj[c];
        p[j] = s * scale;
        max_score = std::max(max_score, p[j]);
      }
      T total = 0;
      for (int j = 0; j <= i; ++j) {
        p[j] = std::exp(p[j] - max_score);
        total += p[j];
      }
      for (int j = 0; j <= i; ++j) p[j] /= total;
      std::fill(p + i + 1, p + len, T(0));
      std::fill(acc.begin(), acc.end(), T(0));
      for (int j = 0; j <= i; ++j) {
        const T pj = p[j];
        const T* vj = v.data() + std::size_t(j) * d + h * head_dim;
        for (int c = 0; c < head_dim; ++c) acc[c] += pj * vj[c];
      }
      std::copy(acc.begin(), acc.end(),
                out.data() + std::size_t(i) * d + h * head_dim);
    }
  }
}

template <typename T>
void CausalAttentionBackward(std::span<const T> q, std::span<const T> k,
                             std::span<const T> v, std::span<const T> probs,
                             std::span<const T> d_out, std::span<T> d_q,
                             std::span<T> d_k, std::span<T> d_v,
                             std::span<T> scratch, int len, int heads,
                             int head_dim) {
  const int d = heads * head_dim;
  const T scale = T(1) / std::sqrt(T(head_dim));
  const int rows = heads * len;
#pragma omp parallel
  {
    std::vector<T> acc(head_dim);
    std::vector<T> acc2(head_dim);
#pragma omp for schedule(dynamic, 8)
    for (int r = 0; r < rows; ++r) {
      const int h = r / len;
      const int i = r % len;
      const T* p = probs.data() + std::size_t(r) * len;
      T* ds = scratch.data() + std::size_t(r) * len;
      const T* doi = d_out.data() + std::size_t(i) * d + h * head_dim;
      T dot = 0;
      for (int j = 0; j <= i; ++j) {
        const T* vj = v.data() + std::size_t(j) * d + h * head_dim;
        T dp = 0;
        for (int c = 0; c < head_dim; ++c) dp += doi[c] * vj[c];
        ds[j] = dp;
        dot += p[j] * dp;
      }
      for (int j = 0; j <= i; ++j) ds[j] = p[j] * (ds[j] - dot);
      std::fill(acc.begin(), acc.end(), T(0));
      for (int j = 0; j <= i; ++j) {
        const T dsj = ds[j];
        const T* kj = k.data() + std::size_t(j) * d + h * head_dim;
        for (int c = 0; c < head_dim; ++c) acc[c] += dsj * kj[c];
      }
      T* dqi = d_q.data() + std::size_t(i) * d + h * head_dim;
      for (int c = 0; c < head_dim; ++c) dqi[c] = acc[c] * scale;
    }
#pragma omp for schedule(dynamic, 8)
    for (int r = 0; r < rows; ++r) {
      const int h = r / len;
      const int j = r % len;
      std::fill(acc.begin(), acc.end(), T(0));
      std::fill(acc2.begin(), acc2.end(), T(0));
      for (int i = j; i < len; ++i) {
        const std::size_t at = (static_cast<std::size_t>(h) * len + i) * len + j;
        const T dsij = scratch[at];
        const T pij = probs[at];
        const T* qi = q.data() + std::size_t(i) * d + h * head_dim;
        const T* doi = d_out.data() + std::size_t(i) * d + h * head_dim;
        for (int c = 0; c < head_dim; ++c) {
          acc[c] += dsij * qi[c];
          acc2[c] += pij * doi[c];
        }
      }
      T* dkj = d_k.data() + std::size_t(j) * d + h * head_dim;
      T* dvj = d_v.data() + std::size_t(j) * d + h * head_dim;
      for (int c = 0; c < head_dim; ++c) {
        dkj[c] = acc[c] * scale;
        dvj[c] = acc2[c];
      }
    }
  }
}

void SquaredDistances(std::span<const float> points,
                      std::span<const float> centroids, std::span<double> out,
                      int n, int k, int dim) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const float* x = points.data() + std::size_t(i) * dim;
    for (int c = 0; c < k; ++c) {
      const float* y = centroids.data() + std::size_t(c) * dim;
      double acc = 0;
      for (int f = 0; f < dim; ++f) {
        const double diff = double(x[f]) - double(y[f]);
        acc += diff * diff;
      }
      out[std::size_t(i) * k + c] = acc;
    }
  }
}

int WorkerCount() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void SetWorkerCount(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

#define UNITLM_INSTANTIATE(T)                                                 \
  template void MatMulNT<T>(std::span<const T>, std::span<const T>,           \
                            std::span<T>, int, int, int, bool);               \
  template void MatMulNN<T>(std::span<const T>, std::span<const T>,           \
                            std::span<T>, int, int, int, bool);               \
  template void MatMulTN<T>(std::span<const T>, std::span<const T>,           \
                            std::span<T>, int, int, int, bool);               \
  template void CausalAttention<T>(std::span<const T>, std::span<const T>,    \
                                   std::span<const T>, std::span<T>,          \
                                   std::span<T>, int, int, int);              \
  template void CausalAttentionBackward<T>(                                   \
      std::span<const T>, std::span<const T>, std::span<const T>,             \
      std::span<const T>, std::span<const T>, std::span<T>, std::span<T>,     \
      std::span<T>, std::span<T>, int, int, int);                             \
  namespace serial {                                                          \
  template void MatMulNT<T>(std::span<const T>, std::span<const T>,           \
                            std::span<T>, int, int, int, bool);               \
  template void MatMulNN<T>(std::span<const T>, std::span<const T>,           \
                            std::span<T>, int, int, int, bool);               \
  template void MatMulTN<T>(std::span<const T>, std::span<const T>,           \
                            std::span<T>, int, int, int, bool);               \
  template void CausalAttention<T>(std::span<const T>, std::span<const T>,    \
                                   std::span<const T>, std::span<T>,          \
                                   std::span<T>, int, int, int);              \
  template void CausalAttentionBackward<T>(                                   \
      std::span<const T>, std::span<const T>, std::span<const T>,             \
      std::span<const T>, std::span<const T>, std::span<T>, std::span<T>,     \
      std::span<T>, std::span<T>, int, int, int);                             \
  }

UNITLM_INSTANTIATE(float)
UNITLM_INSTANTIATE(double)

#undef UNITLM_INSTANTIATE

}  // namespace unitlm::kernels
