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

#include "unitlm/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "unitlm/error.hpp"

namespace unitlm {
namespace {

template <typename T>
double LogSumExp(const T* row, int vocab) {
  double mx = double(row[0]);
  for (int v = 1; v < vocab; ++v) mx = std::max(mx, double(row[v]));
  double s = 0.0;
  for (int v = 0; v < vocab; ++v) s += std::exp(double(row[v]) - mx);
  return mx + std::log(s);
}

}  // namespace

void ValidateSegments(std::span<const SegmentSpan> segments, int length) {
  if (segments.empty()) Fail(ErrorKind::kData, "sequence has no segments");
  int cursor = 0;
  for (const auto& s : segments) {
    if (s.start != cursor || s.end <= s.start) {
      Fail(ErrorKind::kData, "segments must be ordered and cover the sequence");
    }
    if (s.prefix_len < 0) Fail(ErrorKind::kData, "segment prefix_len must be non-negative");
    if (s.prefix_len >= s.end - s.start) {
      Fail(ErrorKind::kData, "empty target: segment prefix covers the whole segment");
    }
    cursor = s.end;
  }
  if (cursor != length) {
    Fail(ErrorKind::kData, "segments cover " + std::to_string(cursor) +
                               " tokens of " + std::to_string(length));
  }
}

std::vector<int> TargetPositions(std::span<const SegmentSpan> segments) {
  std::vector<int> out;
  for (const auto& s : segments) {
    for (int i = std::max(s.start + s.prefix_len, 1); i < s.end; ++i) out.push_back(i);
  }
  return out;
}

template <typename T>
NllSum MaskedNllSum(std::span<const T> logits, int vocab,
                    std::span<const TokenId> ids,
                    std::span<const SegmentSpan> segments, std::span<T> d_logits,
                    double grad_scale) {
  const int len = int(ids.size());
  ValidateSegments(segments, len);
  Require(logits.size() == std::size_t(len) * vocab, "logits size mismatch");
  Require(d_logits.empty() || d_logits.size() == logits.size(),
          "gradient buffer size mismatch");
  NllSum out;
  for (int pos : TargetPositions(segments)) {
    const T* row = logits.data() + std::size_t(pos - 1) * vocab;
    const TokenId target = ids[pos];
    Require(target >= 0 && target < vocab, "target id out of range");
    const double lse = LogSumExp(row, vocab);
    out.sum += lse - double(row[target]);
    ++out.count;
    if (!d_logits.empty()) {
      T* grad = d_logits.data() + std::size_t(pos - 1) * vocab;
      for (int v = 0; v < vocab; ++v) {
        const double p = std::exp(double(row[v]) - lse);
        grad[v] += T(grad_scale * (p - (v == target ? 1.0 : 0.0)));
      }
    }
  }
  return out;
}

template <typename T>
double MaskedNll(std::span<const T> logits, int vocab, std::span<const TokenId> ids,
                 std::span<const SegmentSpan> segments) {
  const NllSum s = MaskedNllSum<T>(logits, vocab, ids, segments);
  if (s.count == 0) Fail(ErrorKind::kData, "empty target");
  return s.sum / double(s.count);
}

template <typename T>
double SequenceNll(std::span<const T> logits, int vocab, std::span<const TokenId> ids) {
  const std::size_t len = ids.size();
  Require(logits.size() == len * vocab, "logits size mismatch");
  if (len < 2) Fail(ErrorKind::kData, "empty target");
  double total = 0.0;
  for (std::size_t i = 1; i < len; ++i) {
    const T* row = logits.data() + (i - 1) * vocab;
    double mx = -INFINITY;
    for (int v = 0; v < vocab; ++v) mx = std::max(mx, double(row[v]));
    double z = 0.0;
    for (int v = 0; v < vocab; ++v) z += std::exp(double(row[v]) - mx);
    total += -(double(row[ids[i]]) - mx - std::log(z));
  }
  return total / double(len - 1);
}

template NllSum MaskedNllSum<float>(std::span<const float>, int, std::span<const TokenId>,
                                    std::span<const SegmentSpan>, std::span<float>,
                                    double);
template NllSum MaskedNllSum<double>(std::span<const double>, int,
                                     std::span<const TokenId>,
                                     std::span<const SegmentSpan>, std::span<double>,
                                     double);
template double MaskedNll<float>(std::span<const float>, int, std::span<const TokenId>,
                                 std::span<const SegmentSpan>);
template double MaskedNll<double>(std::span<const double>, int, std::span<const TokenId>,
                                  std::span<const SegmentSpan>);
template double SequenceNll<float>(std::span<const float>, int, std::span<const TokenId>);
template double SequenceNll<double>(std::span<const double>, int,
                                    std::span<const TokenId>);

}  // namespace unitlm
