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

// Next-token negative log-likelihood with per-segment prefix masking.
//
// A packed sequence holds one or more segments [start, end). Within a
// segment the first `prefix_len` tokens are instruction context and carry no
// loss. Token i is scored from logits row i - 1, so absolute position 0
// never contributes (it has no left context).

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "unitlm/vocab.hpp"

namespace unitlm {

struct SegmentSpan {
  int start = 0;
  int prefix_len = 0;
  int end = 0;

  bool operator==(const SegmentSpan&) const = default;
};

// Throws unless segments are ordered, non-overlapping, exactly cover
// [0, length) and satisfy 0 <= prefix_len < end - start.
void ValidateSegments(std::span<const SegmentSpan> segments, int length);

// Positions whose tokens are scored, ascending.
std::vector<int> TargetPositions(std::span<const SegmentSpan> segments);

struct NllSum {
  double sum = 0.0;   // sum of -log p over scored positions
  std::size_t count = 0;
};

// Sum of masked NLL terms. When `d_logits` is non-null, adds
// grad_scale * d(sum)/d(logits) into it ([len x vocab]).
template <typename T>
NllSum MaskedNllSum(std::span<const T> logits, int vocab,
                    std::span<const TokenId> ids,
                    std::span<const SegmentSpan> segments,
                    std::span<T> d_logits = {}, double grad_scale = 1.0);

// Mean over scored positions. Throws "empty target" when nothing is scored.
template <typename T>
double MaskedNll(std::span<const T> logits, int vocab, std::span<const TokenId> ids,
                 std::span<const SegmentSpan> segments);

// Unmasked mean NLL over positions 1..len-1 of a single sequence, written
// independently of the segment machinery.
template <typename T>
double SequenceNll(std::span<const T> logits, int vocab, std::span<const TokenId> ids);

}  // namespace unitlm
