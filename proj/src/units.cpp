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

#include "unitlm/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "unitlm/error.hpp"
#include "unitlm/kernels.hpp"
#include "unitlm/rng.hpp"

namespace unitlm {
namespace {

constexpr std::uint32_t kCodebookVersion = 1;

// Distances are evaluated in blocks to bound the [n x K] scratch matrix.
constexpr int kDistanceBlock = 4096;

struct Assignment {
  std::vector<int> label;
  std::vector<double> dist;  // squared distance to the assigned centroid
};

void Assign(std::span<const float> points, std::span<const float> centroids,
            int n, int k, int dim, Assignment& out) {
  out.label.resize(static_cast<std::size_t>(n));
  out.dist.resize(static_cast<std::size_t>(n));
  std::vector<double> block(static_cast<std::size_t>(std::min(n, kDistanceBlock)) * k);
  for (int start = 0; start < n; start += kDistanceBlock) {
    const int rows = std::min(kDistanceBlock, n - start);
    kernels::SquaredDistances(points.subspan(static_cast<std::size_t>(start) * dim), centroids,
                              block, rows, k, dim);
    for (int r = 0; r < rows; ++r) {
      const double* row = block.data() + std::size_t(r) * k;
      int best = 0;
      for (int c = 1; c < k; ++c) {
        if (row[c] < row[best]) best = c;
      }
      out.label[start + r] = best;
      out.dist[start + r] = row[best];
    }
  }
}

double Total(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

std::vector<float> KMeansPlusPlus(std::span<const float> points, int n, int k,
                                  int dim, Rng& rng) {
  std::vector<float> centroids(static_cast<std::size_t>(k) * dim);
  auto copy_point = [&](int point, int slot) {
    std::copy_n(points.data() + std::size_t(point) * dim, dim,
                centroids.data() + std::size_t(slot) * dim);
  };
  copy_point(int(rng.Below(std::uint64_t(n))), 0);
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    kernels::SquaredDistances(points, std::span<const float>(centroids).subspan(
                                          std::size_t(c - 1) * dim, dim),
                              dist, n, 1, dim);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], dist[i]);
      total += nearest[i];
    }
    if (!(total > 0.0)) {
      Fail(ErrorKind::kData, "insufficient data: fewer than K distinct frames");
    }
    const double target = rng.Uniform() * total;
    double running = 0.0;
    int chosen = -1;
    for (int i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      chosen = i;
      running += nearest[i];
      if (running > target) break;
    }
    copy_point(chosen, c);
  }
  return centroids;
}

}  // namespace

void ValidateUnits(const UnitSequence& seq, int k) {
  for (std::size_t i = 0; i < seq.units.size(); ++i) {
    const int u = seq.units[i];
    if (u < 0 || u >= k) {
      Fail(ErrorKind::kData, "unit out of range: " + std::to_string(u) +
                                 " (K=" + std::to_string(k) + ")");
    }
    if (seq.reduced && i > 0 && seq.units[i - 1] == u) {
      Fail(ErrorKind::kData, "reduced unit sequence has adjacent repeat at " +
                                 std::to_string(i));
    }
  }
}

Codebook::Codebook(std::vector<float> centroids, int k, int dim)
    : centroids_(std::move(centroids)), k_(k), dim_(dim) {
  Require(k >= 2, "codebook needs K >= 2");
  Require(dim >= 1, "codebook dimension must be positive");
  Require(centroids_.size() == std::size_t(k) * dim, "codebook size mismatch");
  for (float v : centroids_) {
    if (!std::isfinite(v)) Fail(ErrorKind::kData, "non-finite centroid entry");
  }
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      if (std::equal(Centroid(a).begin(), Centroid(a).end(), Centroid(b).begin())) {
        Fail(ErrorKind::kData, "duplicate centroids " + std::to_string(a) +
                                   " and " + std::to_string(b));
      }
    }
  }
}

void Codebook::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write codebook: " + path.string());
  auto put_u32 = [&](std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  out.write("UFCB", 4);
  put_u32(kCodebookVersion);
  put_u32(std::uint32_t(k_));
  put_u32(std::uint32_t(dim_));
  for (float v : centroids_) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(bits);
  }
  if (!out) Fail(ErrorKind::kIo, "short write: " + path.string());
}

Codebook Codebook::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open codebook: " + path.string());
  auto get_u32 = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
      Fail(ErrorKind::kFormat, "truncated codebook: " + path.string());
    }
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
           std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
  };
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "UFCB", 4) != 0) {
    Fail(ErrorKind::kFormat, "bad codebook magic: " + path.string());
  }
  const std::uint32_t version = get_u32();
  if (version != kCodebookVersion) {
    Fail(ErrorKind::kFormat, "unsupported codebook version " + std::to_string(version));
  }
  const std::uint32_t k = get_u32();
  const std::uint32_t dim = get_u32();
  if (k < 2 || dim < 1 || std::uint64_t(k) * dim > (1u << 28)) {
    Fail(ErrorKind::kFormat, "implausible codebook shape");
  }
  std::vector<float> values(static_cast<std::size_t>(k) * dim);
  for (float& v : values) {
    const std::uint32_t bits = get_u32();
    std::memcpy(&v, &bits, 4);
  }
  return Codebook(std::move(values), int(k), int(dim));
}

KMeansResult TrainCodebook(std::span<const FeatureFrames> frames,
                           const KMeansOptions& opts) {
  if (opts.k < 2) Fail(ErrorKind::kInvalidArgument, "K must be at least 2");
  Require(opts.max_iters >= 0, "max_iters must be non-negative");
  int dim = -1;
  std::size_t total = 0;
  for (const auto& f : frames) {
    if (f.num_frames == 0) continue;
    if (dim < 0) dim = f.feature_dim;
    if (f.feature_dim != dim) Fail(ErrorKind::kData, "feature dimension mismatch");
    total += std::size_t(f.num_frames);
  }
  if (total < std::size_t(opts.k)) {
    Fail(ErrorKind::kData, "insufficient data: " + std::to_string(total) +
                               " frames for K=" + std::to_string(opts.k));
  }
  std::vector<float> points;
  points.reserve(total * dim);
  for (const auto& f : frames) {
    points.insert(points.end(), f.values.begin(), f.values.end());
  }
  const int n = int(total);
  const int k = opts.k;

  Rng rng(opts.seed);
  std::vector<float> centroids = KMeansPlusPlus(points, n, k, dim, rng);

  KMeansResult result;
  Assignment assign;
  Assign(points, centroids, n, k, dim, assign);
  result.inertia.push_back(Total(assign.dist));

  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<int> counts(static_cast<std::size_t>(k));
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      const int c = assign.label[i];
      ++counts[c];
      for (int f = 0; f < dim; ++f) {
        sums[std::size_t(c) * dim + f] += points[std::size_t(i) * dim + f];
      }
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int c = 0; c < k; ++c) {
      float* centroid = centroids.data() + std::size_t(c) * dim;
      if (counts[c] > 0) {
        for (int f = 0; f < dim; ++f) {
          centroid[f] = float(sums[std::size_t(c) * dim + f] / counts[c]);
        }
        continue;
      }
      int far = -1;
      for (int i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (far < 0 || assign.dist[i] > assign.dist[far]) far = i;
      }
      taken[far] = true;
      assign.dist[far] = 0.0;
      std::copy_n(points.data() + std::size_t(far) * dim, dim, centroid);
    }
    const std::vector<int> previous = assign.label;
    Assign(points, centroids, n, k, dim, assign);
    result.inertia.push_back(Total(assign.dist));
    result.iterations = iter + 1;
    if (assign.label == previous) break;
  }
  result.codebook = Codebook(std::move(centroids), k, dim);
  return result;
}

UnitSequence Quantize(const FeatureFrames& frames, const Codebook& cb) {
  if (frames.feature_dim != cb.dim()) {
    Fail(ErrorKind::kData, "dimension mismatch: frames have " +
                               std::to_string(frames.feature_dim) +
                               ", codebook has " + std::to_string(cb.dim()));
  }
  Assignment assign;
  Assign(frames.values, cb.centroids(), frames.num_frames, cb.k(), cb.dim(),
         assign);
  return UnitSequence{std::move(assign.label), false};
}

UnitSequence Deduplicate(const UnitSequence& seq) {
  UnitSequence out;
  out.reduced = true;
  out.units.reserve(seq.units.size());
  for (int u : seq.units) {
    if (out.units.empty() || out.units.back() != u) out.units.push_back(u);
  }
  return out;
}

void SaveUnitFile(const std::filesystem::path& path, const UnitFile& file) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write unit file: " + path.string());
  out << "#K=" << file.k << " reduced=" << (file.reduced ? "true" : "false")
      << "\n";
  for (const auto& utt : file.utterances) {
    for (std::size_t i = 0; i < utt.units.size(); ++i) {
      if (i) out << ' ';
      out << utt.units[i];
    }
    out << "\n";
  }
  if (!out) Fail(ErrorKind::kIo, "short write: " + path.string());
}

UnitFile LoadUnitFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open unit file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) Fail(ErrorKind::kFormat, "unit file missing header");
  UnitFile file;
  char flag[8] = {};
  if (std::sscanf(line.c_str(), "#K=%d reduced=%5s", &file.k, flag) != 2) {
    Fail(ErrorKind::kFormat, "bad unit file header: " + line);
  }
  const std::string reduced(flag);
  if (reduced != "true" && reduced != "false") {
    Fail(ErrorKind::kFormat, "bad reduced flag in header: " + line);
  }
  if (file.k < 1) Fail(ErrorKind::kFormat, "bad K in unit file header");
  file.reduced = reduced == "true";
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    UnitSequence seq;
    seq.reduced = file.reduced;
    std::istringstream fields(line);
    std::string tok;
    while (fields >> tok) {
      std::size_t used = 0;
      int u = 0;
      try {
        u = std::stoi(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        Fail(ErrorKind::kFormat, "bad unit token '" + tok + "' on line " +
                                     std::to_string(line_no));
      }
      seq.units.push_back(u);
    }
    ValidateUnits(seq, file.k);
    file.utterances.push_back(std::move(seq));
  }
  return file;
}

}  // namespace unitlm
