// Copyright (c) 2026 svadapt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SVADAPT_CORE_HPP_
#define SVADAPT_CORE_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace svadapt {

using Vec = std::vector<double>;

/// Fixed-dimension speaker representation. All embeddings that are compared
/// or clustered together must share one dimension.
using Embedding = Vec;

/// Dense row-major matrix. Small enough here that a flat vector is all we need.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }

  bool operator==(const Matrix& other) const = default;
};

/// y = M x. Dimension mismatch is a caller bug and throws.
Vec matvec(const Matrix& m, const Vec& x);

double dot(const Vec& a, const Vec& b);
double l2_norm(const Vec& a);

/// An 8-second speech unit. speaker_id is ground truth and may be empty when
/// the segment is treated as unlabeled.
struct SegmentRecord {
  std::string segment_id;
  std::string recording_id;
  std::string speaker_id;
  Vec features;
  double duration_s = 8.0;
};

/// A verification trial: two segment ids and a same-speaker label
/// (1 = target, 0 = non-target).
struct TrialPair {
  std::string seg_a;
  std::string seg_b;
  int label = 0;
};

/// Deterministic seeded generator. The engine is mt19937_64 (bit-exact output
/// by the standard) and every distribution is derived from its raw draws, so
/// a fixed seed and call sequence reproduce the same values on every run.
/// derive() yields an independent child stream; children are a pure function
/// of (seed, stream), not of how far the parent has advanced.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_double();
  /// Standard normal via Box-Muller (two uniform draws per call).
  double next_gaussian();
  /// Uniform in [0, n); n must be positive. Rejection sampling, no modulo bias.
  uint64_t next_below(uint64_t n);

  Rng derive(uint64_t stream) const;
  uint64_t seed() const { return seed_; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Vector of n independent N(0, sigma^2) draws.
Vec gaussian_vec(int n, double sigma, Rng& rng);

/// dot(a,b) / (|a| |b|). Throws on dimension mismatch or a zero-norm input;
/// never returns NaN.
double cosine_similarity(const Embedding& a, const Embedding& b);

/// Elementwise arithmetic mean of a nonempty list of equal-dimension vectors.
Embedding mean_embedding(const std::vector<Embedding>& items);

/// Round-trip-exact decimal formatting for doubles (%.17g).
std::string format_double(double v);
/// Strict parse; the whole token must be consumed.
double parse_double(const std::string& s);
long long parse_int(const std::string& s);

}  // namespace svadapt

#endif  // SVADAPT_CORE_HPP_
