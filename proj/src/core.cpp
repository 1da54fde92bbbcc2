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

#include "svadapt/core.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace svadapt {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Vec matvec(const Matrix& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.cols) {
    throw std::invalid_argument("matvec: expected dimension " + std::to_string(m.cols) +
                                ", got " + std::to_string(x.size()));
  }
  Vec y(static_cast<size_t>(m.rows), 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = m.data.data() + static_cast<size_t>(r) * m.cols;
    for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("dot: dimension mismatch (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(const Vec& a) { return std::sqrt(dot(a, a)); }

Rng::Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

uint64_t Rng::next_u64() { return engine_(); }

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_gaussian() {
  double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
  double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

uint64_t Rng::next_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::next_below: n must be positive");
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Rng Rng::derive(uint64_t stream) const {
  return Rng(splitmix64(seed_ ^ splitmix64(stream)));
}

Vec gaussian_vec(int n, double sigma, Rng& rng) {
  Vec v(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = sigma * rng.next_gaussian();
  return v;
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  double na = l2_norm(a);
  double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine_similarity: zero-norm embedding");
  }
  return dot(a, b) / (na * nb);
}

Embedding mean_embedding(const std::vector<Embedding>& items) {
  if (items.empty()) {
    throw std::invalid_argument("mean_embedding: empty input");
  }
  const size_t dim = items.front().size();
  Embedding mean(dim, 0.0);
  for (const Embedding& e : items) {
    if (e.size() != dim) {
      throw std::invalid_argument("mean_embedding: dimension mismatch");
    }
    for (size_t i = 0; i < dim; ++i) mean[i] += e[i];
  }
  for (size_t i = 0; i < dim; ++i) mean[i] /= static_cast<double>(items.size());
  return mean;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("parse_double: empty token");
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw std::invalid_argument("parse_double: bad token '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("parse_int: empty token");
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) {
    throw std::invalid_argument("parse_int: bad token '" + s + "'");
  }
  return v;
}

}  // namespace svadapt
