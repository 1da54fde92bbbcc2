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

#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "svadapt/core.hpp"

using namespace svadapt;

TEST_CASE("cosine_similarity basic values") {
  CHECK(cosine_similarity({1, 0}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity({1, 0}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-12));
  // dot = 24, norms 5 * 5
  CHECK(cosine_similarity({3, 4}, {4, 3}) == doctest::Approx(24.0 / 25.0).epsilon(1e-12));
}

TEST_CASE("cosine_similarity rejects bad input") {
  CHECK_THROWS_AS(cosine_similarity({0, 0}, {1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(cosine_similarity({1, 0}, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(cosine_similarity({1, 0, 0}, {1, 0}), std::invalid_argument);
}

TEST_CASE("cosine_similarity is symmetric and scale invariant") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Vec a = gaussian_vec(8, 1.0, rng);
    Vec b = gaussian_vec(8, 1.0, rng);
    CHECK(cosine_similarity(a, b) == cosine_similarity(b, a));
    double c = rng.next_double() * 9.0 + 1e-3;
    Vec scaled = a;
    for (double& v : scaled) v *= c;
    CHECK(std::fabs(cosine_similarity(scaled, b) - cosine_similarity(a, b)) <= 1e-12);
  }
}

TEST_CASE("mean_embedding values") {
  CHECK(mean_embedding({{1, 0}}) == Vec{1, 0});
  Vec half = mean_embedding({{1, 0}, {0, 1}});
  CHECK(half[0] == doctest::Approx(0.5));
  CHECK(half[1] == doctest::Approx(0.5));
  // column means of [[1,2],[3,4],[5,6]]
  Vec mean = mean_embedding({{1, 2}, {3, 4}, {5, 6}});
  CHECK(mean[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(mean[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("mean_embedding rejects bad input") {
  CHECK_THROWS_AS(mean_embedding({}), std::invalid_argument);
  CHECK_THROWS_AS(mean_embedding({{1, 0}, {1, 0, 0}}), std::invalid_argument);
}

TEST_CASE("mean_embedding is permutation invariant") {
  Rng rng(11);
  std::vector<Embedding> items;
  for (int i = 0; i < 6; ++i) items.push_back(gaussian_vec(5, 2.0, rng));
  Vec forward = mean_embedding(items);
  std::vector<Embedding> reversed(items.rbegin(), items.rend());
  Vec backward = mean_embedding(reversed);
  for (size_t d = 0; d < forward.size(); ++d) {
    CHECK(std::fabs(forward[d] - backward[d]) <= 1e-12);
  }
}

TEST_CASE("Rng reproduces identical sequences for identical seeds") {
  Rng a(42), b(42);
  for (int i = 0; i < 200; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(c.next_double() == d.next_double());
    CHECK(c.next_gaussian() == d.next_gaussian());
  }
}

TEST_CASE("Rng::derive depends only on seed and stream") {
  Rng parent(9);
  Rng child_before = parent.derive(3);
  parent.next_u64();
  parent.next_gaussian();
  Rng child_after = parent.derive(3);
  for (int i = 0; i < 20; ++i) {
    CHECK(child_before.next_u64() == child_after.next_u64());
  }
  Rng other = parent.derive(4);
  CHECK(other.next_u64() != parent.derive(3).next_u64());
}

TEST_CASE("Rng::next_below stays in range and covers values") {
  Rng rng(5);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 2000; ++i) {
    uint64_t v = rng.next_below(7);
    REQUIRE(v < 7);
    seen[v]++;
  }
  for (int count : seen) CHECK(count > 0);
  CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}

TEST_CASE("Rng::shuffle is deterministic per seed") {
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  Rng a(77), b(77);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
}

TEST_CASE("format_double round-trips exactly") {
  Rng rng(123);
  for (int i = 0; i < 1000; ++i) {
    double v = (rng.next_double() - 0.5) * std::pow(10.0, static_cast<double>(i % 61) - 30.0);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(parse_double(format_double(0.0)) == 0.0);
  CHECK_THROWS_AS(parse_double("1.5x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_int("12.5"), std::invalid_argument);
}

TEST_CASE("matvec computes rows and checks dims") {
  Matrix m(2, 3);
  m.at(0, 0) = 1;
  m.at(0, 1) = 2;
  m.at(0, 2) = 3;
  m.at(1, 0) = 4;
  m.at(1, 1) = 5;
  m.at(1, 2) = 6;
  Vec y = matvec(m, {1, 1, 1});
  CHECK(y[0] == doctest::Approx(6.0));
  CHECK(y[1] == doctest::Approx(15.0));
  CHECK_THROWS_AS(matvec(m, {1, 1}), std::invalid_argument);
}
