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
#include "svadapt/cluster.hpp"
#include "test_util.hpp"

using namespace svadapt;

namespace {

constexpr double kPi = 3.14159265358979323846;

Embedding on_circle(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Three tight angular clouds on the unit circle, 4 points each.
std::vector<Embedding> three_clouds() {
  std::vector<Embedding> pts;
  for (double base : {0.0, 2.0 * kPi / 3.0, 4.0 * kPi / 3.0}) {
    for (double delta : {-0.06, -0.02, 0.02, 0.06}) {
      pts.push_back(on_circle(base + delta));
    }
  }
  return pts;
}

// A cloud hugging (0, 0.01) and one hugging (10, 10); the spread is small
// against each cloud's own scale so the separation survives normalization.
std::vector<Embedding> two_clouds() {
  std::vector<Embedding> pts;
  Rng rng(50);
  for (int i = 0; i < 6; ++i) {
    pts.push_back({0.0 + 5e-4 * rng.next_gaussian(), 0.01 + 5e-4 * rng.next_gaussian()});
  }
  for (int i = 0; i < 6; ++i) {
    pts.push_back({10.0 + 0.05 * rng.next_gaussian(), 10.0 + 0.05 * rng.next_gaussian()});
  }
  return pts;
}

}  // namespace

TEST_CASE("kmeans recovers two well-separated clouds") {
  std::vector<Embedding> pts = two_clouds();
  ClusterConfig cfg;
  cfg.k = 2;
  cfg.seed = 51;
  ClusterAssignment asg = kmeans(pts, cfg);
  std::vector<int> expected(12, 0);
  for (int i = 6; i < 12; ++i) expected[i] = 1;
  CHECK(testutil::same_partition(asg.labels, expected));
}

TEST_CASE("kmeans with k = n_items yields zero inertia") {
  std::vector<Embedding> pts;
  for (int i = 0; i < 5; ++i) pts.push_back(on_circle(0.4 * i));
  ClusterConfig cfg;
  cfg.k = 5;
  cfg.seed = 52;
  ClusterAssignment asg = kmeans(pts, cfg);
  CHECK(asg.inertia == doctest::Approx(0.0).epsilon(1e-15));
  std::vector<int> counts(5, 0);
  for (int lab : asg.labels) counts[lab]++;
  for (int c : counts) CHECK(c == 1);
}

TEST_CASE("kmeans inertia matches the exhaustive best partition on 12 points") {
  std::vector<Embedding> pts = three_clouds();
  ClusterConfig cfg;
  cfg.k = 3;
  cfg.seed = 53;
  ClusterAssignment asg = kmeans(pts, cfg);
  double oracle = testutil::best_partition_inertia(pts, 3);
  CHECK(std::fabs(asg.inertia - oracle) <= 1e-9);
}

TEST_CASE("Lloyd inertia is monotone non-increasing") {
  Rng rng(54);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<Embedding> pts;
    for (int i = 0; i < 40; ++i) {
      Vec v = gaussian_vec(3, 1.0, rng);
      if (l2_norm(v) == 0.0) v[0] = 1.0;
      double n = l2_norm(v);
      for (double& x : v) x /= n;
      pts.push_back(v);
    }
    Rng run_rng(seed);
    KMeansRunStats stats;
    kmeans_single_run(pts, 4, 100, 0.0, run_rng, &stats);
    for (size_t i = 1; i < stats.inertia_per_iter.size(); ++i) {
      CHECK(stats.inertia_per_iter[i] <= stats.inertia_per_iter[i - 1] + 1e-12);
    }
  }
}

TEST_CASE("best-of-n_init never loses to a single run") {
  Rng rng(55);
  std::vector<Embedding> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(gaussian_vec(4, 1.0, rng));
  ClusterConfig one;
  one.k = 5;
  one.n_init = 1;
  one.seed = 56;
  ClusterConfig ten = one;
  ten.n_init = 10;
  CHECK(kmeans(pts, ten).inertia <= kmeans(pts, one).inertia + 1e-12);
}

TEST_CASE("kmeans partition is invariant under input permutation on separable data") {
  std::vector<Embedding> pts = two_clouds();
  ClusterConfig cfg;
  cfg.k = 2;
  cfg.seed = 57;
  ClusterAssignment asg = kmeans(pts, cfg);

  std::vector<size_t> perm(pts.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 7 + 3) % perm.size();
  std::vector<Embedding> permuted;
  for (size_t i : perm) permuted.push_back(pts[i]);
  ClusterAssignment asg_perm = kmeans(permuted, cfg);

  std::vector<int> unpermuted(pts.size());
  for (size_t i = 0; i < perm.size(); ++i) unpermuted[perm[i]] = asg_perm.labels[i];
  CHECK(testutil::same_partition(asg.labels, unpermuted));
}

TEST_CASE("kmeans rejects degenerate inputs") {
  ClusterConfig cfg;
  cfg.k = 2;
  std::vector<Embedding> too_few{{1.0, 0.0}};
  CHECK_THROWS_AS(kmeans(too_few, cfg), std::invalid_argument);

  std::vector<Embedding> with_zero{{1.0, 0.0}, {0.0, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(kmeans(with_zero, cfg), std::invalid_argument);

  // Collinear positive scalings collapse to one distinct normalized point.
  std::vector<Embedding> collapsed{{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}};
  CHECK_THROWS_WITH_AS(kmeans(collapsed, cfg), doctest::Contains("distinct"),
                       std::invalid_argument);

  cfg.k = 1;
  std::vector<Embedding> fine{{1.0, 0.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(kmeans(fine, cfg), std::invalid_argument);
}

TEST_CASE("ahc with k = n_items keeps singletons") {
  std::vector<Embedding> pts{{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}};
  std::vector<AhcMerge> merges;
  ClusterAssignment asg = ahc(pts, 3, &merges);
  CHECK(merges.empty());
  CHECK(asg.labels == std::vector<int>{0, 1, 2});
}

TEST_CASE("ahc merges the closest angular pair first") {
  std::vector<Embedding> pts{on_circle(0.0), on_circle(5.0 * kPi / 180.0),
                             on_circle(90.0 * kPi / 180.0)};
  std::vector<AhcMerge> merges;
  ClusterAssignment asg = ahc(pts, 2, &merges);
  REQUIRE(merges.size() == 1);
  CHECK(merges[0].a == 0);
  CHECK(merges[0].b == 1);
  CHECK(asg.labels[0] == asg.labels[1]);
  CHECK(asg.labels[2] != asg.labels[0]);
}

TEST_CASE("ahc merge order matches the brute-force average-linkage oracle") {
  // Six hand-placed points with pairwise-distinct linkage distances.
  std::vector<Embedding> pts{on_circle(0.00), on_circle(0.07), on_circle(0.60),
                             on_circle(0.90), on_circle(2.00), on_circle(2.45)};
  std::vector<AhcMerge> merges;
  ahc(pts, 1, &merges);
  std::vector<testutil::OracleMerge> expected = testutil::ahc_oracle_merges(pts, 1);
  REQUIRE(merges.size() == expected.size());
  for (size_t i = 0; i < merges.size(); ++i) {
    CHECK(merges[i].a == expected[i].a);
    CHECK(merges[i].b == expected[i].b);
    CHECK(std::fabs(merges[i].distance - expected[i].distance) <= 1e-12);
  }
}

TEST_CASE("ahc input validation") {
  std::vector<Embedding> with_zero{{1.0, 0.0}, {0.0, 0.0}};
  CHECK_THROWS_AS(ahc(with_zero, 1), std::invalid_argument);
  std::vector<Embedding> fine{{1.0, 0.0}};
  CHECK_THROWS_AS(ahc(fine, 2), std::invalid_argument);
}

TEST_CASE("ahc partition is invariant under input permutation") {
  std::vector<Embedding> pts = two_clouds();
  ClusterAssignment asg = ahc(pts, 2);
  std::vector<size_t> perm(pts.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 5 + 2) % perm.size();
  std::vector<Embedding> permuted;
  for (size_t i : perm) permuted.push_back(pts[i]);
  ClusterAssignment asg_perm = ahc(permuted, 2);
  std::vector<int> unpermuted(pts.size());
  for (size_t i = 0; i < perm.size(); ++i) unpermuted[perm[i]] = asg_perm.labels[i];
  CHECK(testutil::same_partition(asg.labels, unpermuted));
}

TEST_CASE("purity values") {
  ClusterAssignment perfect;
  perfect.labels = {0, 0, 1, 1};
  perfect.k = 2;
  CHECK(purity(perfect, {"A", "A", "B", "B"}) == doctest::Approx(1.0));

  ClusterAssignment lumped;
  lumped.labels = {0, 0, 0, 0};
  lumped.k = 1;
  CHECK(purity(lumped, {"A", "A", "B", "B"}) == doctest::Approx(0.5));

  ClusterAssignment partial;
  partial.labels = {0, 1, 1};
  partial.k = 2;
  CHECK(purity(partial, {"A", "A", "B"}) == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(purity(partial, {"A", "A"}), std::invalid_argument);
}

TEST_CASE("purity is 1 when the assignment refines the truth partition") {
  // 4 clusters over 2 speakers: each cluster is speaker-pure.
  ClusterAssignment refined;
  refined.labels = {0, 0, 1, 2, 2, 3};
  refined.k = 4;
  CHECK(purity(refined, {"A", "A", "A", "B", "B", "B"}) == doctest::Approx(1.0));
}

TEST_CASE("cluster_items dispatches on method") {
  std::vector<Embedding> pts = two_clouds();
  ClusterConfig cfg;
  cfg.k = 2;
  cfg.seed = 58;
  cfg.method = ClusterMethod::kKMeans;
  ClusterAssignment km = cluster_items(pts, cfg);
  cfg.method = ClusterMethod::kAhc;
  ClusterAssignment ag = cluster_items(pts, cfg);
  CHECK(testutil::same_partition(km.labels, ag.labels));
}
