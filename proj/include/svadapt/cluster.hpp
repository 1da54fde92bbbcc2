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

#ifndef SVADAPT_CLUSTER_HPP_
#define SVADAPT_CLUSTER_HPP_

#include <string>
#include <vector>

#include "svadapt/core.hpp"

namespace svadapt {

enum class ClusterMethod { kKMeans, kAhc };

struct ClusterConfig {
  int k = 2;
  ClusterMethod method = ClusterMethod::kKMeans;
  int n_init = 10;
  int max_iter = 300;
  double tol = 1e-6;
  uint64_t seed = 0;
};

struct ClusterAssignment {
  std::vector<int> labels;  // item index -> cluster id in [0, k)
  double inertia = 0.0;     // k-means only
  int k = 0;

  size_t n_items() const { return labels.size(); }
};

struct KMeansRunStats {
  std::vector<double> inertia_per_iter;  // recorded after each assignment step
  int iterations = 0;
};

/// One Lloyd run from a k-means++ seeding. Items must already be normalized
/// if normalization is wanted; kmeans() below handles that.
ClusterAssignment kmeans_single_run(const std::vector<Embedding>& items, int k, int max_iter,
                                    double tol, Rng& rng, KMeansRunStats* stats = nullptr);

/// Best of cfg.n_init k-means++/Lloyd runs by inertia (ties: lowest run
/// index). Items are L2-normalized first so Euclidean inertia tracks cosine
/// geometry; a zero-norm item or fewer than k distinct points is an error.
ClusterAssignment kmeans(const std::vector<Embedding>& items, const ClusterConfig& cfg);

struct AhcMerge {
  int a = 0;  // smaller surviving cluster index
  int b = 0;
  double distance = 0.0;  // average pairwise cosine distance at the merge
};

/// Bottom-up agglomeration under average-linkage cosine distance, stopping at
/// k clusters. Ties merge the lexicographically smallest cluster-index pair;
/// a merged cluster keeps the smaller index. Final clusters are relabeled
/// 0..k-1 in ascending index order.
ClusterAssignment ahc(const std::vector<Embedding>& items, int k,
                      std::vector<AhcMerge>* merges = nullptr);

/// Dispatch on cfg.method.
ClusterAssignment cluster_items(const std::vector<Embedding>& items, const ClusterConfig& cfg);

/// (1/N) * sum over clusters of the majority ground-truth count.
double purity(const ClusterAssignment& assignment, const std::vector<std::string>& truth);

}  // namespace svadapt

#endif  // SVADAPT_CLUSTER_HPP_
