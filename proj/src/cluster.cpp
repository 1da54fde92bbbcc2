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

#include "svadapt/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace svadapt {

namespace {

double dist2(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// Assignment step: nearest centroid by squared Euclidean distance, ties to
// the lowest cluster index. Fills labels and per-point distances, returns
// total inertia.
double assign_points(const std::vector<Embedding>& items, const std::vector<Vec>& centroids,
                     std::vector<int>* labels, std::vector<double>* point_d2) {
  double inertia = 0.0;
  for (size_t i = 0; i < items.size(); ++i) {
    int best = 0;
    double best_d2 = dist2(items[i], centroids[0]);
    for (size_t c = 1; c < centroids.size(); ++c) {
      double d = dist2(items[i], centroids[c]);
      if (d < best_d2) {
        best_d2 = d;
        best = static_cast<int>(c);
      }
    }
    (*labels)[i] = best;
    (*point_d2)[i] = best_d2;
    inertia += best_d2;
  }
  return inertia;
}

// Means for nonempty clusters; empty clusters are reseeded at the point
// farthest from its assigned centroid (each repair consumes a distinct point).
void update_centroids(const std::vector<Embedding>& items, const std::vector<int>& labels,
                      const std::vector<double>& point_d2, std::vector<Vec>* centroids) {
  const size_t k = centroids->size();
  const size_t dim = items.front().size();
  std::vector<Vec> sums(k, Vec(dim, 0.0));
  std::vector<size_t> counts(k, 0);
  for (size_t i = 0; i < items.size(); ++i) {
    counts[labels[i]]++;
    for (size_t d = 0; d < dim; ++d) sums[labels[i]][d] += items[i][d];
  }
  std::vector<bool> taken(items.size(), false);
  for (size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) {
      for (size_t d = 0; d < dim; ++d) (*centroids)[c][d] = sums[c][d] / static_cast<double>(counts[c]);
      continue;
    }
    int far = -1;
    double far_d2 = -1.0;
    for (size_t i = 0; i < items.size(); ++i) {
      if (!taken[i] && point_d2[i] > far_d2) {
        far_d2 = point_d2[i];
        far = static_cast<int>(i);
      }
    }
    if (far < 0) throw std::runtime_error("kmeans: cannot repair empty cluster");
    taken[far] = true;
    (*centroids)[c] = items[far];
  }
}

std::vector<Vec> kmeanspp_seed(const std::vector<Embedding>& items, int k, Rng& rng) {
  const size_t n = items.size();
  std::vector<Vec> centroids;
  centroids.reserve(k);
  centroids.push_back(items[rng.next_below(n)]);
  std::vector<double> d2(n);
  for (size_t i = 0; i < n; ++i) d2[i] = dist2(items[i], centroids[0]);
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (total <= 0.0) {
      throw std::runtime_error("kmeans: k-means++ ran out of distinct points");
    }
    double r = rng.next_double() * total;
    double cum = 0.0;
    size_t pick = n;  // sentinel
    for (size_t i = 0; i < n; ++i) {
      cum += d2[i];
      if (cum > r) {
        pick = i;
        break;
      }
    }
    if (pick == n) {  // numeric edge: r landed at the very top of the scale
      for (size_t i = n; i-- > 0;) {
        if (d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(items[pick]);
    for (size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], dist2(items[i], centroids.back()));
  }
  return centroids;
}

size_t count_distinct(const std::vector<Embedding>& items) {
  std::vector<size_t> order(items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::lexicographical_compare(items[a].begin(), items[a].end(), items[b].begin(),
                                        items[b].end());
  });
  size_t distinct = items.empty() ? 0 : 1;
  for (size_t i = 1; i < order.size(); ++i) {
    if (items[order[i]] != items[order[i - 1]]) ++distinct;
  }
  return distinct;
}

}  // namespace

ClusterAssignment kmeans_single_run(const std::vector<Embedding>& items, int k, int max_iter,
                                    double tol, Rng& rng, KMeansRunStats* stats) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be positive");
  if (items.size() < static_cast<size_t>(k)) {
    throw std::invalid_argument("kmeans: fewer items (" + std::to_string(items.size()) +
                                ") than clusters (" + std::to_string(k) + ")");
  }
  std::vector<Vec> centroids = kmeanspp_seed(items, k, rng);
  std::vector<int> labels(items.size(), 0);
  std::vector<double> point_d2(items.size(), 0.0);

  int iterations = 0;
  for (int iter = 0; iter < max_iter; ++iter) {
    double inertia = assign_points(items, centroids, &labels, &point_d2);
    if (stats) stats->inertia_per_iter.push_back(inertia);
    std::vector<Vec> old = centroids;
    update_centroids(items, labels, point_d2, &centroids);
    double movement = 0.0;
    for (int c = 0; c < k; ++c) movement = std::max(movement, std::sqrt(dist2(old[c], centroids[c])));
    ++iterations;
    if (movement < tol) break;
  }

  // Final assignment against the converged centroids; repair in the unlikely
  // case a cluster ends empty.
  double inertia = assign_points(items, centroids, &labels, &point_d2);
  for (int attempt = 0; attempt < k; ++attempt) {
    std::vector<size_t> counts(static_cast<size_t>(k), 0);
    for (int lab : labels) counts[lab]++;
    bool any_empty = std::any_of(counts.begin(), counts.end(), [](size_t c) { return c == 0; });
    if (!any_empty) break;
    update_centroids(items, labels, point_d2, &centroids);
    inertia = assign_points(items, centroids, &labels, &point_d2);
  }
  if (stats) {
    stats->inertia_per_iter.push_back(inertia);
    stats->iterations = iterations;
  }

  ClusterAssignment out;
  out.labels = std::move(labels);
  out.inertia = inertia;
  out.k = k;
  std::vector<size_t> counts(static_cast<size_t>(k), 0);
  for (int lab : out.labels) counts[lab]++;
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0) throw std::runtime_error("kmeans: empty cluster survived repair");
  }
  return out;
}

ClusterAssignment kmeans(const std::vector<Embedding>& items, const ClusterConfig& cfg) {
  if (cfg.k < 2) throw std::invalid_argument("kmeans: k must be >= 2");
  if (cfg.n_init < 1) throw std::invalid_argument("kmeans: n_init must be >= 1");
  if (cfg.max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");
  if (items.size() < static_cast<size_t>(cfg.k)) {
    throw std::invalid_argument("kmeans: fewer items (" + std::to_string(items.size()) +
                                ") than clusters (" + std::to_string(cfg.k) + ")");
  }

  std::vector<Embedding> normalized;
  normalized.reserve(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    double norm = l2_norm(items[i]);
    if (norm == 0.0) {
      throw std::invalid_argument("kmeans: zero-norm embedding at index " + std::to_string(i));
    }
    Embedding e = items[i];
    for (double& v : e) v /= norm;
    normalized.push_back(std::move(e));
  }
  size_t distinct = count_distinct(normalized);
  if (distinct < static_cast<size_t>(cfg.k)) {
    throw std::invalid_argument("kmeans: only " + std::to_string(distinct) +
                                " distinct points after normalization for k=" + std::to_string(cfg.k));
  }

  Rng master(cfg.seed);
  ClusterAssignment best;
  bool have_best = false;
  for (int run = 0; run < cfg.n_init; ++run) {
    Rng run_rng = master.derive(static_cast<uint64_t>(run));
    ClusterAssignment asg = kmeans_single_run(normalized, cfg.k, cfg.max_iter, cfg.tol, run_rng);
    if (!have_best || asg.inertia < best.inertia) {
      best = std::move(asg);
      have_best = true;
    }
  }
  return best;
}

ClusterAssignment ahc(const std::vector<Embedding>& items, int k, std::vector<AhcMerge>* merges) {
  const size_t n = items.size();
  if (k < 1) throw std::invalid_argument("ahc: k must be positive");
  if (n < static_cast<size_t>(k)) {
    throw std::invalid_argument("ahc: fewer items (" + std::to_string(n) + ") than clusters (" +
                                std::to_string(k) + ")");
  }
  for (size_t i = 0; i < n; ++i) {
    if (l2_norm(items[i]) == 0.0) {
      throw std::invalid_argument("ahc: zero-norm embedding at index " + std::to_string(i));
    }
  }

  // Cached item-level cosine distances; cluster-pair sums updated per merge.
  std::vector<double> pair_sum(n * n, 0.0);
  auto at = [n](size_t i, size_t j) { return i * n + j; };
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double d = 1.0 - cosine_similarity(items[i], items[j]);
      pair_sum[at(i, j)] = d;
      pair_sum[at(j, i)] = d;
    }
  }

  std::vector<bool> active(n, true);
  std::vector<size_t> sizes(n, 1);
  std::vector<std::vector<int>> members(n);
  for (size_t i = 0; i < n; ++i) members[i] = {static_cast<int>(i)};

  size_t active_count = n;
  while (active_count > static_cast<size_t>(k)) {
    double best_avg = std::numeric_limits<double>::infinity();
    size_t best_i = n, best_j = n;
    for (size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        double avg = pair_sum[at(i, j)] / static_cast<double>(sizes[i] * sizes[j]);
        if (avg < best_avg) {  // scan order makes ties lexicographic-smallest
          best_avg = avg;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (merges) {
      merges->push_back(AhcMerge{static_cast<int>(best_i), static_cast<int>(best_j), best_avg});
    }
    // Merge best_j into best_i; the merged cluster keeps the smaller index.
    for (size_t t = 0; t < n; ++t) {
      if (!active[t] || t == best_i || t == best_j) continue;
      double merged = pair_sum[at(best_i, t)] + pair_sum[at(best_j, t)];
      pair_sum[at(best_i, t)] = merged;
      pair_sum[at(t, best_i)] = merged;
    }
    sizes[best_i] += sizes[best_j];
    members[best_i].insert(members[best_i].end(), members[best_j].begin(), members[best_j].end());
    members[best_j].clear();
    active[best_j] = false;
    --active_count;
  }

  ClusterAssignment out;
  out.labels.assign(n, -1);
  out.k = k;
  int next_label = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    for (int m : members[i]) out.labels[m] = next_label;
    ++next_label;
  }
  return out;
}

ClusterAssignment cluster_items(const std::vector<Embedding>& items, const ClusterConfig& cfg) {
  if (cfg.k < 2) throw std::invalid_argument("cluster_items: k must be >= 2");
  if (cfg.method == ClusterMethod::kKMeans) return kmeans(items, cfg);
  return ahc(items, cfg.k);
}

double purity(const ClusterAssignment& assignment, const std::vector<std::string>& truth) {
  if (assignment.labels.size() != truth.size()) {
    throw std::invalid_argument("purity: assignment/truth size mismatch");
  }
  if (assignment.labels.empty()) throw std::invalid_argument("purity: empty assignment");
  std::unordered_map<int, std::unordered_map<std::string, size_t>> counts;
  for (size_t i = 0; i < truth.size(); ++i) counts[assignment.labels[i]][truth[i]]++;
  size_t majority_total = 0;
  for (const auto& [cluster, speakers] : counts) {
    size_t best = 0;
    for (const auto& [speaker, count] : speakers) best = std::max(best, count);
    majority_total += best;
  }
  return static_cast<double>(majority_total) / static_cast<double>(truth.size());
}

}  // namespace svadapt
