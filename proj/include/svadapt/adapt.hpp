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

#ifndef SVADAPT_ADAPT_HPP_
#define SVADAPT_ADAPT_HPP_

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "svadapt/cluster.hpp"
#include "svadapt/core.hpp"
#include "svadapt/corpus.hpp"
#include "svadapt/model.hpp"

namespace svadapt {

/// Technique I clusters every segment embedding independently; Technique II
/// clusters one averaged embedding per original recording and broadcasts the
/// cluster id to all of the recording's segments.
enum class Technique { kI, kII };

std::string technique_name(Technique t);

struct AdaptConfig {
  Technique technique = Technique::kII;
  ClusterConfig clustering;
  int k = 2;  // number of target speakers, assumed known
  int max_iterations = 5;
  TrainConfig train_cfg;  // SI fine-tuning settings for step 4

  AdaptConfig() { train_cfg.init_mode = TrainConfig::InitMode::kFineTune; }
};

struct IterationRecord {
  int iteration = 0;
  double validation_error = 0.0;
  std::optional<double> cluster_purity;  // only when ground truth is available
  std::string checkpoint;                // path when a writer hook is installed
};

enum class StopReason { kErrorRose, kMaxIterations };

std::string stop_reason_name(StopReason reason);

struct AdaptReport {
  std::vector<IterationRecord> records;
  int best_iteration = 0;  // minimizes validation error, earliest on ties
  StopReason stop_reason = StopReason::kMaxIterations;
};

/// Clustering or training failures abort the loop but carry the records
/// accumulated so far.
struct AdaptAborted : std::runtime_error {
  AdaptReport partial;
  AdaptAborted(const std::string& what, AdaptReport report)
      : std::runtime_error(what), partial(std::move(report)) {}
};

/// Embeddings plus the clustering view of them for one technique. Segment
/// embeddings are kept so downstream steps do not recompute them.
struct ClusterInputs {
  std::vector<Embedding> items;
  std::vector<std::string> item_ids;              // segment ids (I) or recording ids (II)
  std::vector<std::vector<size_t>> item_segments; // item -> segment indices
  std::vector<Embedding> segment_embeddings;
};

ClusterInputs build_cluster_inputs(const EmbeddingModel& model,
                                   const std::vector<SegmentRecord>& segments,
                                   Technique technique);

/// Flows cluster ids back to segments; every segment ends up with exactly one
/// pseudo-label in [0, k).
std::vector<int> assign_pseudo_labels(const ClusterAssignment& assignment,
                                      const ClusterInputs& inputs, size_t n_segments);

struct ValidationSplit {
  std::vector<size_t> train_indices;
  std::vector<size_t> val_indices;
  std::vector<int> uncovered_labels;  // pseudo-labels with a single segment
};

/// One randomly chosen segment per pseudo-label goes to validation; labels
/// with a single segment stay entirely in train and are reported uncovered.
ValidationSplit split_hypothesized_validation(const std::vector<int>& labels, Rng& rng);


struct AdaptHooks {
  /// Replaces the computed validation error of an iteration (test seam).
  std::function<std::optional<double>(int iteration)> error_override;
  /// Persists an iteration's parameters; the returned path is recorded.
  std::function<std::string(int iteration, const EmbeddingModel& model,
                            const ClassifierHead& head)> checkpoint_writer;
  /// Observes each iteration's clustering (e.g. to write assignment files).
  std::function<void(int iteration, const ClusterInputs& inputs,
                     const ClusterAssignment& assignment)> on_clustering;
};

struct AdaptResult {
  AdaptReport report;
  EmbeddingModel best_model;
};

/// The unsupervised iterative clustering-training loop. Receives only a
/// pretrained checkpoint and target segments (ground-truth speaker ids, when
/// present, feed the purity diagnostic and nothing else):
///   embed with the current model -> cluster -> pseudo-label -> split ->
///   SI fine-tune with a fresh k-class head -> evaluate, repeating while the
///   validation error strictly decreases. E_0 is the pretrained model's error
///   on a split built from its own clustering: a classifier head is fitted on
///   the pseudo-train split with base and trunk frozen (the pretrained
///   parameters stay bit-identical) and scored on the held-out split.
AdaptResult run_adapt_loop(const EmbeddingModel& pretrained,
                           const std::vector<SegmentRecord>& target_segments,
                           const AdaptConfig& cfg, const AdaptHooks& hooks = {});

}  // namespace svadapt

#endif  // SVADAPT_ADAPT_HPP_
