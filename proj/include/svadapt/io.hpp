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

#ifndef SVADAPT_IO_HPP_
#define SVADAPT_IO_HPP_

#include <map>
#include <string>
#include <vector>

#include "svadapt/adapt.hpp"
#include "svadapt/cluster.hpp"
#include "svadapt/core.hpp"
#include "svadapt/corpus.hpp"
#include "svadapt/eval.hpp"
#include "svadapt/model.hpp"

namespace svadapt {

// Segment manifest: one segment per line,
//   <segment_id>\t<recording_id>\t<speaker_id>\t<channel>\t<f1> ... <fF>
void write_manifest(const std::string& path, const PreparedDataset& ds);
PreparedDataset read_manifest(const std::string& path, DatasetRole role);

// Trial list: <segment_id_a>\t<segment_id_b>\t<0|1>
void write_trials(const std::string& path, const std::vector<TrialPair>& pairs);
std::vector<TrialPair> read_trials(const std::string& path);

// Embedding file: header "dim=<D>", then "<id> <v1> ... <vD>" per line.
void write_embeddings(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<Embedding>& embeddings);
std::pair<std::vector<std::string>, std::vector<Embedding>> read_embeddings(const std::string& path);

// Model checkpoint: header "dims F H D C", then named parameter blocks with
// full-precision values. Round-trips bit-exactly.
struct Checkpoint {
  EmbeddingModel model;
  ClassifierHead cls;
  SiameseHead siam;

  bool operator==(const Checkpoint& other) const = default;
};
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Cluster assignment: "<item_id>\t<cluster_id>" per line, plus a trailing
// "# inertia=<value>" comment for k-means runs.
void write_assignment(const std::string& path, const std::vector<std::string>& item_ids,
                      const ClusterAssignment& assignment, bool with_inertia);

// Score file: <segment_id_a>\t<segment_id_b>\t<label>\t<score>
void write_scores(const std::string& path, const std::vector<ScoredTrial>& scored);

// One EER line in the canonical printed form.
std::string format_eer_line(const EerResult& result);

// Adaptation report: one JSON object per line (iteration records, then a
// final line carrying best_iteration and stop_reason).
void write_adapt_report(const std::string& path, const AdaptReport& report);
AdaptReport read_adapt_report(const std::string& path);

// Line-oriented "key = value" file; '#' starts a comment. Duplicate keys are
// errors. Returned in file order.
std::vector<std::pair<std::string, std::string>> read_key_value_file(const std::string& path);

// Training history: "<epoch>\t<train_loss>\t<val_error>" per line.
void write_history(const std::string& path, const TrainHistory& history);

}  // namespace svadapt

#endif  // SVADAPT_IO_HPP_
