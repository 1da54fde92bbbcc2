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

#include "svadapt/adapt.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace svadapt {

namespace {

// Per-iteration view of the clustering-driven state.
struct IterationState {
  ClusterInputs inputs;
  ClusterAssignment assignment;
  std::vector<int> labels;
  ValidationSplit split;
  std::optional<double> purity_value;
};

bool ground_truth_available(const std::vector<SegmentRecord>& segments) {
  return std::all_of(segments.begin(), segments.end(),
                     [](const SegmentRecord& s) { return !s.speaker_id.empty(); });
}

}  // namespace

std::string technique_name(Technique t) { return t == Technique::kI ? "I" : "II"; }

std::string stop_reason_name(StopReason reason) {
  return reason == StopReason::kErrorRose ? "ErrorRose" : "MaxIterations";
}

ClusterInputs build_cluster_inputs(const EmbeddingModel& model,
                                   const std::vector<SegmentRecord>& segments,
                                   Technique technique) {
  if (segments.empty()) throw std::invalid_argument("build_cluster_inputs: no segments");
  ClusterInputs out;
  out.segment_embeddings.reserve(segments.size());
  for (const SegmentRecord& seg : segments) {
    out.segment_embeddings.push_back(embed(model, seg.features));
  }

  if (technique == Technique::kI) {
    out.items = out.segment_embeddings;
    out.item_ids.reserve(segments.size());
    out.item_segments.reserve(segments.size());
    for (size_t i = 0; i < segments.size(); ++i) {
      out.item_ids.push_back(segments[i].segment_id);
      out.item_segments.push_back({i});
    }
    return out;
  }

  // Technique II: one averaged embedding per original recording.
  std::vector<std::string> rec_order;
  std::unordered_map<std::string, size_t> rec_index;
  for (size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].recording_id.empty()) {
      throw std::invalid_argument("build_cluster_inputs: Technique II needs recording ids ('" +
                                  segments[i].segment_id + "' has none)");
    }
    auto [it, inserted] = rec_index.try_emplace(segments[i].recording_id, rec_order.size());
    if (inserted) {
      rec_order.push_back(segments[i].recording_id);
      out.item_segments.emplace_back();
    }
    out.item_segments[it->second].push_back(i);
  }
  out.item_ids = rec_order;
  out.items.reserve(rec_order.size());
  for (const std::vector<size_t>& group : out.item_segments) {
    std::vector<Embedding> group_embeddings;
    group_embeddings.reserve(group.size());
    for (size_t i : group) group_embeddings.push_back(out.segment_embeddings[i]);
    out.items.push_back(mean_embedding(group_embeddings));
  }
  return out;
}

std::vector<int> assign_pseudo_labels(const ClusterAssignment& assignment,
                                      const ClusterInputs& inputs, size_t n_segments) {
  if (assignment.labels.size() != inputs.items.size()) {
    throw std::invalid_argument("assign_pseudo_labels: assignment does not cover all items (" +
                                std::to_string(assignment.labels.size()) + " vs " +
                                std::to_string(inputs.items.size()) + ")");
  }
  std::vector<int> labels(n_segments, -1);
  for (size_t item = 0; item < inputs.item_segments.size(); ++item) {
    for (size_t seg : inputs.item_segments[item]) {
      labels[seg] = assignment.labels[item];
    }
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      throw std::invalid_argument("assign_pseudo_labels: segment " + std::to_string(i) +
                                  " not mapped to any item");
    }
  }
  return labels;
}

ValidationSplit split_hypothesized_validation(const std::vector<int>& labels, Rng& rng) {
  std::map<int, std::vector<size_t>> by_label;
  for (size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

  ValidationSplit split;
  std::vector<bool> in_val(labels.size(), false);
  for (const auto& [label, pool] : by_label) {
    if (pool.size() < 2) {
      split.uncovered_labels.push_back(label);
      continue;
    }
    size_t pick = pool[rng.next_below(pool.size())];
    in_val[pick] = true;
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    (in_val[i] ? split.val_indices : split.train_indices).push_back(i);
  }
  return split;
}

AdaptResult run_adapt_loop(const EmbeddingModel& pretrained,
                           const std::vector<SegmentRecord>& target_segments,
                           const AdaptConfig& cfg, const AdaptHooks& hooks) {
  if (target_segments.empty()) throw std::invalid_argument("run_adapt_loop: no target segments");
  if (cfg.k < 2) throw std::invalid_argument("run_adapt_loop: k must be >= 2");
  if (cfg.max_iterations < 1) throw std::invalid_argument("run_adapt_loop: max_iterations must be >= 1");

  const bool have_truth = ground_truth_available(target_segments);
  std::vector<std::string> truth;
  if (have_truth) {
    truth.reserve(target_segments.size());
    for (const SegmentRecord& seg : target_segments) truth.push_back(seg.speaker_id);
  }

  AdaptReport report;
  std::vector<EmbeddingModel> snapshots;

  auto overridden = [&](int iteration, double computed) {
    if (hooks.error_override) {
      std::optional<double> v = hooks.error_override(iteration);
      if (v.has_value()) return *v;
    }
    return computed;
  };

  auto make_state = [&](const EmbeddingModel& model, int iteration) {
    IterationState st;
    st.inputs = build_cluster_inputs(model, target_segments, cfg.technique);
    ClusterConfig ccfg = cfg.clustering;
    ccfg.k = cfg.k;
    ccfg.seed = Rng(cfg.clustering.seed).derive(static_cast<uint64_t>(iteration)).seed();
    st.assignment = cluster_items(st.inputs.items, ccfg);
    if (hooks.on_clustering) hooks.on_clustering(iteration, st.inputs, st.assignment);
    st.labels = assign_pseudo_labels(st.assignment, st.inputs, target_segments.size());
    Rng split_rng = Rng(cfg.train_cfg.seed).derive(0x51000 + static_cast<uint64_t>(iteration));
    st.split = split_hypothesized_validation(st.labels, split_rng);
    if (have_truth) {
      ClusterAssignment segment_view;
      segment_view.labels = st.labels;
      segment_view.k = cfg.k;
      st.purity_value = purity(segment_view, truth);
    }
    return st;
  };

  EmbeddingModel current = pretrained;
  try {
    IterationState state = make_state(current, 0);
    if (state.split.val_indices.empty()) {
      throw std::runtime_error("run_adapt_loop: hypothesized validation set is empty");
    }
    // E_0: the pretrained model's own error on its pseudo-labels. Only a
    // readout head is fitted; base and trunk are frozen so the pretrained
    // parameters are untouched.
    LabeledSet train0 = labeled_from_segments(target_segments, state.labels, &state.split.train_indices);
    LabeledSet val0 = labeled_from_segments(target_segments, state.labels, &state.split.val_indices);
    TrainConfig head_cfg = cfg.train_cfg;
    head_cfg.init_mode = TrainConfig::InitMode::kFineTune;
    head_cfg.freeze = {ParamGroup::kBase, ParamGroup::kTrunk};
    head_cfg.seed = Rng(cfg.train_cfg.seed).derive(0x7e000).seed();
    EmbeddingModel frozen_view = current;
    ClassifierHead head0;
    head0.w = Matrix(cfg.k, current.embedding_dim());
    head0.b.assign(static_cast<size_t>(cfg.k), 0.0);
    TrainHistory history0 = train_si(frozen_view, head0, train0, val0, head_cfg);
    double e0 = overridden(0, history0.best_val_error);

    IterationRecord rec0;
    rec0.iteration = 0;
    rec0.validation_error = e0;
    rec0.cluster_purity = state.purity_value;
    if (hooks.checkpoint_writer) rec0.checkpoint = hooks.checkpoint_writer(0, current, head0);
    report.records.push_back(rec0);
    snapshots.push_back(current);

    int i = 0;
    while (true) {
      if (state.split.val_indices.empty()) {
        throw std::runtime_error("run_adapt_loop: hypothesized validation set is empty");
      }
      LabeledSet train_set =
          labeled_from_segments(target_segments, state.labels, &state.split.train_indices);
      LabeledSet val_set =
          labeled_from_segments(target_segments, state.labels, &state.split.val_indices);

      TrainConfig tc = cfg.train_cfg;
      tc.init_mode = TrainConfig::InitMode::kFineTune;
      tc.seed = Rng(cfg.train_cfg.seed).derive(0x7e000 + static_cast<uint64_t>(i + 1)).seed();

      EmbeddingModel next = current;
      ClassifierHead head;
      head.w = Matrix(cfg.k, next.embedding_dim());
      head.b.assign(static_cast<size_t>(cfg.k), 0.0);
      TrainHistory history = train_si(next, head, train_set, val_set, tc);
      double e_next = overridden(i + 1, history.best_val_error);
      current = std::move(next);

      state = make_state(current, i + 1);
      IterationRecord rec;
      rec.iteration = i + 1;
      rec.validation_error = e_next;
      rec.cluster_purity = state.purity_value;
      if (hooks.checkpoint_writer) rec.checkpoint = hooks.checkpoint_writer(i + 1, current, head);
      report.records.push_back(rec);
      snapshots.push_back(current);

      ++i;
      if (rec.validation_error >= report.records[i - 1].validation_error) {
        report.stop_reason = StopReason::kErrorRose;
        break;
      }
      if (i >= cfg.max_iterations) {
        report.stop_reason = StopReason::kMaxIterations;
        break;
      }
    }
  } catch (const AdaptAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw AdaptAborted(e.what(), report);
  }

  report.best_iteration = 0;
  for (size_t r = 1; r < report.records.size(); ++r) {
    if (report.records[r].validation_error <
        report.records[report.best_iteration].validation_error) {
      report.best_iteration = static_cast<int>(r);
    }
  }
  AdaptResult result;
  result.best_model = snapshots[report.best_iteration];
  result.report = std::move(report);
  return result;
}

}  // namespace svadapt
