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

#ifndef SVADAPT_MODEL_HPP_
#define SVADAPT_MODEL_HPP_

#include <set>
#include <string>
#include <vector>

#include "svadapt/core.hpp"

namespace svadapt {

struct SegmentRecord;

enum class ParamGroup { kBase, kTrunk, kClassifier, kSiamese };

/// Two stacked affine+tanh layers. The base (F -> H) stands in for pretrained
/// lower layers and is frozen in fine-tuning modes; the trunk (H -> D)
/// produces the embedding read out for scoring and clustering.
struct EmbeddingModel {
  Matrix base_w;  // H x F
  Vec base_b;     // H
  Matrix trunk_w; // D x H
  Vec trunk_b;    // D

  int feature_dim() const { return base_w.cols; }
  int hidden_dim() const { return base_w.rows; }
  int embedding_dim() const { return trunk_w.rows; }

  bool operator==(const EmbeddingModel& other) const = default;

  /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] for all parameters.
  static EmbeddingModel init(int feature_dim, int hidden_dim, int embedding_dim, Rng& rng);
};

/// Softmax speaker/cluster classifier over embeddings.
struct ClassifierHead {
  Matrix w;  // C x D
  Vec b;     // C

  int num_classes() const { return w.rows; }
  bool operator==(const ClassifierHead& other) const = default;

  static ClassifierHead init(int num_classes, int embedding_dim, Rng& rng);
};

/// Verification head: sigmoid(w . (e1 * e2) + b), the elementwise-product
/// fusion of the two twin-branch embeddings.
struct SiameseHead {
  Vec w;  // D
  double b = 0.0;

  bool operator==(const SiameseHead& other) const = default;

  static SiameseHead init(int embedding_dim, Rng& rng);
};

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 40;
  int batch_size = 32;
  enum class InitMode { kFromScratch, kFineTune } init_mode = InitMode::kFineTune;
  std::set<ParamGroup> freeze;
  uint64_t seed = 0;

  static TrainConfig si_from_scratch(uint64_t seed);
  /// Fine-tuning keeps the pretrained base frozen; trunk and head train.
  static TrainConfig si_fine_tune(uint64_t seed);
};

/// Two-phase Siamese fine-tuning plan: phase 1 trains only the head with the
/// embedding model frozen, phase 2 trains everything. Epochs split evenly.
struct SiameseTrainConfig {
  double phase1_learning_rate = 0.01;
  double phase2_learning_rate = 0.001;
  int epochs = 20;
  int batch_size = 32;
  uint64_t seed = 0;
};

/// Non-owning view of labeled feature vectors.
struct LabeledSet {
  std::vector<const Vec*> features;
  std::vector<int> labels;
  size_t size() const { return features.size(); }
};

/// Non-owning view of feature-vector pairs with binary labels.
struct PairSet {
  std::vector<const Vec*> a;
  std::vector<const Vec*> b;
  std::vector<int> labels;
  size_t size() const { return a.size(); }
};

/// Class ids from ground-truth speaker ids, classes numbered by ascending
/// speaker id. Optionally reports the id of each class.
std::vector<int> speaker_class_labels(const std::vector<SegmentRecord>& segments,
                                      std::vector<std::string>* class_ids = nullptr);

/// Builds a LabeledSet over segments[indices]; when indices is null, over all.
LabeledSet labeled_from_segments(const std::vector<SegmentRecord>& segments,
                                 const std::vector<int>& labels,
                                 const std::vector<size_t>* indices = nullptr);

/// Resolves trial pairs against a dataset's segments; unknown ids throw.
PairSet resolve_pairs(const std::vector<TrialPair>& pairs,
                      const std::vector<SegmentRecord>& segments);

/// tanh(trunk(tanh(base(x)))).
Embedding embed(const EmbeddingModel& model, const Vec& features);
Vec class_logits(const ClassifierHead& head, const Embedding& e);
/// Numerically stable softmax.
Vec softmax(const Vec& logits);
/// sigmoid(w . (e1 * e2) + b); symmetric in its two embeddings.
double siamese_forward(const SiameseHead& head, const Embedding& e1, const Embedding& e2);

struct ModelGrad {
  Matrix base_w;
  Vec base_b;
  Matrix trunk_w;
  Vec trunk_b;
  static ModelGrad zeros_like(const EmbeddingModel& m);
};
struct ClassifierGrad {
  Matrix w;
  Vec b;
  static ClassifierGrad zeros_like(const ClassifierHead& h);
};
struct SiameseGrad {
  Vec w;
  double b = 0.0;
  static SiameseGrad zeros_like(const SiameseHead& h);
};

/// Mean cross-entropy of the softmax classifier over a labeled batch.
double si_loss(const EmbeddingModel& model, const ClassifierHead& head, const LabeledSet& batch);
/// Same loss plus analytic gradients for every parameter.
double si_loss_grad(const EmbeddingModel& model, const ClassifierHead& head,
                    const LabeledSet& batch, ModelGrad* mg, ClassifierGrad* cg);

/// Mean binary cross-entropy of the Siamese output over a pair batch. Both
/// branches share the one model (weight tying).
double siamese_loss(const EmbeddingModel& model, const SiameseHead& head, const PairSet& batch);
double siamese_loss_grad(const EmbeddingModel& model, const SiameseHead& head,
                         const PairSet& batch, ModelGrad* mg, SiameseGrad* sg);

/// 1 - top-1 accuracy of the classifier head.
double si_validation_error(const EmbeddingModel& model, const ClassifierHead& head,
                           const LabeledSet& val);
/// Fraction of pairs misclassified at the 0.5 operating point.
double siamese_validation_error(const EmbeddingModel& model, const SiameseHead& head,
                                const PairSet& val);

struct EpochStats {
  double train_loss = 0.0;
  double val_error = 0.0;
};
struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;  // index into epochs
  double best_val_error = 0.0;
};

/// Mini-batch SGD for the speaker-identification task. FromScratch
/// reinitializes base+trunk+head from cfg.seed; FineTune keeps base+trunk and
/// reinitializes only the head. Groups listed in cfg.freeze are never updated.
/// Returns the parameters of the epoch with minimum validation error.
TrainHistory train_si(EmbeddingModel& model, ClassifierHead& head, const LabeledSet& train,
                      const LabeledSet& val, const TrainConfig& cfg);

/// Two-phase Siamese fine-tuning on binary-labeled pairs. The head is freshly
/// initialized from cfg.seed; the embedding model is the pretrained input.
/// Returns the parameters of the epoch with minimum validation error.
TrainHistory train_siamese(EmbeddingModel& model, SiameseHead& head, const PairSet& train,
                           const PairSet& val, const SiameseTrainConfig& cfg);

/// Central-finite-difference check of the analytic gradients over every
/// parameter; returns the maximum relative error. epsilon must lie in
/// [1e-7, 1e-3].
double gradient_check_si(const EmbeddingModel& model, const ClassifierHead& head,
                         const LabeledSet& batch, double epsilon);
double gradient_check_siamese(const EmbeddingModel& model, const SiameseHead& head,
                              const PairSet& batch, double epsilon);

}  // namespace svadapt

#endif  // SVADAPT_MODEL_HPP_
