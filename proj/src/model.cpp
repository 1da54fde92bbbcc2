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

#include "svadapt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "svadapt/corpus.hpp"

namespace svadapt {

namespace {

void uniform_fill(std::vector<double>& dst, double bound, Rng& rng) {
  for (double& v : dst) v = bound * (2.0 * rng.next_double() - 1.0);
}

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  double es = std::exp(s);
  return es / (1.0 + es);
}

// log(1 + exp(s)) without overflow.
double softplus(double s) {
  if (s > 0.0) return s + std::log1p(std::exp(-s));
  return std::log1p(std::exp(s));
}

struct ForwardCache {
  Vec hidden;     // tanh(base(x))
  Vec embedding;  // tanh(trunk(hidden))
};

ForwardCache forward_cached(const EmbeddingModel& m, const Vec& x) {
  ForwardCache fc;
  fc.hidden = matvec(m.base_w, x);
  for (size_t i = 0; i < fc.hidden.size(); ++i) fc.hidden[i] = std::tanh(fc.hidden[i] + m.base_b[i]);
  fc.embedding = matvec(m.trunk_w, fc.hidden);
  for (size_t i = 0; i < fc.embedding.size(); ++i) {
    fc.embedding[i] = std::tanh(fc.embedding[i] + m.trunk_b[i]);
  }
  return fc;
}

// Accumulates d(loss)/d(model params) given d(loss)/d(embedding).
void backprop_embedding(const EmbeddingModel& m, const Vec& x, const ForwardCache& fc,
                        const Vec& d_embedding, ModelGrad* mg) {
  const int hid = m.hidden_dim();
  const int emb = m.embedding_dim();
  const int feat = m.feature_dim();

  Vec da2(static_cast<size_t>(emb));
  for (int d = 0; d < emb; ++d) {
    da2[d] = d_embedding[d] * (1.0 - fc.embedding[d] * fc.embedding[d]);
  }
  Vec dh(static_cast<size_t>(hid), 0.0);
  for (int d = 0; d < emb; ++d) {
    mg->trunk_b[d] += da2[d];
    for (int j = 0; j < hid; ++j) {
      mg->trunk_w.at(d, j) += da2[d] * fc.hidden[j];
      dh[j] += m.trunk_w.at(d, j) * da2[d];
    }
  }
  for (int i = 0; i < hid; ++i) {
    double da1 = dh[i] * (1.0 - fc.hidden[i] * fc.hidden[i]);
    mg->base_b[i] += da1;
    for (int j = 0; j < feat; ++j) mg->base_w.at(i, j) += da1 * x[j];
  }
}

void scale_grad(ModelGrad* mg, double s) {
  for (double& v : mg->base_w.data) v *= s;
  for (double& v : mg->base_b) v *= s;
  for (double& v : mg->trunk_w.data) v *= s;
  for (double& v : mg->trunk_b) v *= s;
}

bool frozen(const std::set<ParamGroup>& freeze, ParamGroup g) { return freeze.count(g) > 0; }

void sgd_step_model(EmbeddingModel& m, const ModelGrad& mg, double lr,
                    const std::set<ParamGroup>& freeze) {
  if (!frozen(freeze, ParamGroup::kBase)) {
    for (size_t i = 0; i < m.base_w.data.size(); ++i) m.base_w.data[i] -= lr * mg.base_w.data[i];
    for (size_t i = 0; i < m.base_b.size(); ++i) m.base_b[i] -= lr * mg.base_b[i];
  }
  if (!frozen(freeze, ParamGroup::kTrunk)) {
    for (size_t i = 0; i < m.trunk_w.data.size(); ++i) m.trunk_w.data[i] -= lr * mg.trunk_w.data[i];
    for (size_t i = 0; i < m.trunk_b.size(); ++i) m.trunk_b[i] -= lr * mg.trunk_b[i];
  }
}

LabeledSet view_batch(const LabeledSet& full, const std::vector<size_t>& order, size_t begin,
                      size_t end) {
  LabeledSet b;
  b.features.reserve(end - begin);
  b.labels.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) {
    b.features.push_back(full.features[order[i]]);
    b.labels.push_back(full.labels[order[i]]);
  }
  return b;
}

PairSet view_pair_batch(const PairSet& full, const std::vector<size_t>& order, size_t begin,
                        size_t end) {
  PairSet b;
  for (size_t i = begin; i < end; ++i) {
    b.a.push_back(full.a[order[i]]);
    b.b.push_back(full.b[order[i]]);
    b.labels.push_back(full.labels[order[i]]);
  }
  return b;
}

void validate_labeled(const LabeledSet& set, int feature_dim, int num_classes, const char* what) {
  for (size_t i = 0; i < set.size(); ++i) {
    if (static_cast<int>(set.features[i]->size()) != feature_dim) {
      throw std::invalid_argument(std::string(what) + ": feature dimension mismatch");
    }
    if (set.labels[i] < 0 || set.labels[i] >= num_classes) {
      throw std::invalid_argument(std::string(what) + ": label " + std::to_string(set.labels[i]) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

std::vector<double*> collect_params(EmbeddingModel& m) {
  std::vector<double*> ps;
  for (double& v : m.base_w.data) ps.push_back(&v);
  for (double& v : m.base_b) ps.push_back(&v);
  for (double& v : m.trunk_w.data) ps.push_back(&v);
  for (double& v : m.trunk_b) ps.push_back(&v);
  return ps;
}

std::vector<double> flatten_grad(const ModelGrad& mg) {
  std::vector<double> g;
  g.insert(g.end(), mg.base_w.data.begin(), mg.base_w.data.end());
  g.insert(g.end(), mg.base_b.begin(), mg.base_b.end());
  g.insert(g.end(), mg.trunk_w.data.begin(), mg.trunk_w.data.end());
  g.insert(g.end(), mg.trunk_b.begin(), mg.trunk_b.end());
  return g;
}

void require_epsilon(double epsilon) {
  if (epsilon < 1e-7 || epsilon > 1e-3) {
    throw std::invalid_argument("gradient_check: epsilon must lie in [1e-7, 1e-3]");
  }
}

// Max relative error between analytic and numeric gradients. The denominator
// trusts the numeric value, floored so that near-zero gradients do not blow
// up finite-difference noise.
double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double gmax = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    gmax = std::max(gmax, std::max(std::fabs(analytic[i]), std::fabs(numeric[i])));
  }
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    double denom = std::max(std::fabs(numeric[i]), std::max(1e-3 * gmax, 1e-12));
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace

EmbeddingModel EmbeddingModel::init(int feature_dim, int hidden_dim, int embedding_dim, Rng& rng) {
  if (feature_dim <= 0 || hidden_dim <= 0 || embedding_dim <= 0) {
    throw std::invalid_argument("EmbeddingModel::init: dimensions must be positive");
  }
  EmbeddingModel m;
  m.base_w = Matrix(hidden_dim, feature_dim);
  m.base_b.assign(static_cast<size_t>(hidden_dim), 0.0);
  m.trunk_w = Matrix(embedding_dim, hidden_dim);
  m.trunk_b.assign(static_cast<size_t>(embedding_dim), 0.0);
  uniform_fill(m.base_w.data, 1.0 / std::sqrt(static_cast<double>(feature_dim)), rng);
  uniform_fill(m.base_b, 1.0 / std::sqrt(static_cast<double>(feature_dim)), rng);
  uniform_fill(m.trunk_w.data, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  uniform_fill(m.trunk_b, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  return m;
}

ClassifierHead ClassifierHead::init(int num_classes, int embedding_dim, Rng& rng) {
  if (num_classes < 2) throw std::invalid_argument("ClassifierHead::init: need at least 2 classes");
  ClassifierHead h;
  h.w = Matrix(num_classes, embedding_dim);
  h.b.assign(static_cast<size_t>(num_classes), 0.0);
  uniform_fill(h.w.data, 1.0 / std::sqrt(static_cast<double>(embedding_dim)), rng);
  uniform_fill(h.b, 1.0 / std::sqrt(static_cast<double>(embedding_dim)), rng);
  return h;
}

SiameseHead SiameseHead::init(int embedding_dim, Rng& rng) {
  SiameseHead h;
  h.w.assign(static_cast<size_t>(embedding_dim), 0.0);
  uniform_fill(h.w, 1.0 / std::sqrt(static_cast<double>(embedding_dim)), rng);
  h.b = (2.0 * rng.next_double() - 1.0) / std::sqrt(static_cast<double>(embedding_dim));
  return h;
}

TrainConfig TrainConfig::si_from_scratch(uint64_t seed) {
  TrainConfig cfg;
  cfg.init_mode = InitMode::kFromScratch;
  cfg.seed = seed;
  return cfg;
}

TrainConfig TrainConfig::si_fine_tune(uint64_t seed) {
  // Fine-tuning starts from the pretrained base+trunk and retrains all of it;
  // only the head is reinitialized. Callers that want a hard-frozen base add
  // kBase to the freeze set.
  TrainConfig cfg;
  cfg.init_mode = InitMode::kFineTune;
  cfg.seed = seed;
  return cfg;
}

std::vector<int> speaker_class_labels(const std::vector<SegmentRecord>& segments,
                                      std::vector<std::string>* class_ids) {
  std::vector<std::string> ids;
  for (const SegmentRecord& seg : segments) {
    if (seg.speaker_id.empty()) {
      throw std::invalid_argument("speaker_class_labels: segment '" + seg.segment_id +
                                  "' has no speaker id");
    }
    ids.push_back(seg.speaker_id);
  }
  std::vector<std::string> distinct = ids;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::unordered_map<std::string, int> to_class;
  for (size_t i = 0; i < distinct.size(); ++i) to_class[distinct[i]] = static_cast<int>(i);
  std::vector<int> labels;
  labels.reserve(ids.size());
  for (const std::string& id : ids) labels.push_back(to_class[id]);
  if (class_ids) *class_ids = std::move(distinct);
  return labels;
}

LabeledSet labeled_from_segments(const std::vector<SegmentRecord>& segments,
                                 const std::vector<int>& labels,
                                 const std::vector<size_t>* indices) {
  if (segments.size() != labels.size()) {
    throw std::invalid_argument("labeled_from_segments: segments/labels size mismatch");
  }
  LabeledSet set;
  if (indices) {
    for (size_t i : *indices) {
      set.features.push_back(&segments[i].features);
      set.labels.push_back(labels[i]);
    }
  } else {
    for (size_t i = 0; i < segments.size(); ++i) {
      set.features.push_back(&segments[i].features);
      set.labels.push_back(labels[i]);
    }
  }
  return set;
}

PairSet resolve_pairs(const std::vector<TrialPair>& pairs,
                      const std::vector<SegmentRecord>& segments) {
  std::unordered_map<std::string, const Vec*> by_id;
  by_id.reserve(segments.size());
  for (const SegmentRecord& seg : segments) by_id[seg.segment_id] = &seg.features;
  PairSet set;
  for (const TrialPair& p : pairs) {
    auto ia = by_id.find(p.seg_a);
    auto ib = by_id.find(p.seg_b);
    if (ia == by_id.end()) throw std::runtime_error("resolve_pairs: unknown segment id '" + p.seg_a + "'");
    if (ib == by_id.end()) throw std::runtime_error("resolve_pairs: unknown segment id '" + p.seg_b + "'");
    set.a.push_back(ia->second);
    set.b.push_back(ib->second);
    set.labels.push_back(p.label);
  }
  return set;
}

Embedding embed(const EmbeddingModel& model, const Vec& features) {
  return forward_cached(model, features).embedding;
}

Vec class_logits(const ClassifierHead& head, const Embedding& e) {
  Vec z = matvec(head.w, e);
  for (size_t c = 0; c < z.size(); ++c) z[c] += head.b[c];
  return z;
}

Vec softmax(const Vec& logits) {
  double zmax = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - zmax);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double siamese_forward(const SiameseHead& head, const Embedding& e1, const Embedding& e2) {
  if (e1.size() != e2.size() || e1.size() != head.w.size()) {
    throw std::invalid_argument("siamese_forward: dimension mismatch");
  }
  double s = head.b;
  for (size_t i = 0; i < e1.size(); ++i) s += head.w[i] * (e1[i] * e2[i]);
  return sigmoid(s);
}

ModelGrad ModelGrad::zeros_like(const EmbeddingModel& m) {
  ModelGrad g;
  g.base_w = Matrix(m.base_w.rows, m.base_w.cols);
  g.base_b.assign(m.base_b.size(), 0.0);
  g.trunk_w = Matrix(m.trunk_w.rows, m.trunk_w.cols);
  g.trunk_b.assign(m.trunk_b.size(), 0.0);
  return g;
}

ClassifierGrad ClassifierGrad::zeros_like(const ClassifierHead& h) {
  ClassifierGrad g;
  g.w = Matrix(h.w.rows, h.w.cols);
  g.b.assign(h.b.size(), 0.0);
  return g;
}

SiameseGrad SiameseGrad::zeros_like(const SiameseHead& h) {
  SiameseGrad g;
  g.w.assign(h.w.size(), 0.0);
  g.b = 0.0;
  return g;
}

double si_loss(const EmbeddingModel& model, const ClassifierHead& head, const LabeledSet& batch) {
  return si_loss_grad(model, head, batch, nullptr, nullptr);
}

double si_loss_grad(const EmbeddingModel& model, const ClassifierHead& head,
                    const LabeledSet& batch, ModelGrad* mg, ClassifierGrad* cg) {
  if (batch.size() == 0) throw std::invalid_argument("si_loss: empty batch");
  const int num_classes = head.num_classes();
  double total = 0.0;
  for (size_t n = 0; n < batch.size(); ++n) {
    int y = batch.labels[n];
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("si_loss: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
    ForwardCache fc = forward_cached(model, *batch.features[n]);
    Vec z = class_logits(head, fc.embedding);
    double zmax = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - zmax);
    lse = zmax + std::log(lse);
    total += lse - z[y];

    if (mg && cg) {
      Vec dz = softmax(z);
      dz[y] -= 1.0;
      Vec de(fc.embedding.size(), 0.0);
      for (int c = 0; c < num_classes; ++c) {
        cg->b[c] += dz[c];
        for (size_t d = 0; d < fc.embedding.size(); ++d) {
          cg->w.at(c, static_cast<int>(d)) += dz[c] * fc.embedding[d];
          de[d] += head.w.at(c, static_cast<int>(d)) * dz[c];
        }
      }
      backprop_embedding(model, *batch.features[n], fc, de, mg);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (mg && cg) {
    scale_grad(mg, inv);
    for (double& v : cg->w.data) v *= inv;
    for (double& v : cg->b) v *= inv;
  }
  return total * inv;
}

double siamese_loss(const EmbeddingModel& model, const SiameseHead& head, const PairSet& batch) {
  return siamese_loss_grad(model, head, batch, nullptr, nullptr);
}

double siamese_loss_grad(const EmbeddingModel& model, const SiameseHead& head,
                         const PairSet& batch, ModelGrad* mg, SiameseGrad* sg) {
  if (batch.size() == 0) throw std::invalid_argument("siamese_loss: empty batch");
  const size_t emb = head.w.size();
  double total = 0.0;
  for (size_t n = 0; n < batch.size(); ++n) {
    int y = batch.labels[n];
    if (y != 0 && y != 1) {
      throw std::invalid_argument("siamese_loss: label must be 0 or 1");
    }
    ForwardCache f1 = forward_cached(model, *batch.a[n]);
    ForwardCache f2 = forward_cached(model, *batch.b[n]);
    double s = head.b;
    for (size_t d = 0; d < emb; ++d) s += head.w[d] * f1.embedding[d] * f2.embedding[d];
    // BCE on sigmoid(s): softplus(s) - y*s is the stable form.
    total += softplus(s) - static_cast<double>(y) * s;

    if (mg && sg) {
      double ds = sigmoid(s) - static_cast<double>(y);
      sg->b += ds;
      Vec de1(emb), de2(emb);
      for (size_t d = 0; d < emb; ++d) {
        sg->w[d] += ds * f1.embedding[d] * f2.embedding[d];
        de1[d] = ds * head.w[d] * f2.embedding[d];
        de2[d] = ds * head.w[d] * f1.embedding[d];
      }
      backprop_embedding(model, *batch.a[n], f1, de1, mg);
      backprop_embedding(model, *batch.b[n], f2, de2, mg);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  if (mg && sg) {
    scale_grad(mg, inv);
    for (double& v : sg->w) v *= inv;
    sg->b *= inv;
  }
  return total * inv;
}

double si_validation_error(const EmbeddingModel& model, const ClassifierHead& head,
                           const LabeledSet& val) {
  if (val.size() == 0) throw std::invalid_argument("si_validation_error: empty validation set");
  size_t correct = 0;
  for (size_t n = 0; n < val.size(); ++n) {
    Vec z = class_logits(head, embed(model, *val.features[n]));
    int best = 0;
    for (size_t c = 1; c < z.size(); ++c) {
      if (z[c] > z[best]) best = static_cast<int>(c);
    }
    if (best == val.labels[n]) ++correct;
  }
  return 1.0 - static_cast<double>(correct) / static_cast<double>(val.size());
}

double siamese_validation_error(const EmbeddingModel& model, const SiameseHead& head,
                                const PairSet& val) {
  if (val.size() == 0) throw std::invalid_argument("siamese_validation_error: empty validation set");
  size_t correct = 0;
  for (size_t n = 0; n < val.size(); ++n) {
    double p = siamese_forward(head, embed(model, *val.a[n]), embed(model, *val.b[n]));
    int decision = p >= 0.5 ? 1 : 0;
    if (decision == val.labels[n]) ++correct;
  }
  return 1.0 - static_cast<double>(correct) / static_cast<double>(val.size());
}

TrainHistory train_si(EmbeddingModel& model, ClassifierHead& head, const LabeledSet& train,
                      const LabeledSet& val, const TrainConfig& cfg) {
  if (train.size() == 0) throw std::invalid_argument("train_si: empty training set");
  if (val.size() == 0) throw std::invalid_argument("train_si: empty validation set");
  if (cfg.learning_rate < 0.0) throw std::invalid_argument("train_si: negative learning rate");
  if (cfg.epochs < 1) throw std::invalid_argument("train_si: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_si: batch_size must be >= 1");

  Rng rng(cfg.seed);
  if (cfg.init_mode == TrainConfig::InitMode::kFromScratch) {
    model = EmbeddingModel::init(model.feature_dim(), model.hidden_dim(), model.embedding_dim(), rng);
  }
  head = ClassifierHead::init(head.num_classes(), model.embedding_dim(), rng);

  validate_labeled(train, model.feature_dim(), head.num_classes(), "train_si(train)");
  validate_labeled(val, model.feature_dim(), head.num_classes(), "train_si(val)");

  TrainHistory history;
  history.best_val_error = std::numeric_limits<double>::infinity();
  EmbeddingModel best_model = model;
  ClassifierHead best_head = head;

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      size_t end = std::min(order.size(), begin + cfg.batch_size);
      LabeledSet batch = view_batch(train, order, begin, end);
      ModelGrad mg = ModelGrad::zeros_like(model);
      ClassifierGrad cg = ClassifierGrad::zeros_like(head);
      double loss = si_loss_grad(model, head, batch, &mg, &cg);
      loss_sum += loss * static_cast<double>(end - begin);
      sgd_step_model(model, mg, cfg.learning_rate, cfg.freeze);
      if (!frozen(cfg.freeze, ParamGroup::kClassifier)) {
        for (size_t i = 0; i < head.w.data.size(); ++i) head.w.data[i] -= cfg.learning_rate * cg.w.data[i];
        for (size_t i = 0; i < head.b.size(); ++i) head.b[i] -= cfg.learning_rate * cg.b[i];
      }
    }
    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(train.size());
    stats.val_error = si_validation_error(model, head, val);
    history.epochs.push_back(stats);
    if (stats.val_error < history.best_val_error) {
      history.best_val_error = stats.val_error;
      history.best_epoch = epoch;
      best_model = model;
      best_head = head;
    }
  }
  model = std::move(best_model);
  head = std::move(best_head);
  return history;
}

TrainHistory train_siamese(EmbeddingModel& model, SiameseHead& head, const PairSet& train,
                           const PairSet& val, const SiameseTrainConfig& cfg) {
  if (train.size() == 0) throw std::invalid_argument("train_siamese: empty training pair list");
  if (val.size() == 0) throw std::invalid_argument("train_siamese: empty validation pair list");
  if (cfg.epochs < 1) throw std::invalid_argument("train_siamese: epochs must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_siamese: batch_size must be >= 1");

  Rng rng(cfg.seed);
  head = SiameseHead::init(model.embedding_dim(), rng);

  TrainHistory history;
  history.best_val_error = std::numeric_limits<double>::infinity();
  EmbeddingModel best_model = model;
  SiameseHead best_head = head;

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const int phase1_epochs = cfg.epochs / 2;
  const std::set<ParamGroup> frozen_backbone = {ParamGroup::kBase, ParamGroup::kTrunk};
  const std::set<ParamGroup> no_freeze;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool phase1 = epoch < phase1_epochs;
    const double lr = phase1 ? cfg.phase1_learning_rate : cfg.phase2_learning_rate;
    const std::set<ParamGroup>& freeze = phase1 ? frozen_backbone : no_freeze;
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      size_t end = std::min(order.size(), begin + cfg.batch_size);
      PairSet batch = view_pair_batch(train, order, begin, end);
      ModelGrad mg = ModelGrad::zeros_like(model);
      SiameseGrad sg = SiameseGrad::zeros_like(head);
      double loss = siamese_loss_grad(model, head, batch, &mg, &sg);
      loss_sum += loss * static_cast<double>(end - begin);
      sgd_step_model(model, mg, lr, freeze);
      for (size_t i = 0; i < head.w.size(); ++i) head.w[i] -= lr * sg.w[i];
      head.b -= lr * sg.b;
    }
    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(train.size());
    stats.val_error = siamese_validation_error(model, head, val);
    history.epochs.push_back(stats);
    if (stats.val_error < history.best_val_error) {
      history.best_val_error = stats.val_error;
      history.best_epoch = epoch;
      best_model = model;
      best_head = head;
    }
  }
  model = std::move(best_model);
  head = std::move(best_head);
  return history;
}

double gradient_check_si(const EmbeddingModel& model, const ClassifierHead& head,
                         const LabeledSet& batch, double epsilon) {
  require_epsilon(epsilon);
  EmbeddingModel m = model;
  ClassifierHead h = head;

  ModelGrad mg = ModelGrad::zeros_like(m);
  ClassifierGrad cg = ClassifierGrad::zeros_like(h);
  si_loss_grad(m, h, batch, &mg, &cg);
  std::vector<double> analytic = flatten_grad(mg);
  analytic.insert(analytic.end(), cg.w.data.begin(), cg.w.data.end());
  analytic.insert(analytic.end(), cg.b.begin(), cg.b.end());

  std::vector<double*> params = collect_params(m);
  for (double& v : h.w.data) params.push_back(&v);
  for (double& v : h.b) params.push_back(&v);

  std::vector<double> numeric(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    double saved = *params[i];
    *params[i] = saved + epsilon;
    double lp = si_loss(m, h, batch);
    *params[i] = saved - epsilon;
    double lm = si_loss(m, h, batch);
    *params[i] = saved;
    numeric[i] = (lp - lm) / (2.0 * epsilon);
  }
  return max_relative_error(analytic, numeric);
}

double gradient_check_siamese(const EmbeddingModel& model, const SiameseHead& head,
                              const PairSet& batch, double epsilon) {
  require_epsilon(epsilon);
  EmbeddingModel m = model;
  SiameseHead h = head;

  ModelGrad mg = ModelGrad::zeros_like(m);
  SiameseGrad sg = SiameseGrad::zeros_like(h);
  siamese_loss_grad(m, h, batch, &mg, &sg);
  std::vector<double> analytic = flatten_grad(mg);
  analytic.insert(analytic.end(), sg.w.begin(), sg.w.end());
  analytic.push_back(sg.b);

  std::vector<double*> params = collect_params(m);
  for (double& v : h.w) params.push_back(&v);
  params.push_back(&h.b);

  std::vector<double> numeric(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    double saved = *params[i];
    *params[i] = saved + epsilon;
    double lp = siamese_loss(m, h, batch);
    *params[i] = saved - epsilon;
    double lm = siamese_loss(m, h, batch);
    *params[i] = saved;
    numeric[i] = (lp - lm) / (2.0 * epsilon);
  }
  return max_relative_error(analytic, numeric);
}

}  // namespace svadapt
