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
#include "svadapt/corpus.hpp"
#include "svadapt/model.hpp"
#include "test_util.hpp"

using namespace svadapt;

namespace {

EmbeddingModel zero_model(int feat, int hid, int emb) {
  EmbeddingModel m;
  m.base_w = Matrix(hid, feat);
  m.base_b.assign(hid, 0.0);
  m.trunk_w = Matrix(emb, hid);
  m.trunk_b.assign(emb, 0.0);
  return m;
}

// Two well-separated labeled blobs for small training runs.
struct TinyProblem {
  std::vector<SegmentRecord> segments;
  std::vector<int> labels;
  std::vector<size_t> train_idx;
  std::vector<size_t> val_idx;
};

TinyProblem two_speaker_problem(uint64_t seed) {
  TinyProblem p;
  Rng rng(seed);
  PreparedDataset ds = testutil::make_blob_dataset(2, 10, 8, 3.0, 0.1, rng);
  p.segments = ds.segments;
  p.labels = speaker_class_labels(p.segments);
  for (size_t i = 0; i < p.segments.size(); ++i) {
    // hold out the first segment of each speaker for validation
    if (i % 10 == 0) {
      p.val_idx.push_back(i);
    } else {
      p.train_idx.push_back(i);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("embed of the zero model is the zero vector") {
  EmbeddingModel m = zero_model(4, 3, 2);
  Embedding e = embed(m, {1.0, -2.0, 0.5, 3.0});
  for (double v : e) CHECK(v == 0.0);  // tanh(0) = 0
}

TEST_CASE("embed is deterministic and matches a straight-line recomputation") {
  Rng rng(21);
  EmbeddingModel m = EmbeddingModel::init(6, 5, 4, rng);
  Vec x = gaussian_vec(6, 1.0, rng);
  Embedding e1 = embed(m, x);
  Embedding e2 = embed(m, x);
  CHECK(e1 == e2);

  // Independent recomputation of the two affine+tanh layers.
  Vec h(5, 0.0);
  for (int i = 0; i < 5; ++i) {
    double acc = m.base_b[i];
    for (int j = 0; j < 6; ++j) acc += m.base_w.at(i, j) * x[j];
    h[i] = std::tanh(acc);
  }
  for (int d = 0; d < 4; ++d) {
    double acc = m.trunk_b[d];
    for (int j = 0; j < 5; ++j) acc += m.trunk_w.at(d, j) * h[j];
    CHECK(e1[d] == doctest::Approx(std::tanh(acc)).epsilon(1e-15));
  }

  CHECK_THROWS_AS(embed(m, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("softmax sums to one") {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    Vec logits = gaussian_vec(7, 5.0, rng);
    Vec p = softmax(logits);
    double total = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      total += v;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("si_loss on uniform predictions equals ln(C)") {
  Rng rng(23);
  EmbeddingModel m = EmbeddingModel::init(6, 5, 4, rng);
  ClassifierHead head;
  head.w = Matrix(5, 4);  // zero weights -> uniform softmax
  head.b.assign(5, 0.0);
  Vec x1 = gaussian_vec(6, 1.0, rng);
  Vec x2 = gaussian_vec(6, 1.0, rng);
  LabeledSet batch;
  batch.features = {&x1, &x2};
  batch.labels = {0, 3};
  CHECK(std::fabs(si_loss(m, head, batch) - std::log(5.0)) <= 1e-9);
}

TEST_CASE("si_loss approaches zero for large-margin correct logits") {
  EmbeddingModel m = zero_model(3, 3, 2);  // embedding is always zero
  ClassifierHead head;
  head.w = Matrix(4, 2);
  head.b.assign(4, -50.0);
  head.b[2] = 50.0;
  Vec x{0.0, 0.0, 0.0};
  LabeledSet batch;
  batch.features = {&x, &x};
  batch.labels = {2, 2};
  CHECK(si_loss(m, head, batch) <= 1e-9);
}

TEST_CASE("si_loss matches a brute-force scalar recomputation") {
  Rng rng(24);
  EmbeddingModel m = EmbeddingModel::init(5, 4, 3, rng);
  ClassifierHead head = ClassifierHead::init(3, 3, rng);
  std::vector<Vec> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(gaussian_vec(5, 1.0, rng));
  LabeledSet batch;
  std::vector<int> labels{0, 2, 1, 2};
  for (int i = 0; i < 4; ++i) {
    batch.features.push_back(&xs[i]);
    batch.labels.push_back(labels[i]);
  }

  // Oracle: -mean log softmax[label], all scalar ops written out.
  double expected = 0.0;
  for (int i = 0; i < 4; ++i) {
    Embedding e = embed(m, xs[i]);
    std::vector<double> z(3, 0.0);
    for (int c = 0; c < 3; ++c) {
      z[c] = head.b[c];
      for (int d = 0; d < 3; ++d) z[c] += head.w.at(c, d) * e[d];
    }
    double denom = 0.0;
    for (int c = 0; c < 3; ++c) denom += std::exp(z[c]);
    expected += -std::log(std::exp(z[labels[i]]) / denom);
  }
  expected /= 4.0;
  CHECK(si_loss(m, head, batch) == doctest::Approx(expected).epsilon(1e-12));

  LabeledSet bad = batch;
  bad.labels[0] = 7;
  CHECK_THROWS_AS(si_loss(m, head, bad), std::invalid_argument);
}

TEST_CASE("siamese_forward basic values and symmetry") {
  SiameseHead zero;
  zero.w = {0.0, 0.0};
  zero.b = 0.0;
  CHECK(siamese_forward(zero, {1.0, -3.0}, {2.0, 5.0}) == doctest::Approx(0.5).epsilon(1e-15));

  SiameseHead h;
  h.w = {1.0, 1.0};
  h.b = 0.0;
  // dot([1,1],[3,8]) = 11, then sigmoid
  double expected = 1.0 / (1.0 + std::exp(-11.0));
  CHECK(siamese_forward(h, {1.0, 2.0}, {3.0, 4.0}) == doctest::Approx(expected).epsilon(1e-12));

  Rng rng(25);
  SiameseHead rh = SiameseHead::init(6, rng);
  for (int trial = 0; trial < 100; ++trial) {
    Vec a = gaussian_vec(6, 1.0, rng);
    Vec b = gaussian_vec(6, 1.0, rng);
    CHECK(siamese_forward(rh, a, b) == siamese_forward(rh, b, a));
  }

  CHECK_THROWS_AS(siamese_forward(h, {1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("gradient checks pass for both heads") {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    EmbeddingModel m = EmbeddingModel::init(6, 5, 4, rng);
    ClassifierHead cls = ClassifierHead::init(3, 4, rng);
    SiameseHead siam = SiameseHead::init(4, rng);

    std::vector<Vec> xs;
    for (int i = 0; i < 4; ++i) xs.push_back(gaussian_vec(6, 1.0, rng));
    LabeledSet batch;
    batch.features = {&xs[0], &xs[1], &xs[2], &xs[3]};
    batch.labels = {0, 1, 2, 1};
    CHECK(gradient_check_si(m, cls, batch, 1e-5) < 1e-5);

    PairSet pairs;
    pairs.a = {&xs[0], &xs[1], &xs[2]};
    pairs.b = {&xs[1], &xs[2], &xs[3]};
    pairs.labels = {1, 0, 1};
    CHECK(gradient_check_siamese(m, siam, pairs, 1e-5) < 1e-5);
  }
}

TEST_CASE("gradient check flags a deliberately doubled gradient") {
  Rng rng(26);
  EmbeddingModel m = EmbeddingModel::init(4, 3, 3, rng);
  ClassifierHead cls = ClassifierHead::init(3, 3, rng);
  std::vector<Vec> xs;
  for (int i = 0; i < 3; ++i) xs.push_back(gaussian_vec(4, 1.0, rng));
  LabeledSet batch;
  batch.features = {&xs[0], &xs[1], &xs[2]};
  batch.labels = {0, 1, 2};

  // Numeric gradients by hand, then compare against doubled analytic ones
  // through the same relative-error metric the library check uses.
  ModelGrad mg = ModelGrad::zeros_like(m);
  ClassifierGrad cg = ClassifierGrad::zeros_like(cls);
  si_loss_grad(m, cls, batch, &mg, &cg);
  std::vector<double> analytic;
  for (double v : mg.base_w.data) analytic.push_back(2.0 * v);
  for (double v : mg.base_b) analytic.push_back(2.0 * v);

  const double eps = 1e-5;
  std::vector<double> numeric;
  EmbeddingModel probe = m;
  for (size_t i = 0; i < probe.base_w.data.size() + probe.base_b.size(); ++i) {
    double* p = i < probe.base_w.data.size() ? &probe.base_w.data[i]
                                             : &probe.base_b[i - probe.base_w.data.size()];
    double saved = *p;
    *p = saved + eps;
    double lp = si_loss(probe, cls, batch);
    *p = saved - eps;
    double lm = si_loss(probe, cls, batch);
    *p = saved;
    numeric.push_back((lp - lm) / (2.0 * eps));
  }

  double gmax = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    gmax = std::max(gmax, std::max(std::fabs(analytic[i]), std::fabs(numeric[i])));
  }
  double worst = 0.0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    double denom = std::max(std::fabs(numeric[i]), std::max(1e-3 * gmax, 1e-12));
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  CHECK(worst == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("gradient check handles the all-zero case and validates epsilon") {
  EmbeddingModel m = zero_model(3, 2, 2);
  SiameseHead siam;
  siam.w = {0.0, 0.0};
  siam.b = 0.0;
  Vec zero_x{0.0, 0.0, 0.0};
  PairSet pairs;
  pairs.a = {&zero_x, &zero_x};
  pairs.b = {&zero_x, &zero_x};
  pairs.labels = {1, 0};  // balanced so the bias gradient cancels exactly
  CHECK(gradient_check_siamese(m, siam, pairs, 1e-5) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(gradient_check_siamese(m, siam, pairs, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(gradient_check_siamese(m, siam, pairs, 1e-2), std::invalid_argument);
}

TEST_CASE("train_si with zero learning rate is a no-op with flat history") {
  TinyProblem p = two_speaker_problem(31);
  LabeledSet train = labeled_from_segments(p.segments, p.labels, &p.train_idx);
  LabeledSet val = labeled_from_segments(p.segments, p.labels, &p.val_idx);

  Rng init_rng(32);
  EmbeddingModel m0 = EmbeddingModel::init(8, 6, 4, init_rng);
  ClassifierHead h0;
  h0.w = Matrix(2, 4);
  h0.b.assign(2, 0.0);

  TrainConfig cfg = TrainConfig::si_fine_tune(33);
  cfg.learning_rate = 0.0;
  cfg.epochs = 5;

  EmbeddingModel m = m0;
  ClassifierHead h = h0;
  TrainHistory hist = train_si(m, h, train, val, cfg);
  CHECK(m == m0);  // base and trunk bit-identical
  for (const EpochStats& e : hist.epochs) {
    // Batch order reshuffles per epoch, so the summation order (and nothing
    // else) may differ.
    CHECK(e.train_loss == doctest::Approx(hist.epochs[0].train_loss).epsilon(1e-12));
    CHECK(e.val_error == hist.epochs[0].val_error);
  }
}

TEST_CASE("train_si solves a separable two-speaker problem") {
  TinyProblem p = two_speaker_problem(34);
  LabeledSet train = labeled_from_segments(p.segments, p.labels, &p.train_idx);
  LabeledSet val = labeled_from_segments(p.segments, p.labels, &p.val_idx);

  EmbeddingModel m = zero_model(8, 6, 4);  // replaced by FromScratch init
  ClassifierHead h;
  h.w = Matrix(2, 4);
  h.b.assign(2, 0.0);
  TrainConfig cfg = TrainConfig::si_from_scratch(35);
  cfg.learning_rate = 0.05;
  TrainHistory hist = train_si(m, h, train, val, cfg);
  CHECK(hist.best_val_error == 0.0);
  // Returned parameters correspond to the best epoch.
  CHECK(si_validation_error(m, h, val) == hist.best_val_error);
  double min_err = 1.0;
  for (const EpochStats& e : hist.epochs) min_err = std::min(min_err, e.val_error);
  CHECK(hist.best_val_error == min_err);
}

TEST_CASE("fine-tuning never mutates parameters in the freeze set") {
  TinyProblem p = two_speaker_problem(36);
  LabeledSet train = labeled_from_segments(p.segments, p.labels, &p.train_idx);
  LabeledSet val = labeled_from_segments(p.segments, p.labels, &p.val_idx);

  Rng init_rng(37);
  EmbeddingModel m0 = EmbeddingModel::init(8, 6, 4, init_rng);
  EmbeddingModel m = m0;
  ClassifierHead h;
  h.w = Matrix(2, 4);
  h.b.assign(2, 0.0);
  TrainConfig cfg = TrainConfig::si_fine_tune(38);
  cfg.freeze = {ParamGroup::kBase};
  cfg.learning_rate = 0.05;
  cfg.epochs = 10;
  train_si(m, h, train, val, cfg);
  CHECK(m.base_w == m0.base_w);  // bitwise: frozen group untouched
  CHECK(m.base_b == m0.base_b);
  CHECK(m.trunk_w.data != m0.trunk_w.data);  // the trunk did train
}

TEST_CASE("fine-tuning without a freeze set keeps init but trains all groups") {
  TinyProblem p = two_speaker_problem(53);
  LabeledSet train = labeled_from_segments(p.segments, p.labels, &p.train_idx);
  LabeledSet val = labeled_from_segments(p.segments, p.labels, &p.val_idx);

  Rng init_rng(54);
  EmbeddingModel m0 = EmbeddingModel::init(8, 6, 4, init_rng);
  EmbeddingModel m = m0;
  ClassifierHead h;
  h.w = Matrix(2, 4);
  h.b.assign(2, 0.0);
  TrainConfig cfg = TrainConfig::si_fine_tune(55);
  cfg.learning_rate = 0.05;
  cfg.epochs = 10;
  train_si(m, h, train, val, cfg);
  CHECK(m.base_w.data != m0.base_w.data);  // all groups train by default
  CHECK(m.trunk_w.data != m0.trunk_w.data);
}

TEST_CASE("train_si input validation") {
  TinyProblem p = two_speaker_problem(39);
  LabeledSet train = labeled_from_segments(p.segments, p.labels, &p.train_idx);
  LabeledSet val = labeled_from_segments(p.segments, p.labels, &p.val_idx);
  LabeledSet empty;
  EmbeddingModel m = zero_model(8, 6, 4);
  ClassifierHead h;
  h.w = Matrix(2, 4);
  h.b.assign(2, 0.0);
  TrainConfig cfg = TrainConfig::si_from_scratch(1);
  CHECK_THROWS_AS(train_si(m, h, empty, val, cfg), std::invalid_argument);
  CHECK_THROWS_AS(train_si(m, h, train, empty, cfg), std::invalid_argument);
}

TEST_CASE("siamese phase-1 loss decreases monotonically on a fixed batch") {
  // All-label-1 pairs, frozen embeddings: the loss is convex in (w, b) and a
  // small-step full-batch descent must decrease it every epoch.
  TinyProblem p = two_speaker_problem(41);
  PairSet pairs;
  for (size_t i = 0; i + 1 < p.segments.size(); i += 2) {
    pairs.a.push_back(&p.segments[i].features);
    pairs.b.push_back(&p.segments[i + 1].features);
    pairs.labels.push_back(1);
  }
  Rng init_rng(42);
  EmbeddingModel m = EmbeddingModel::init(8, 6, 4, init_rng);
  SiameseHead h;
  SiameseTrainConfig cfg;
  cfg.epochs = 12;  // phase 1 = first 6 epochs
  cfg.phase1_learning_rate = 0.1;
  cfg.phase2_learning_rate = 0.0;
  cfg.batch_size = 1024;  // full batch
  cfg.seed = 43;
  TrainHistory hist = train_siamese(m, h, pairs, pairs, cfg);
  for (int e = 1; e < 6; ++e) {
    CHECK(hist.epochs[e].train_loss < hist.epochs[e - 1].train_loss);
  }
}

TEST_CASE("siamese phase 1 leaves the embedding model untouched") {
  TinyProblem p = two_speaker_problem(44);
  PairSet pairs;
  for (size_t i = 0; i + 1 < p.segments.size(); i += 2) {
    pairs.a.push_back(&p.segments[i].features);
    pairs.b.push_back(&p.segments[i + 1].features);
    pairs.labels.push_back(static_cast<int>(i / 2 % 2));
  }
  Rng init_rng(45);
  EmbeddingModel m0 = EmbeddingModel::init(8, 6, 4, init_rng);
  EmbeddingModel m = m0;
  SiameseHead h;
  SiameseTrainConfig cfg;
  cfg.epochs = 8;
  cfg.phase2_learning_rate = 0.0;  // net effect: phase 1 only
  cfg.seed = 46;
  train_siamese(m, h, pairs, pairs, cfg);
  CHECK(m == m0);
}

TEST_CASE("weight tying gives both branches identical embeddings") {
  Rng rng(47);
  EmbeddingModel m = EmbeddingModel::init(6, 5, 4, rng);
  Vec x = gaussian_vec(6, 1.0, rng);
  CHECK(embed(m, x) == embed(m, x));
}

TEST_CASE("speaker_class_labels orders classes by ascending speaker id") {
  std::vector<SegmentRecord> segments(3);
  segments[0].segment_id = "x";
  segments[0].speaker_id = "s00002";
  segments[1].segment_id = "y";
  segments[1].speaker_id = "s00000";
  segments[2].segment_id = "z";
  segments[2].speaker_id = "s00001";
  for (auto& s : segments) s.features = {0.0};
  std::vector<std::string> class_ids;
  std::vector<int> labels = speaker_class_labels(segments, &class_ids);
  CHECK(labels == std::vector<int>{2, 0, 1});
  CHECK(class_ids == std::vector<std::string>{"s00000", "s00001", "s00002"});
}

TEST_CASE("resolve_pairs reports unknown segment ids") {
  std::vector<SegmentRecord> segments(1);
  segments[0].segment_id = "known";
  segments[0].features = {0.0};
  CHECK_THROWS_WITH_AS(resolve_pairs({TrialPair{"known", "missing", 0}}, segments),
                       doctest::Contains("missing"), std::runtime_error);
}
