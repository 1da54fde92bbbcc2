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

#include "svadapt/eval.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace svadapt {

std::string backend_name(ScoreBackend backend) {
  return backend == ScoreBackend::kCosine ? "cosine" : "siamese";
}

std::vector<ScoredTrial> score_trials(const EmbeddingModel& model, const SiameseHead* head,
                                      const std::vector<TrialPair>& pairs,
                                      const std::vector<SegmentRecord>& segments,
                                      ScoreBackend backend) {
  if (backend == ScoreBackend::kSiamese && head == nullptr) {
    throw std::invalid_argument("score_trials: Siamese backend requires a head");
  }
  std::unordered_map<std::string, const Vec*> by_id;
  by_id.reserve(segments.size());
  for (const SegmentRecord& seg : segments) by_id[seg.segment_id] = &seg.features;

  // Embeddings are cached per distinct segment id; trials reuse them.
  std::unordered_map<std::string, Embedding> cache;
  auto embedding_of = [&](const std::string& id) -> const Embedding& {
    auto hit = cache.find(id);
    if (hit != cache.end()) return hit->second;
    auto feat = by_id.find(id);
    if (feat == by_id.end()) {
      throw std::runtime_error("score_trials: unknown segment id '" + id + "'");
    }
    return cache.emplace(id, embed(model, *feat->second)).first->second;
  };

  std::vector<ScoredTrial> out;
  out.reserve(pairs.size());
  for (const TrialPair& p : pairs) {
    const Embedding& ea = embedding_of(p.seg_a);
    const Embedding& eb = embedding_of(p.seg_b);
    ScoredTrial st;
    st.pair = p;
    st.backend = backend;
    st.score = backend == ScoreBackend::kCosine ? cosine_similarity(ea, eb)
                                                : siamese_forward(*head, ea, eb);
    out.push_back(std::move(st));
  }
  return out;
}

EerResult compute_eer(const std::vector<double>& target_scores,
                      const std::vector<double>& nontarget_scores) {
  if (target_scores.empty() || nontarget_scores.empty()) {
    throw std::invalid_argument("compute_eer: need at least one target and one non-target trial");
  }
  std::vector<double> tgt = target_scores;
  std::vector<double> non = nontarget_scores;
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());

  std::vector<double> thresholds;
  thresholds.reserve(tgt.size() + non.size() + 1);
  thresholds.insert(thresholds.end(), tgt.begin(), tgt.end());
  thresholds.insert(thresholds.end(), non.begin(), non.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  // One threshold beyond the maximum, where FAR = 0 and FRR = 1.
  thresholds.push_back(thresholds.back() + 1.0);

  const double nt = static_cast<double>(tgt.size());
  const double nn = static_cast<double>(non.size());
  auto far_at = [&](double t) {
    size_t accepted = non.end() - std::lower_bound(non.begin(), non.end(), t);
    return static_cast<double>(accepted) / nn;
  };
  auto frr_at = [&](double t) {
    size_t rejected = std::lower_bound(tgt.begin(), tgt.end(), t) - tgt.begin();
    return static_cast<double>(rejected) / nt;
  };

  EerResult res;
  res.n_target = tgt.size();
  res.n_nontarget = non.size();

  double prev_far = far_at(thresholds[0]);
  double prev_frr = frr_at(thresholds[0]);
  double prev_t = thresholds[0];
  for (size_t i = 0; i < thresholds.size(); ++i) {
    double t = thresholds[i];
    double far = far_at(t);
    double frr = frr_at(t);
    double diff = far - frr;
    if (diff == 0.0) {
      res.eer = far;
      res.threshold = t;
      return res;
    }
    if (diff < 0.0) {
      // Crossed between the previous threshold and this one; interpolate the
      // two rate segments linearly.
      double d_lo = prev_far - prev_frr;
      double d_hi = far - frr;
      double alpha = d_lo / (d_lo - d_hi);
      res.eer = prev_far + alpha * (far - prev_far);
      res.threshold = prev_t + alpha * (t - prev_t);
      return res;
    }
    prev_far = far;
    prev_frr = frr;
    prev_t = t;
  }
  // FAR >= FRR everywhere cannot survive the sentinel threshold.
  throw std::runtime_error("compute_eer: no crossing found");
}

EerResult compute_eer(const std::vector<ScoredTrial>& scored) {
  std::vector<double> tgt, non;
  for (const ScoredTrial& st : scored) {
    if (st.pair.label == 1) {
      tgt.push_back(st.score);
    } else {
      non.push_back(st.score);
    }
  }
  return compute_eer(tgt, non);
}

}  // namespace svadapt
