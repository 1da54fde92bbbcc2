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

#ifndef SVADAPT_EVAL_HPP_
#define SVADAPT_EVAL_HPP_

#include <string>
#include <vector>

#include "svadapt/core.hpp"
#include "svadapt/model.hpp"

namespace svadapt {

enum class ScoreBackend { kCosine, kSiamese };

std::string backend_name(ScoreBackend backend);

struct ScoredTrial {
  TrialPair pair;
  double score = 0.0;
  ScoreBackend backend = ScoreBackend::kCosine;
};

/// Scores every trial in order. Cosine scores the two embeddings directly;
/// Siamese runs the sigmoid head and requires `head` to be non-null.
std::vector<ScoredTrial> score_trials(const EmbeddingModel& model, const SiameseHead* head,
                                      const std::vector<TrialPair>& pairs,
                                      const std::vector<SegmentRecord>& segments,
                                      ScoreBackend backend);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;  // operating point where FAR = FRR
  size_t n_target = 0;
  size_t n_nontarget = 0;
};

/// Equal error rate under the "score >= threshold accepts" convention.
/// FAR(t) = fraction of non-target scores >= t, FRR(t) = fraction of target
/// scores < t; thresholds sweep all distinct score values (plus one beyond
/// the maximum) and the FAR/FRR crossing is linearly interpolated when no
/// threshold hits it exactly.
EerResult compute_eer(const std::vector<double>& target_scores,
                      const std::vector<double>& nontarget_scores);
EerResult compute_eer(const std::vector<ScoredTrial>& scored);

}  // namespace svadapt

#endif  // SVADAPT_EVAL_HPP_
