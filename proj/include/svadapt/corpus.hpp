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

#ifndef SVADAPT_CORPUS_HPP_
#define SVADAPT_CORPUS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "svadapt/core.hpp"

namespace svadapt {

/// Gaussian scalar distribution, sampled as mean + spread * N(0,1).
struct Dist {
  double mean = 0.0;
  double spread = 0.0;

  double sample(Rng& rng) const { return mean + spread * rng.next_gaussian(); }
};

/// Affine feature-space distortion standing in for a transmission channel:
/// v -> mix * v + offset, plus additive per-dimension noise of scale
/// noise_sigma wherever the channel touches data.
struct ChannelSpec {
  std::string name;
  Matrix mix;
  Vec offset;
  double noise_sigma = 0.0;

  /// Clean channel: identity mix, zero offset.
  static ChannelSpec identity(const std::string& name, int feature_dim, double noise_sigma = 0.0);
  /// Distorted channel: mix = I + distortion * G (G entries N(0, 1/sqrt(F)))
  /// and offset entries N(0, distortion / 2), drawn from `rng`.
  static ChannelSpec distorted(const std::string& name, int feature_dim, double distortion,
                               double noise_sigma, Rng& rng);
};

struct CorpusSpec {
  int n_speakers = 0;
  Dist recordings_per_speaker{4.0, 1.0};
  Dist recording_duration_s{100.0, 25.0};
  Dist speech_fraction{0.65, 0.15};  // clamped into (0, 1]
  double speaker_centroid_sigma = 1.0;
  double within_speaker_sigma = 0.25;
  int feature_dim = 32;
  // When positive, speaker centroids live in a random orthonormal subspace of
  // this dimension and every recording additionally carries a nuisance offset
  // of scale recording_nuisance_sigma drawn in the complementary subspace, so
  // speaker identity is a learnable projection and raw cosine is dominated by
  // nuisance. The basis depends only on subspace_seed: corpora sharing it
  // (e.g. source and target domains) share the identity subspace. 0 draws
  // centroids in the full feature space with no structured nuisance.
  int speaker_subspace_dim = 0;
  double recording_nuisance_sigma = 0.0;
  uint64_t subspace_seed = 0x5B5B5B;
  std::vector<ChannelSpec> channels;
  uint64_t seed = 0;
};

/// One recording as seen through one channel. Identity fields (ids, duration,
/// speech fraction) are shared across all channel versions of the same
/// underlying recording; base_vector is channel specific.
struct RawRecording {
  std::string recording_id;
  std::string speaker_id;
  double duration_s = 0.0;
  double speech_fraction = 1.0;
  Vec base_vector;
};

struct ChannelRecordings {
  std::string channel;
  double noise_sigma = 0.0;  // carried along for per-segment noise
  std::vector<RawRecording> recordings;
};

enum class DatasetRole { kTrain, kDev, kDevSiameseValidation, kDevTest };

std::string role_name(DatasetRole role);

/// Segments plus the role and channel they were prepared for.
struct PreparedDataset {
  std::vector<SegmentRecord> segments;
  DatasetRole role = DatasetRole::kTrain;
  std::string channel;
};

/// Minimum segments per speaker implied by the role: 3 for train, 2 for dev.
int min_segments_for_role(DatasetRole role);

/// Draws speaker centroids, per-speaker recordings, and one channel version of
/// every recording per ChannelSpec. Channel versions use independent derived
/// streams, so each channel's content depends only on the spec seed.
std::vector<ChannelRecordings> generate_corpus(const CorpusSpec& spec, Rng& rng);

/// Simulated voice activity detection: retained speech seconds.
double simulate_vad(const RawRecording& rec);

/// Cuts floor(speech_duration_s / 8) segments of exactly 8 s; the tail
/// remainder is discarded. Each segment's features are the recording's channel
/// base plus fresh noise of scale segment_noise_sigma.
std::vector<SegmentRecord> segment_recording(const RawRecording& rec, double speech_duration_s,
                                             double segment_noise_sigma, Rng& rng);

/// Removes every segment of speakers with fewer than min_per_speaker segments.
/// Idempotent; an empty result is legal.
PreparedDataset filter_min_segments(const PreparedDataset& ds, int min_per_speaker);
/// Same, with the role's default threshold.
PreparedDataset filter_min_segments(const PreparedDataset& ds);

/// Selects target_count segments while balancing per-speaker counts:
/// round-robin over speakers in random order, one unused segment per pass.
PreparedDataset build_training_set(const PreparedDataset& ds, size_t target_count, Rng& rng);

/// Keeps the first ceil(fraction * n_speakers) speakers in ascending id order,
/// with all their segments. fraction must lie in (0, 1].
PreparedDataset select_subset(const PreparedDataset& train, double fraction);

/// Splits dev speakers (not segments) into two disjoint halves whose sizes
/// differ by at most one; the first half (the larger one when the count is
/// odd) is the Siamese validation side.
std::pair<PreparedDataset, PreparedDataset> split_dev_speakers(const PreparedDataset& dev, Rng& rng);

/// Exactly n_pairs/2 target and n_pairs/2 non-target trials, no duplicate
/// unordered pair, no self-pair. Rejection sampling with a cap of
/// 100 * n_pairs attempts per class; hitting the cap names the deficient class.
std::vector<TrialPair> generate_pairs(const PreparedDataset& ds, size_t n_pairs, Rng& rng);

/// Speakers in order of first appearance.
std::vector<std::string> speaker_order(const std::vector<SegmentRecord>& segments);

}  // namespace svadapt

#endif  // SVADAPT_CORPUS_HPP_
