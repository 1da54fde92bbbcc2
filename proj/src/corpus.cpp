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

#include "svadapt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace svadapt {

namespace {

std::string padded_id(const char* prefix, int index, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, index);
  return buf;
}

constexpr double kSegmentSeconds = 8.0;

}  // namespace

ChannelSpec ChannelSpec::identity(const std::string& name, int feature_dim, double noise_sigma) {
  ChannelSpec ch;
  ch.name = name;
  ch.mix = Matrix(feature_dim, feature_dim);
  for (int i = 0; i < feature_dim; ++i) ch.mix.at(i, i) = 1.0;
  ch.offset.assign(static_cast<size_t>(feature_dim), 0.0);
  ch.noise_sigma = noise_sigma;
  return ch;
}

ChannelSpec ChannelSpec::distorted(const std::string& name, int feature_dim, double distortion,
                                   double noise_sigma, Rng& rng) {
  ChannelSpec ch = identity(name, feature_dim, noise_sigma);
  const double scale = distortion / std::sqrt(static_cast<double>(feature_dim));
  for (int r = 0; r < feature_dim; ++r) {
    for (int c = 0; c < feature_dim; ++c) {
      ch.mix.at(r, c) += scale * rng.next_gaussian();
    }
  }
  for (int i = 0; i < feature_dim; ++i) ch.offset[i] = 0.5 * distortion * rng.next_gaussian();
  return ch;
}

std::string role_name(DatasetRole role) {
  switch (role) {
    case DatasetRole::kTrain: return "train";
    case DatasetRole::kDev: return "dev";
    case DatasetRole::kDevSiameseValidation: return "dev-siamese-validation";
    case DatasetRole::kDevTest: return "dev-test";
  }
  return "unknown";
}

int min_segments_for_role(DatasetRole role) {
  return role == DatasetRole::kTrain ? 3 : 2;
}

namespace {

// Orthonormal F x K basis via Gram-Schmidt on gaussian draws; depends only on
// the seed so corpora can share one identity subspace.
std::vector<Vec> subspace_basis(int feature_dim, int subspace_dim, uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> basis;
  basis.reserve(subspace_dim);
  while (static_cast<int>(basis.size()) < subspace_dim) {
    Vec v = gaussian_vec(feature_dim, 1.0, rng);
    for (const Vec& b : basis) {
      double proj = dot(v, b);
      for (int i = 0; i < feature_dim; ++i) v[i] -= proj * b[i];
    }
    double norm = l2_norm(v);
    if (norm < 1e-8) continue;  // essentially dependent draw, redraw
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

std::vector<ChannelRecordings> generate_corpus(const CorpusSpec& spec, Rng& rng) {
  if (spec.n_speakers <= 0) throw std::invalid_argument("generate_corpus: n_speakers must be positive");
  if (spec.feature_dim <= 0) throw std::invalid_argument("generate_corpus: feature_dim must be positive");
  if (spec.channels.empty()) throw std::invalid_argument("generate_corpus: no channels configured");
  if (spec.speaker_subspace_dim < 0 || spec.speaker_subspace_dim > spec.feature_dim) {
    throw std::invalid_argument("generate_corpus: speaker_subspace_dim outside [0, feature_dim]");
  }
  for (const ChannelSpec& ch : spec.channels) {
    if (ch.noise_sigma < 0.0) throw std::invalid_argument("generate_corpus: negative noise_sigma");
    if (ch.mix.rows != spec.feature_dim || ch.mix.cols != spec.feature_dim ||
        static_cast<int>(ch.offset.size()) != spec.feature_dim) {
      throw std::invalid_argument("generate_corpus: channel '" + ch.name +
                                  "' does not match feature_dim");
    }
  }

  // Channel-independent part: identities, durations, base vectors.
  struct Underlying {
    std::string recording_id;
    std::string speaker_id;
    double duration_s;
    double speech_fraction;
    Vec base;
  };
  // Full orthonormal basis: the first speaker_subspace_dim vectors span the
  // identity subspace, the rest span the nuisance complement.
  std::vector<Vec> basis;
  if (spec.speaker_subspace_dim > 0) {
    basis = subspace_basis(spec.feature_dim, spec.feature_dim, spec.subspace_seed);
  }

  std::vector<Underlying> underlying;
  int recording_index = 0;
  for (int s = 0; s < spec.n_speakers; ++s) {
    const std::string speaker_id = padded_id("s", s, 5);
    Vec centroid;
    if (basis.empty()) {
      centroid = gaussian_vec(spec.feature_dim, spec.speaker_centroid_sigma, rng);
    } else {
      centroid.assign(static_cast<size_t>(spec.feature_dim), 0.0);
      for (int j = 0; j < spec.speaker_subspace_dim; ++j) {
        double z = spec.speaker_centroid_sigma * rng.next_gaussian();
        for (int i = 0; i < spec.feature_dim; ++i) centroid[i] += z * basis[j][i];
      }
    }
    int n_rec = std::max(1, static_cast<int>(std::llround(spec.recordings_per_speaker.sample(rng))));
    for (int r = 0; r < n_rec; ++r) {
      Underlying u;
      u.recording_id = padded_id("r", recording_index++, 6);
      u.speaker_id = speaker_id;
      u.duration_s = std::max(1.0, spec.recording_duration_s.sample(rng));
      u.speech_fraction = std::clamp(spec.speech_fraction.sample(rng), 0.01, 1.0);
      Vec offset = gaussian_vec(spec.feature_dim, spec.within_speaker_sigma, rng);
      u.base = centroid;
      for (int i = 0; i < spec.feature_dim; ++i) u.base[i] += offset[i];
      if (!basis.empty() && spec.recording_nuisance_sigma > 0.0) {
        for (int j = spec.speaker_subspace_dim; j < spec.feature_dim; ++j) {
          double z = spec.recording_nuisance_sigma * rng.next_gaussian();
          for (int i = 0; i < spec.feature_dim; ++i) u.base[i] += z * basis[j][i];
        }
      }
      underlying.push_back(std::move(u));
    }
  }

  // Channel versions, each from its own derived stream.
  std::vector<ChannelRecordings> out;
  out.reserve(spec.channels.size());
  for (size_t ci = 0; ci < spec.channels.size(); ++ci) {
    const ChannelSpec& ch = spec.channels[ci];
    Rng ch_rng = rng.derive(1000 + ci);
    ChannelRecordings cr;
    cr.channel = ch.name;
    cr.noise_sigma = ch.noise_sigma;
    cr.recordings.reserve(underlying.size());
    for (const Underlying& u : underlying) {
      RawRecording rec;
      rec.recording_id = u.recording_id;
      rec.speaker_id = u.speaker_id;
      rec.duration_s = u.duration_s;
      rec.speech_fraction = u.speech_fraction;
      rec.base_vector = matvec(ch.mix, u.base);
      for (int i = 0; i < spec.feature_dim; ++i) {
        rec.base_vector[i] += ch.offset[i] + ch.noise_sigma * ch_rng.next_gaussian();
      }
      cr.recordings.push_back(std::move(rec));
    }
    out.push_back(std::move(cr));
  }
  return out;
}

double simulate_vad(const RawRecording& rec) {
  return rec.duration_s * rec.speech_fraction;
}

std::vector<SegmentRecord> segment_recording(const RawRecording& rec, double speech_duration_s,
                                             double segment_noise_sigma, Rng& rng) {
  if (speech_duration_s < 0.0) {
    throw std::invalid_argument("segment_recording: negative speech duration");
  }
  const int n_segments = static_cast<int>(std::floor(speech_duration_s / kSegmentSeconds));
  std::vector<SegmentRecord> segments;
  segments.reserve(static_cast<size_t>(std::max(0, n_segments)));
  for (int i = 0; i < n_segments; ++i) {
    SegmentRecord seg;
    seg.segment_id = rec.recording_id + "_" + padded_id("", i, 4);
    seg.recording_id = rec.recording_id;
    seg.speaker_id = rec.speaker_id;
    seg.duration_s = kSegmentSeconds;
    seg.features = rec.base_vector;
    for (double& f : seg.features) f += segment_noise_sigma * rng.next_gaussian();
    segments.push_back(std::move(seg));
  }
  return segments;
}

PreparedDataset filter_min_segments(const PreparedDataset& ds, int min_per_speaker) {
  std::unordered_map<std::string, int> counts;
  for (const SegmentRecord& seg : ds.segments) counts[seg.speaker_id]++;
  PreparedDataset out;
  out.role = ds.role;
  out.channel = ds.channel;
  for (const SegmentRecord& seg : ds.segments) {
    if (counts[seg.speaker_id] >= min_per_speaker) out.segments.push_back(seg);
  }
  return out;
}

PreparedDataset filter_min_segments(const PreparedDataset& ds) {
  return filter_min_segments(ds, min_segments_for_role(ds.role));
}

std::vector<std::string> speaker_order(const std::vector<SegmentRecord>& segments) {
  std::vector<std::string> order;
  std::unordered_set<std::string> seen;
  for (const SegmentRecord& seg : segments) {
    if (seen.insert(seg.speaker_id).second) order.push_back(seg.speaker_id);
  }
  return order;
}

PreparedDataset build_training_set(const PreparedDataset& ds, size_t target_count, Rng& rng) {
  if (target_count > ds.segments.size()) {
    throw std::invalid_argument("build_training_set: requested " + std::to_string(target_count) +
                                " segments but only " + std::to_string(ds.segments.size()) +
                                " available");
  }
  std::vector<std::string> speakers = speaker_order(ds.segments);
  std::unordered_map<std::string, std::vector<size_t>> by_speaker;
  for (size_t i = 0; i < ds.segments.size(); ++i) {
    by_speaker[ds.segments[i].speaker_id].push_back(i);
  }
  rng.shuffle(speakers);
  for (const std::string& spk : speakers) rng.shuffle(by_speaker[spk]);

  PreparedDataset out;
  out.role = ds.role;
  out.channel = ds.channel;
  std::vector<size_t> cursor(speakers.size(), 0);
  while (out.segments.size() < target_count) {
    bool drew_any = false;
    for (size_t si = 0; si < speakers.size() && out.segments.size() < target_count; ++si) {
      const std::vector<size_t>& pool = by_speaker[speakers[si]];
      if (cursor[si] < pool.size()) {
        out.segments.push_back(ds.segments[pool[cursor[si]++]]);
        drew_any = true;
      }
    }
    if (!drew_any) break;  // unreachable given the size check above
  }
  return out;
}

PreparedDataset select_subset(const PreparedDataset& train, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("select_subset: fraction must lie in (0, 1]");
  }
  std::vector<std::string> speakers = speaker_order(train.segments);
  std::sort(speakers.begin(), speakers.end());
  const double raw = fraction * static_cast<double>(speakers.size());
  size_t keep = static_cast<size_t>(std::ceil(raw - 1e-9));
  keep = std::clamp<size_t>(keep, 1, speakers.size());
  std::unordered_set<std::string> kept(speakers.begin(), speakers.begin() + keep);
  PreparedDataset out;
  out.role = train.role;
  out.channel = train.channel;
  for (const SegmentRecord& seg : train.segments) {
    if (kept.count(seg.speaker_id)) out.segments.push_back(seg);
  }
  return out;
}

std::pair<PreparedDataset, PreparedDataset> split_dev_speakers(const PreparedDataset& dev, Rng& rng) {
  std::vector<std::string> speakers = speaker_order(dev.segments);
  if (speakers.size() < 2) {
    throw std::invalid_argument("split_dev_speakers: need at least 2 speakers, have " +
                                std::to_string(speakers.size()));
  }
  rng.shuffle(speakers);
  const size_t half = (speakers.size() + 1) / 2;
  std::unordered_set<std::string> validation_side(speakers.begin(), speakers.begin() + half);

  PreparedDataset validation, test;
  validation.role = DatasetRole::kDevSiameseValidation;
  test.role = DatasetRole::kDevTest;
  validation.channel = test.channel = dev.channel;
  for (const SegmentRecord& seg : dev.segments) {
    if (validation_side.count(seg.speaker_id)) {
      validation.segments.push_back(seg);
    } else {
      test.segments.push_back(seg);
    }
  }
  return {std::move(validation), std::move(test)};
}

std::vector<TrialPair> generate_pairs(const PreparedDataset& ds, size_t n_pairs, Rng& rng) {
  if (n_pairs % 2 != 0) throw std::invalid_argument("generate_pairs: n_pairs must be even");
  std::vector<std::string> speakers = speaker_order(ds.segments);
  std::unordered_map<std::string, std::vector<size_t>> by_speaker;
  for (size_t i = 0; i < ds.segments.size(); ++i) {
    by_speaker[ds.segments[i].speaker_id].push_back(i);
  }
  std::vector<std::string> target_eligible;
  for (const std::string& spk : speakers) {
    if (by_speaker[spk].size() >= 2) target_eligible.push_back(spk);
  }
  if (n_pairs > 0 && target_eligible.empty()) {
    throw std::invalid_argument("generate_pairs: cannot form target pairs, no speaker has 2 segments");
  }
  if (n_pairs > 0 && speakers.size() < 2) {
    throw std::invalid_argument("generate_pairs: cannot form non-target pairs, fewer than 2 speakers");
  }

  const size_t per_class = n_pairs / 2;
  const size_t max_attempts = 100 * n_pairs;
  std::unordered_set<std::string> seen;
  auto pair_key = [&](const std::string& a, const std::string& b) {
    return a < b ? a + "\x1f" + b : b + "\x1f" + a;
  };

  std::vector<TrialPair> targets;
  size_t attempts = 0;
  while (targets.size() < per_class) {
    if (attempts++ >= max_attempts) {
      throw std::runtime_error("generate_pairs: exhausted attempts while sampling target pairs");
    }
    const std::string& spk = target_eligible[rng.next_below(target_eligible.size())];
    const std::vector<size_t>& pool = by_speaker[spk];
    size_t i1 = rng.next_below(pool.size());
    size_t i2 = rng.next_below(pool.size() - 1);
    if (i2 >= i1) ++i2;
    const std::string& a = ds.segments[pool[i1]].segment_id;
    const std::string& b = ds.segments[pool[i2]].segment_id;
    if (!seen.insert(pair_key(a, b)).second) continue;
    targets.push_back(TrialPair{a, b, 1});
  }

  std::vector<TrialPair> nontargets;
  attempts = 0;
  while (nontargets.size() < per_class) {
    if (attempts++ >= max_attempts) {
      throw std::runtime_error("generate_pairs: exhausted attempts while sampling non-target pairs");
    }
    size_t s1 = rng.next_below(speakers.size());
    size_t s2 = rng.next_below(speakers.size() - 1);
    if (s2 >= s1) ++s2;
    const std::vector<size_t>& pool_a = by_speaker[speakers[s1]];
    const std::vector<size_t>& pool_b = by_speaker[speakers[s2]];
    const std::string& a = ds.segments[pool_a[rng.next_below(pool_a.size())]].segment_id;
    const std::string& b = ds.segments[pool_b[rng.next_below(pool_b.size())]].segment_id;
    if (!seen.insert(pair_key(a, b)).second) continue;
    nontargets.push_back(TrialPair{a, b, 0});
  }

  std::vector<TrialPair> out;
  out.reserve(n_pairs);
  out.insert(out.end(), targets.begin(), targets.end());
  out.insert(out.end(), nontargets.begin(), nontargets.end());
  return out;
}

}  // namespace svadapt
