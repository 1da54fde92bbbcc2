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
//
// svadapt command line: batch experiments for source-free speaker
// verification adaptation on synthetic multi-channel corpora.
//
//   generate       synthesize per-channel corpus manifests
//   prepare        training subsets, dev halves and trial lists
//   train-si       speaker-identification training (from scratch / fine-tune)
//   train-siamese  two-phase Siamese verification fine-tuning
//   adapt          unsupervised iterative cluster-learn adaptation
//   eval           cosine / Siamese scoring and EER

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "svadapt/adapt.hpp"
#include "svadapt/cluster.hpp"
#include "svadapt/core.hpp"
#include "svadapt/corpus.hpp"
#include "svadapt/eval.hpp"
#include "svadapt/io.hpp"
#include "svadapt/model.hpp"

namespace fs = std::filesystem;
using namespace svadapt;

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string format_fraction(double f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", f);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ss(s);
  while (std::getline(ss, tok, ',')) {
    size_t b = tok.find_first_not_of(" \t");
    size_t e = tok.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(tok.substr(b, e - b + 1));
  }
  return out;
}

struct ChannelParams {
  double noise = 0.1;
  double distortion = 0.2;
};

// Full key schema of the experiment config file. Flags override file values.
struct ToolConfig {
  int feature_dim = 32;
  int hidden_dim = 32;
  int embedding_dim = 16;
  int train_speakers = 60;
  int dev_speakers = 24;
  double recordings_per_speaker_mean = 4.0;
  double recordings_per_speaker_spread = 1.0;
  double recording_duration_mean_s = 100.0;
  double recording_duration_spread_s = 25.0;
  double speech_fraction_mean = 0.65;
  double speech_fraction_spread = 0.15;
  double speaker_centroid_sigma = 1.0;
  double within_speaker_sigma = 0.25;
  int speaker_subspace_dim = 0;
  double recording_nuisance_sigma = 0.0;
  uint64_t subspace_seed = 0x5B5B5B;
  std::vector<std::string> channels = {"I", "A", "D"};
  std::map<std::string, ChannelParams> channel_params;
  uint64_t seed = 17;

  uint64_t train_segment_target = 0;  // 0 keeps every segment
  std::vector<double> subset_fractions = {1.0};
  uint64_t n_trial_pairs = 2000;
  uint64_t n_train_pairs = 4000;

  double si_learning_rate = 0.001;
  int si_epochs = 40;
  double siamese_phase1_learning_rate = 0.01;
  double siamese_phase2_learning_rate = 0.001;
  int siamese_epochs = 20;
  int batch_size = 32;

  int kmeans_n_init = 10;
  int kmeans_max_iter = 300;
  double kmeans_tol = 1e-6;
  int adapt_max_iterations = 5;
};

ChannelParams default_channel_params(const std::string& name) {
  // A is the hardest channel, D intermediate, I clean.
  if (name == "I") return {0.05, 0.0};
  if (name == "A") return {0.35, 0.55};
  if (name == "D") return {0.18, 0.30};
  return {0.1, 0.2};
}

ToolConfig load_config(const std::string& path) {
  ToolConfig cfg;
  std::vector<std::pair<std::string, std::string>> entries;
  if (!path.empty()) entries = read_key_value_file(path);

  // channels first so channel_<name>_* keys can be validated against it
  for (const auto& [key, value] : entries) {
    if (key == "channels") cfg.channels = split_list(value);
  }
  if (cfg.channels.empty()) throw std::runtime_error("config: channels list is empty");
  for (const std::string& ch : cfg.channels) {
    cfg.channel_params[ch] = default_channel_params(ch);
  }

  auto as_double = [](const std::string& v) { return parse_double(v); };
  auto as_int = [](const std::string& v) { return static_cast<int>(parse_int(v)); };
  auto as_u64 = [](const std::string& v) { return static_cast<uint64_t>(parse_int(v)); };

  for (const auto& [key, value] : entries) {
    if (key == "channels") continue;
    if (key == "feature_dim") cfg.feature_dim = as_int(value);
    else if (key == "hidden_dim") cfg.hidden_dim = as_int(value);
    else if (key == "embedding_dim") cfg.embedding_dim = as_int(value);
    else if (key == "train_speakers") cfg.train_speakers = as_int(value);
    else if (key == "dev_speakers") cfg.dev_speakers = as_int(value);
    else if (key == "recordings_per_speaker_mean") cfg.recordings_per_speaker_mean = as_double(value);
    else if (key == "recordings_per_speaker_spread") cfg.recordings_per_speaker_spread = as_double(value);
    else if (key == "recording_duration_mean_s") cfg.recording_duration_mean_s = as_double(value);
    else if (key == "recording_duration_spread_s") cfg.recording_duration_spread_s = as_double(value);
    else if (key == "speech_fraction_mean") cfg.speech_fraction_mean = as_double(value);
    else if (key == "speech_fraction_spread") cfg.speech_fraction_spread = as_double(value);
    else if (key == "speaker_centroid_sigma") cfg.speaker_centroid_sigma = as_double(value);
    else if (key == "within_speaker_sigma") cfg.within_speaker_sigma = as_double(value);
    else if (key == "speaker_subspace_dim") cfg.speaker_subspace_dim = as_int(value);
    else if (key == "recording_nuisance_sigma") cfg.recording_nuisance_sigma = as_double(value);
    else if (key == "subspace_seed") cfg.subspace_seed = as_u64(value);
    else if (key == "seed") cfg.seed = as_u64(value);
    else if (key == "train_segment_target") cfg.train_segment_target = as_u64(value);
    else if (key == "subset_fractions") {
      cfg.subset_fractions.clear();
      for (const std::string& tok : split_list(value)) cfg.subset_fractions.push_back(parse_double(tok));
    } else if (key == "n_trial_pairs") cfg.n_trial_pairs = as_u64(value);
    else if (key == "n_train_pairs") cfg.n_train_pairs = as_u64(value);
    else if (key == "si_learning_rate") cfg.si_learning_rate = as_double(value);
    else if (key == "si_epochs") cfg.si_epochs = as_int(value);
    else if (key == "siamese_phase1_learning_rate") cfg.siamese_phase1_learning_rate = as_double(value);
    else if (key == "siamese_phase2_learning_rate") cfg.siamese_phase2_learning_rate = as_double(value);
    else if (key == "siamese_epochs") cfg.siamese_epochs = as_int(value);
    else if (key == "batch_size") cfg.batch_size = as_int(value);
    else if (key == "kmeans_n_init") cfg.kmeans_n_init = as_int(value);
    else if (key == "kmeans_max_iter") cfg.kmeans_max_iter = as_int(value);
    else if (key == "kmeans_tol") cfg.kmeans_tol = as_double(value);
    else if (key == "adapt_max_iterations") cfg.adapt_max_iterations = as_int(value);
    else if (key.rfind("channel_", 0) == 0) {
      std::string rest = key.substr(8);
      std::string name;
      double ChannelParams::* field = nullptr;
      if (rest.size() > 6 && rest.substr(rest.size() - 6) == "_noise") {
        name = rest.substr(0, rest.size() - 6);
        field = &ChannelParams::noise;
      } else if (rest.size() > 11 && rest.substr(rest.size() - 11) == "_distortion") {
        name = rest.substr(0, rest.size() - 11);
        field = &ChannelParams::distortion;
      } else {
        throw std::runtime_error("config: unknown key '" + key + "'");
      }
      auto it = cfg.channel_params.find(name);
      if (it == cfg.channel_params.end()) {
        throw std::runtime_error("config: key '" + key + "' names a channel not in 'channels'");
      }
      it->second.*field = as_double(value);
    } else {
      throw std::runtime_error("config: unknown key '" + key + "'");
    }
  }
  return cfg;
}

// Shared command-line surface.
struct CommonOpts {
  std::string config_path;
  std::string out_dir = "runs/default";
  std::string channel;
  double fraction = 1.0;
  std::optional<uint64_t> seed_override;
};

void add_common(CLI::App* cmd, CommonOpts* opts) {
  cmd->add_option("--config", opts->config_path, "key = value experiment config");
  cmd->add_option("--out", opts->out_dir, "output directory");
  cmd->add_option("--channel", opts->channel, "channel name (I, A, D, ...)");
  cmd->add_option("--fraction", opts->fraction, "training subset fraction in (0, 1]");
  cmd->add_option("--seed", opts->seed_override, "override the config seed");
}

ToolConfig resolve_config(const CommonOpts& opts) {
  ToolConfig cfg = load_config(opts.config_path);
  if (opts.seed_override.has_value()) cfg.seed = *opts.seed_override;
  return cfg;
}

void log_config(const ToolConfig& cfg, const std::string& out_dir, const std::string& command) {
  fs::create_directories(fs::path(out_dir) / "logs");
  std::ofstream out(fs::path(out_dir) / "logs" / (command + ".cfg"));
  out << "command = " << command << "\n";
  out << "adapt_max_iterations = " << cfg.adapt_max_iterations << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  std::string channel_list;
  for (size_t i = 0; i < cfg.channels.size(); ++i) {
    if (i) channel_list += ",";
    channel_list += cfg.channels[i];
  }
  out << "channels = " << channel_list << "\n";
  for (const std::string& ch : cfg.channels) {
    out << "channel_" << ch << "_distortion = " << format_double(cfg.channel_params.at(ch).distortion) << "\n";
    out << "channel_" << ch << "_noise = " << format_double(cfg.channel_params.at(ch).noise) << "\n";
  }
  out << "dev_speakers = " << cfg.dev_speakers << "\n";
  out << "embedding_dim = " << cfg.embedding_dim << "\n";
  out << "feature_dim = " << cfg.feature_dim << "\n";
  out << "hidden_dim = " << cfg.hidden_dim << "\n";
  out << "kmeans_max_iter = " << cfg.kmeans_max_iter << "\n";
  out << "kmeans_n_init = " << cfg.kmeans_n_init << "\n";
  out << "kmeans_tol = " << format_double(cfg.kmeans_tol) << "\n";
  out << "n_trial_pairs = " << cfg.n_trial_pairs << "\n";
  out << "n_train_pairs = " << cfg.n_train_pairs << "\n";
  out << "recording_duration_mean_s = " << format_double(cfg.recording_duration_mean_s) << "\n";
  out << "recording_duration_spread_s = " << format_double(cfg.recording_duration_spread_s) << "\n";
  out << "recording_nuisance_sigma = " << format_double(cfg.recording_nuisance_sigma) << "\n";
  out << "recordings_per_speaker_mean = " << format_double(cfg.recordings_per_speaker_mean) << "\n";
  out << "recordings_per_speaker_spread = " << format_double(cfg.recordings_per_speaker_spread) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "si_epochs = " << cfg.si_epochs << "\n";
  out << "si_learning_rate = " << format_double(cfg.si_learning_rate) << "\n";
  out << "siamese_epochs = " << cfg.siamese_epochs << "\n";
  out << "siamese_phase1_learning_rate = " << format_double(cfg.siamese_phase1_learning_rate) << "\n";
  out << "siamese_phase2_learning_rate = " << format_double(cfg.siamese_phase2_learning_rate) << "\n";
  out << "speaker_centroid_sigma = " << format_double(cfg.speaker_centroid_sigma) << "\n";
  out << "speaker_subspace_dim = " << cfg.speaker_subspace_dim << "\n";
  out << "speech_fraction_mean = " << format_double(cfg.speech_fraction_mean) << "\n";
  out << "speech_fraction_spread = " << format_double(cfg.speech_fraction_spread) << "\n";
  std::string fractions;
  for (size_t i = 0; i < cfg.subset_fractions.size(); ++i) {
    if (i) fractions += ",";
    fractions += format_fraction(cfg.subset_fractions[i]);
  }
  out << "subset_fractions = " << fractions << "\n";
  out << "subspace_seed = " << cfg.subspace_seed << "\n";
  out << "train_segment_target = " << cfg.train_segment_target << "\n";
  out << "train_speakers = " << cfg.train_speakers << "\n";
  out << "within_speaker_sigma = " << format_double(cfg.within_speaker_sigma) << "\n";
}

CorpusSpec corpus_spec_from(const ToolConfig& cfg) {
  CorpusSpec spec;
  spec.n_speakers = cfg.train_speakers + cfg.dev_speakers;
  spec.recordings_per_speaker = {cfg.recordings_per_speaker_mean, cfg.recordings_per_speaker_spread};
  spec.recording_duration_s = {cfg.recording_duration_mean_s, cfg.recording_duration_spread_s};
  spec.speech_fraction = {cfg.speech_fraction_mean, cfg.speech_fraction_spread};
  spec.speaker_centroid_sigma = cfg.speaker_centroid_sigma;
  spec.within_speaker_sigma = cfg.within_speaker_sigma;
  spec.feature_dim = cfg.feature_dim;
  spec.speaker_subspace_dim = cfg.speaker_subspace_dim;
  spec.recording_nuisance_sigma = cfg.recording_nuisance_sigma;
  spec.subspace_seed = cfg.subspace_seed;
  spec.seed = cfg.seed;
  for (const std::string& name : cfg.channels) {
    const ChannelParams& p = cfg.channel_params.at(name);
    if (p.distortion == 0.0) {
      spec.channels.push_back(ChannelSpec::identity(name, cfg.feature_dim, p.noise));
    } else {
      Rng ch_rng = Rng(cfg.seed).derive(0xC4A17 + fnv1a(name));
      spec.channels.push_back(
          ChannelSpec::distorted(name, cfg.feature_dim, p.distortion, p.noise, ch_rng));
    }
  }
  return spec;
}

std::string train_manifest_path(const std::string& out, const std::string& ch, double fraction) {
  return (fs::path(out) / "prepared" / (ch + "_train_f" + format_fraction(fraction) + ".tsv")).string();
}

std::string require_channel(const CommonOpts& opts) {
  if (opts.channel.empty()) throw std::runtime_error("missing --channel");
  return opts.channel;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct PoolStats {
  size_t files_before = 0, files_after = 0;
  size_t speakers_before = 0, speakers_after = 0;
  double hours_before = 0.0, hours_after = 0.0;
};

PoolStats pool_stats(const std::vector<RawRecording>& pool, const PreparedDataset& filtered) {
  PoolStats st;
  st.files_before = pool.size();
  std::unordered_set<std::string> spk_before;
  for (const RawRecording& rec : pool) {
    spk_before.insert(rec.speaker_id);
    st.hours_before += rec.duration_s / 3600.0;
  }
  st.speakers_before = spk_before.size();
  std::unordered_set<std::string> files_after, spk_after;
  for (const SegmentRecord& seg : filtered.segments) {
    files_after.insert(seg.recording_id);
    spk_after.insert(seg.speaker_id);
    st.hours_after += seg.duration_s / 3600.0;
  }
  st.files_after = files_after.size();
  st.speakers_after = spk_after.size();
  return st;
}

void print_pool_row(const std::string& channel, const char* role,
                    const std::vector<RawRecording>& pool, const PreparedDataset& filtered) {
  PoolStats st = pool_stats(pool, filtered);
  std::printf("%-8s %-6s %6zu / %-6zu       %6zu / %-6zu          %8.2f / %-8.2f\n",
              channel.c_str(), role, st.files_before, st.files_after, st.speakers_before,
              st.speakers_after, st.hours_before, st.hours_after);
}

int cmd_generate(const CommonOpts& opts) {
  ToolConfig cfg = resolve_config(opts);
  log_config(cfg, opts.out_dir, "generate");
  fs::create_directories(fs::path(opts.out_dir) / "corpus");

  CorpusSpec spec = corpus_spec_from(cfg);
  Rng rng(cfg.seed);
  std::vector<ChannelRecordings> channels = generate_corpus(spec, rng);

  char boundary_buf[16];
  std::snprintf(boundary_buf, sizeof(boundary_buf), "s%05d", cfg.train_speakers);
  const std::string dev_boundary = boundary_buf;

  std::printf("channel  role   files(before/after)  speakers(before/after)  hours(before/after)\n");
  for (size_t ci = 0; ci < channels.size(); ++ci) {
    const ChannelRecordings& cr = channels[ci];
    Rng seg_rng = rng.derive(0x5E60000 + ci);

    std::vector<RawRecording> train_pool, dev_pool;
    PreparedDataset train_ds, dev_ds;
    train_ds.role = DatasetRole::kTrain;
    dev_ds.role = DatasetRole::kDev;
    train_ds.channel = dev_ds.channel = cr.channel;
    for (const RawRecording& rec : cr.recordings) {
      const bool is_dev = rec.speaker_id >= dev_boundary;
      (is_dev ? dev_pool : train_pool).push_back(rec);
      double speech = simulate_vad(rec);
      std::vector<SegmentRecord> segs = segment_recording(rec, speech, cr.noise_sigma, seg_rng);
      auto& dst = is_dev ? dev_ds.segments : train_ds.segments;
      dst.insert(dst.end(), segs.begin(), segs.end());
    }
    PreparedDataset train_f = filter_min_segments(train_ds);
    PreparedDataset dev_f = filter_min_segments(dev_ds);

    write_manifest((fs::path(opts.out_dir) / "corpus" / (cr.channel + "_train.tsv")).string(), train_f);
    write_manifest((fs::path(opts.out_dir) / "corpus" / (cr.channel + "_dev.tsv")).string(), dev_f);

    print_pool_row(cr.channel, "train", train_pool, train_f);
    print_pool_row(cr.channel, "dev", dev_pool, dev_f);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

void prepare_channel(const ToolConfig& cfg, const std::string& out, const std::string& ch) {
  PreparedDataset train =
      read_manifest((fs::path(out) / "corpus" / (ch + "_train.tsv")).string(), DatasetRole::kTrain);
  PreparedDataset dev =
      read_manifest((fs::path(out) / "corpus" / (ch + "_dev.tsv")).string(), DatasetRole::kDev);

  Rng base = Rng(cfg.seed).derive(0xBBB + fnv1a(ch));
  if (cfg.train_segment_target > 0) {
    Rng pick_rng = base.derive(1);
    train = build_training_set(train, cfg.train_segment_target, pick_rng);
  }
  fs::create_directories(fs::path(out) / "prepared");
  write_manifest((fs::path(out) / "prepared" / (ch + "_train.tsv")).string(), train);

  for (size_t fi = 0; fi < cfg.subset_fractions.size(); ++fi) {
    double f = cfg.subset_fractions[fi];
    PreparedDataset subset = select_subset(train, f);
    write_manifest(train_manifest_path(out, ch, f), subset);
    Rng pair_rng = base.derive(100 + fi);
    std::vector<TrialPair> train_pairs = generate_pairs(subset, cfg.n_train_pairs, pair_rng);
    write_trials((fs::path(out) / "prepared" /
                  (ch + "_train_f" + format_fraction(f) + "_pairs.tsv")).string(),
                 train_pairs);
    std::printf("prepare %s fraction %s: %zu speakers, %zu segments, %zu training pairs\n",
                ch.c_str(), format_fraction(f).c_str(), speaker_order(subset.segments).size(),
                subset.segments.size(), train_pairs.size());
  }

  Rng split_rng = base.derive(2);
  auto [dev_val, dev_test] = split_dev_speakers(dev, split_rng);
  write_manifest((fs::path(out) / "prepared" / (ch + "_dev_validation.tsv")).string(), dev_val);
  write_manifest((fs::path(out) / "prepared" / (ch + "_dev_test.tsv")).string(), dev_test);

  Rng val_pair_rng = base.derive(3);
  std::vector<TrialPair> val_pairs = generate_pairs(dev_val, cfg.n_trial_pairs, val_pair_rng);
  write_trials((fs::path(out) / "prepared" / (ch + "_val_pairs.tsv")).string(), val_pairs);
  Rng test_pair_rng = base.derive(4);
  std::vector<TrialPair> test_pairs = generate_pairs(dev_test, cfg.n_trial_pairs, test_pair_rng);
  write_trials((fs::path(out) / "prepared" / (ch + "_test_pairs.tsv")).string(), test_pairs);
  std::printf("prepare %s dev: %zu validation / %zu test speakers, %zu trial pairs each\n",
              ch.c_str(), speaker_order(dev_val.segments).size(),
              speaker_order(dev_test.segments).size(), val_pairs.size());
}

void check_pairs(const std::string& pair_path, const std::vector<SegmentRecord>& segments,
                 size_t expected) {
  std::vector<TrialPair> pairs = read_trials(pair_path);
  if (pairs.size() != expected) {
    throw std::runtime_error("check: " + pair_path + " has " + std::to_string(pairs.size()) +
                             " pairs, expected " + std::to_string(expected));
  }
  std::unordered_map<std::string, std::string> spk;
  for (const SegmentRecord& s : segments) spk[s.segment_id] = s.speaker_id;
  std::set<std::pair<std::string, std::string>> seen;
  size_t targets = 0;
  for (const TrialPair& p : pairs) {
    if (p.seg_a == p.seg_b) throw std::runtime_error("check: self-pair in " + pair_path);
    auto key = p.seg_a < p.seg_b ? std::make_pair(p.seg_a, p.seg_b)
                                 : std::make_pair(p.seg_b, p.seg_a);
    if (!seen.insert(key).second) throw std::runtime_error("check: duplicate pair in " + pair_path);
    auto ia = spk.find(p.seg_a);
    auto ib = spk.find(p.seg_b);
    if (ia == spk.end() || ib == spk.end()) {
      throw std::runtime_error("check: unknown segment id in " + pair_path);
    }
    int truth = ia->second == ib->second ? 1 : 0;
    if (truth != p.label) throw std::runtime_error("check: label mismatch in " + pair_path);
    targets += p.label;
  }
  if (targets * 2 != pairs.size()) {
    throw std::runtime_error("check: " + pair_path + " is not 50% target");
  }
}

void check_prepared(const ToolConfig& cfg, const std::string& out, const std::string& ch) {
  // Prefix property over the configured fractions.
  std::vector<double> fractions = cfg.subset_fractions;
  std::sort(fractions.begin(), fractions.end());
  std::vector<std::string> prev_speakers;
  for (double f : fractions) {
    PreparedDataset subset = read_manifest(train_manifest_path(out, ch, f), DatasetRole::kTrain);
    std::vector<std::string> speakers = speaker_order(subset.segments);
    std::sort(speakers.begin(), speakers.end());
    if (!std::includes(speakers.begin(), speakers.end(), prev_speakers.begin(),
                       prev_speakers.end())) {
      throw std::runtime_error("check: fraction " + format_fraction(f) +
                               " is not a superset of the smaller fraction");
    }
    prev_speakers = std::move(speakers);
    check_pairs((fs::path(out) / "prepared" / (ch + "_train_f" + format_fraction(f) + "_pairs.tsv"))
                    .string(),
                subset.segments, cfg.n_train_pairs);
  }
  PreparedDataset dev_val =
      read_manifest((fs::path(out) / "prepared" / (ch + "_dev_validation.tsv")).string(),
                    DatasetRole::kDevSiameseValidation);
  PreparedDataset dev_test = read_manifest(
      (fs::path(out) / "prepared" / (ch + "_dev_test.tsv")).string(), DatasetRole::kDevTest);
  check_pairs((fs::path(out) / "prepared" / (ch + "_val_pairs.tsv")).string(), dev_val.segments,
              cfg.n_trial_pairs);
  check_pairs((fs::path(out) / "prepared" / (ch + "_test_pairs.tsv")).string(), dev_test.segments,
              cfg.n_trial_pairs);
  std::printf("check %s: ok\n", ch.c_str());
}

int cmd_prepare(const CommonOpts& opts, bool run_check) {
  ToolConfig cfg = resolve_config(opts);
  log_config(cfg, opts.out_dir, "prepare");
  std::vector<std::string> channels =
      opts.channel.empty() ? cfg.channels : std::vector<std::string>{opts.channel};
  for (const std::string& ch : channels) {
    prepare_channel(cfg, opts.out_dir, ch);
    if (run_check) check_prepared(cfg, opts.out_dir, ch);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train-si
// ---------------------------------------------------------------------------

int cmd_train_si(const CommonOpts& opts, const std::string& mode, const std::string& init_path,
                 std::string save_path) {
  ToolConfig cfg = resolve_config(opts);
  log_config(cfg, opts.out_dir, "train-si");
  const std::string ch = require_channel(opts);
  if (mode != "from-scratch" && mode != "fine-tune") {
    throw std::runtime_error("train-si: --mode must be from-scratch or fine-tune");
  }

  PreparedDataset train = read_manifest(train_manifest_path(opts.out_dir, ch, opts.fraction),
                                        DatasetRole::kTrain);
  std::vector<std::string> class_ids;
  std::vector<int> labels = speaker_class_labels(train.segments, &class_ids);
  if (class_ids.size() < 2) throw std::runtime_error("train-si: need at least 2 speakers");

  // One segment per speaker held out for validation.
  Rng split_rng = Rng(cfg.seed).derive(0xA11 + fnv1a(ch));
  ValidationSplit split = split_hypothesized_validation(labels, split_rng);
  LabeledSet train_set = labeled_from_segments(train.segments, labels, &split.train_indices);
  LabeledSet val_set = labeled_from_segments(train.segments, labels, &split.val_indices);

  EmbeddingModel model;
  SiameseHead siam;
  TrainConfig tc;
  if (mode == "from-scratch") {
    tc = TrainConfig::si_from_scratch(Rng(cfg.seed).derive(0xF5).seed());
    Rng shape_rng(0);  // placeholder values; train_si reinitializes from tc.seed
    model = EmbeddingModel::init(cfg.feature_dim, cfg.hidden_dim, cfg.embedding_dim, shape_rng);
    siam.w.assign(cfg.embedding_dim, 0.0);
  } else {
    if (init_path.empty()) throw std::runtime_error("train-si: --mode fine-tune requires --init");
    Checkpoint ckpt = load_checkpoint(init_path);
    model = ckpt.model;
    siam = ckpt.siam;
    tc = TrainConfig::si_fine_tune(Rng(cfg.seed).derive(0xF7).seed());
  }
  tc.learning_rate = cfg.si_learning_rate;
  tc.epochs = cfg.si_epochs;
  tc.batch_size = cfg.batch_size;
  if (static_cast<int>(train.segments.front().features.size()) != model.feature_dim()) {
    throw std::runtime_error("train-si: manifest feature dim does not match the model");
  }

  ClassifierHead head;
  head.w = Matrix(static_cast<int>(class_ids.size()), model.embedding_dim());
  head.b.assign(class_ids.size(), 0.0);
  TrainHistory history = train_si(model, head, train_set, val_set, tc);

  fs::create_directories(fs::path(opts.out_dir) / "models");
  if (save_path.empty()) {
    save_path = (fs::path(opts.out_dir) / "models" /
                 ("si_" + ch + "_f" + format_fraction(opts.fraction) + "_" +
                  (mode == "from-scratch" ? "fs" : "ft") + ".ckpt")).string();
  }
  save_checkpoint(save_path, Checkpoint{model, head, siam});
  write_history(save_path + ".history.tsv", history);
  std::printf("train-si %s %s: %zu train / %zu val segments, best epoch %d, val error %s\n",
              ch.c_str(), mode.c_str(), train_set.size(), val_set.size(), history.best_epoch,
              format_double(history.best_val_error).c_str());
  std::printf("saved %s\n", save_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train-siamese
// ---------------------------------------------------------------------------

int cmd_train_siamese(const CommonOpts& opts, const std::string& init_path, std::string save_path) {
  ToolConfig cfg = resolve_config(opts);
  log_config(cfg, opts.out_dir, "train-siamese");
  const std::string ch = require_channel(opts);
  if (init_path.empty()) throw std::runtime_error("train-siamese: requires --init");

  PreparedDataset subset = read_manifest(train_manifest_path(opts.out_dir, ch, opts.fraction),
                                         DatasetRole::kTrain);
  std::vector<TrialPair> train_pairs = read_trials(
      (fs::path(opts.out_dir) / "prepared" /
       (ch + "_train_f" + format_fraction(opts.fraction) + "_pairs.tsv")).string());
  PreparedDataset dev_val =
      read_manifest((fs::path(opts.out_dir) / "prepared" / (ch + "_dev_validation.tsv")).string(),
                    DatasetRole::kDevSiameseValidation);
  std::vector<TrialPair> val_pairs =
      read_trials((fs::path(opts.out_dir) / "prepared" / (ch + "_val_pairs.tsv")).string());

  Checkpoint ckpt = load_checkpoint(init_path);
  PairSet train_set = resolve_pairs(train_pairs, subset.segments);
  PairSet val_set = resolve_pairs(val_pairs, dev_val.segments);

  SiameseTrainConfig sc;
  sc.phase1_learning_rate = cfg.siamese_phase1_learning_rate;
  sc.phase2_learning_rate = cfg.siamese_phase2_learning_rate;
  sc.epochs = cfg.siamese_epochs;
  sc.batch_size = cfg.batch_size;
  sc.seed = Rng(cfg.seed).derive(0x51A).seed();

  EmbeddingModel model = ckpt.model;
  SiameseHead head = ckpt.siam;
  TrainHistory history = train_siamese(model, head, train_set, val_set, sc);

  fs::create_directories(fs::path(opts.out_dir) / "models");
  if (save_path.empty()) {
    save_path = (fs::path(opts.out_dir) / "models" /
                 ("siamese_" + ch + "_f" + format_fraction(opts.fraction) + ".ckpt")).string();
  }
  save_checkpoint(save_path, Checkpoint{model, ckpt.cls, head});
  write_history(save_path + ".history.tsv", history);
  std::printf("train-siamese %s: %zu train / %zu val pairs, best epoch %d, val error %s\n",
              ch.c_str(), train_set.size(), val_set.size(), history.best_epoch,
              format_double(history.best_val_error).c_str());
  std::printf("saved %s\n", save_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// adapt
// ---------------------------------------------------------------------------

int cmd_adapt(const CommonOpts& opts, const std::string& technique_str,
              const std::string& clustering_str, int k, const std::string& init_path,
              std::string save_path) {
  ToolConfig cfg = resolve_config(opts);
  log_config(cfg, opts.out_dir, "adapt");
  const std::string ch = require_channel(opts);
  if (init_path.empty()) throw std::runtime_error("adapt: requires --init");
  if (k < 2) throw std::runtime_error("adapt: requires --k >= 2");
  if (technique_str != "I" && technique_str != "II") {
    throw std::runtime_error("adapt: --technique must be I or II");
  }
  if (clustering_str != "kmeans" && clustering_str != "ahc") {
    throw std::runtime_error("adapt: --clustering must be kmeans or ahc");
  }

  PreparedDataset target = read_manifest(train_manifest_path(opts.out_dir, ch, opts.fraction),
                                         DatasetRole::kTrain);
  Checkpoint ckpt = load_checkpoint(init_path);

  AdaptConfig acfg;
  acfg.technique = technique_str == "I" ? Technique::kI : Technique::kII;
  acfg.k = k;
  acfg.max_iterations = cfg.adapt_max_iterations;
  acfg.clustering.method =
      clustering_str == "kmeans" ? ClusterMethod::kKMeans : ClusterMethod::kAhc;
  acfg.clustering.k = k;
  acfg.clustering.n_init = cfg.kmeans_n_init;
  acfg.clustering.max_iter = cfg.kmeans_max_iter;
  acfg.clustering.tol = cfg.kmeans_tol;
  acfg.clustering.seed = Rng(cfg.seed).derive(0xC15 + fnv1a(ch)).seed();
  acfg.train_cfg = TrainConfig::si_fine_tune(Rng(cfg.seed).derive(0xAD0 + fnv1a(ch)).seed());
  acfg.train_cfg.learning_rate = cfg.si_learning_rate;
  acfg.train_cfg.epochs = cfg.si_epochs;
  acfg.train_cfg.batch_size = cfg.batch_size;

  const std::string tag = ch + "_" + technique_str + "_" + clustering_str;
  fs::path adapt_dir = fs::path(opts.out_dir) / "adapt";
  fs::create_directories(adapt_dir);

  AdaptHooks hooks;
  SiameseHead siam = ckpt.siam;
  // Checkpoint references are recorded relative to --out so run directories
  // stay relocatable.
  hooks.checkpoint_writer = [&](int iteration, const EmbeddingModel& model,
                                const ClassifierHead& head) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_iter%02d.ckpt", tag.c_str(), iteration);
    save_checkpoint((adapt_dir / name).string(), Checkpoint{model, head, siam});
    return (fs::path("adapt") / name).string();
  };
  const bool with_inertia = acfg.clustering.method == ClusterMethod::kKMeans;
  hooks.on_clustering = [&](int iteration, const ClusterInputs& inputs,
                            const ClusterAssignment& assignment) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_iter%02d_assignment.tsv", tag.c_str(), iteration);
    write_assignment((adapt_dir / name).string(), inputs.item_ids, assignment, with_inertia);
  };

  AdaptResult result;
  try {
    result = run_adapt_loop(ckpt.model, target.segments, acfg, hooks);
  } catch (const AdaptAborted& e) {
    write_adapt_report((adapt_dir / (tag + "_report.jsonl")).string(), e.partial);
    throw std::runtime_error(std::string("adapt aborted: ") + e.what());
  }
  write_adapt_report((adapt_dir / (tag + "_report.jsonl")).string(), result.report);

  for (const IterationRecord& rec : result.report.records) {
    std::printf("adapt %s iteration %d: validation error %s%s%s\n", tag.c_str(), rec.iteration,
                format_double(rec.validation_error).c_str(),
                rec.cluster_purity ? ", purity " : "",
                rec.cluster_purity ? format_double(*rec.cluster_purity).c_str() : "");
  }
  std::printf("adapt %s: stop=%s best_iteration=%d\n", tag.c_str(),
              stop_reason_name(result.report.stop_reason).c_str(), result.report.best_iteration);

  fs::create_directories(fs::path(opts.out_dir) / "models");
  if (save_path.empty()) {
    save_path = (fs::path(opts.out_dir) / "models" / ("adapt_" + tag + ".ckpt")).string();
  }
  // Persist the winning iteration's checkpoint under the final name.
  const int best = result.report.best_iteration;
  Checkpoint best_ckpt =
      load_checkpoint((fs::path(opts.out_dir) / result.report.records[best].checkpoint).string());
  save_checkpoint(save_path, best_ckpt);
  std::printf("saved %s\n", save_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const CommonOpts& opts, const std::string& backend_str, bool baseline,
             std::string model_path, std::string pairs_path, std::string manifest_path,
             std::string scores_out, const std::string& embeddings_out) {
  ToolConfig cfg = resolve_config(opts);
  log_config(cfg, opts.out_dir, "eval");
  const std::string ch = require_channel(opts);
  if (backend_str != "cosine" && backend_str != "siamese") {
    throw std::runtime_error("eval: --backend must be cosine or siamese");
  }
  if (baseline && !model_path.empty()) {
    throw std::runtime_error("eval: --baseline and --model are mutually exclusive");
  }
  if (baseline) {
    model_path = (fs::path(opts.out_dir) / "models" / "source.ckpt").string();
  }
  if (model_path.empty()) throw std::runtime_error("eval: provide --model or --baseline");
  if (pairs_path.empty()) {
    pairs_path = (fs::path(opts.out_dir) / "prepared" / (ch + "_test_pairs.tsv")).string();
  }
  if (manifest_path.empty()) {
    manifest_path = (fs::path(opts.out_dir) / "prepared" / (ch + "_dev_test.tsv")).string();
  }

  Checkpoint ckpt = load_checkpoint(model_path);
  PreparedDataset dataset = read_manifest(manifest_path, DatasetRole::kDevTest);
  std::vector<TrialPair> pairs = read_trials(pairs_path);

  ScoreBackend backend = backend_str == "cosine" ? ScoreBackend::kCosine : ScoreBackend::kSiamese;
  std::vector<ScoredTrial> scored =
      score_trials(ckpt.model, backend == ScoreBackend::kSiamese ? &ckpt.siam : nullptr, pairs,
                   dataset.segments, backend);
  EerResult eer = compute_eer(scored);

  fs::create_directories(fs::path(opts.out_dir) / "eval");
  if (scores_out.empty()) {
    scores_out = (fs::path(opts.out_dir) / "eval" /
                  ("scores_" + ch + "_" + backend_str + (baseline ? "_baseline" : "") + ".tsv"))
                     .string();
  }
  write_scores(scores_out, scored);

  if (!embeddings_out.empty()) {
    std::vector<std::string> ids;
    std::vector<Embedding> embeddings;
    ids.reserve(dataset.segments.size());
    for (const SegmentRecord& seg : dataset.segments) {
      ids.push_back(seg.segment_id);
      embeddings.push_back(embed(ckpt.model, seg.features));
    }
    write_embeddings(embeddings_out, ids, embeddings);
  }

  std::printf("%s\n", format_eer_line(eer).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"source-free speaker-verification adaptation experiments"};
  app.require_subcommand(1);

  CommonOpts gen_opts;
  CLI::App* gen = app.add_subcommand("generate", "synthesize per-channel corpus manifests");
  add_common(gen, &gen_opts);

  CommonOpts prep_opts;
  bool prep_check = false;
  CLI::App* prep = app.add_subcommand("prepare", "build subsets, dev halves and trial lists");
  add_common(prep, &prep_opts);
  prep->add_flag("--check", prep_check, "verify prefix property and pair invariants");

  CommonOpts tsi_opts;
  std::string tsi_mode = "from-scratch", tsi_init, tsi_save;
  CLI::App* tsi = app.add_subcommand("train-si", "speaker-identification training");
  add_common(tsi, &tsi_opts);
  tsi->add_option("--mode", tsi_mode, "from-scratch | fine-tune");
  tsi->add_option("--init", tsi_init, "checkpoint to fine-tune from");
  tsi->add_option("--save", tsi_save, "checkpoint output path");

  CommonOpts tsm_opts;
  std::string tsm_init, tsm_save;
  CLI::App* tsm = app.add_subcommand("train-siamese", "two-phase Siamese fine-tuning");
  add_common(tsm, &tsm_opts);
  tsm->add_option("--init", tsm_init, "pretrained checkpoint");
  tsm->add_option("--save", tsm_save, "checkpoint output path");

  CommonOpts ad_opts;
  std::string ad_technique = "II", ad_clustering = "kmeans", ad_init, ad_save;
  int ad_k = 0;
  CLI::App* ad = app.add_subcommand("adapt", "unsupervised iterative cluster-learn adaptation");
  add_common(ad, &ad_opts);
  ad->add_option("--technique", ad_technique, "I | II");
  ad->add_option("--clustering", ad_clustering, "kmeans | ahc");
  ad->add_option("--k", ad_k, "number of target speakers (assumed known)");
  ad->add_option("--init", ad_init, "pretrained checkpoint");
  ad->add_option("--save", ad_save, "best-model checkpoint output path");

  CommonOpts ev_opts;
  std::string ev_backend = "cosine", ev_model, ev_pairs, ev_manifest, ev_scores, ev_embeddings;
  bool ev_baseline = false;
  CLI::App* ev = app.add_subcommand("eval", "score trials and report EER");
  add_common(ev, &ev_opts);
  ev->add_option("--backend", ev_backend, "cosine | siamese");
  ev->add_flag("--baseline", ev_baseline, "score models/source.ckpt without adaptation");
  ev->add_option("--model", ev_model, "checkpoint to evaluate");
  ev->add_option("--pairs", ev_pairs, "trial list (default: prepared test pairs)");
  ev->add_option("--manifest", ev_manifest, "segment manifest backing the trial list");
  ev->add_option("--scores-out", ev_scores, "score file output path");
  ev->add_option("--embeddings-out", ev_embeddings, "also dump embeddings of the manifest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_opts);
    if (prep->parsed()) return cmd_prepare(prep_opts, prep_check);
    if (tsi->parsed()) return cmd_train_si(tsi_opts, tsi_mode, tsi_init, tsi_save);
    if (tsm->parsed()) return cmd_train_siamese(tsm_opts, tsm_init, tsm_save);
    if (ad->parsed()) return cmd_adapt(ad_opts, ad_technique, ad_clustering, ad_k, ad_init, ad_save);
    if (ev->parsed()) {
      return cmd_eval(ev_opts, ev_backend, ev_baseline, ev_model, ev_pairs, ev_manifest, ev_scores,
                      ev_embeddings);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
