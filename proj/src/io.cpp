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

#include "svadapt/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace svadapt {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

void write_block(std::ofstream& out, const std::string& name, const std::vector<double>& values) {
  out << name << ' ' << values.size() << '\n';
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out << ' ';
    out << format_double(values[i]);
  }
  out << '\n';
}

std::vector<double> read_block(std::ifstream& in, const std::string& expected_name) {
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("checkpoint: missing block '" + expected_name + "'");
  }
  std::vector<std::string> head = split_ws(header);
  if (head.size() != 2 || head[0] != expected_name) {
    throw std::runtime_error("checkpoint: expected block '" + expected_name + "', got '" + header + "'");
  }
  size_t count = static_cast<size_t>(parse_int(head[1]));
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("checkpoint: truncated block '" + expected_name + "'");
  }
  std::vector<std::string> toks = split_ws(line);
  if (toks.size() != count) {
    throw std::runtime_error("checkpoint: block '" + expected_name + "' has " +
                             std::to_string(toks.size()) + " values, expected " +
                             std::to_string(count));
  }
  std::vector<double> values;
  values.reserve(count);
  for (const std::string& t : toks) values.push_back(parse_double(t));
  return values;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void write_manifest(const std::string& path, const PreparedDataset& ds) {
  std::ofstream out = open_out(path);
  for (const SegmentRecord& seg : ds.segments) {
    out << seg.segment_id << '\t' << seg.recording_id << '\t' << seg.speaker_id << '\t'
        << ds.channel << '\t';
    for (size_t i = 0; i < seg.features.size(); ++i) {
      if (i) out << ' ';
      out << format_double(seg.features[i]);
    }
    out << '\n';
  }
}

PreparedDataset read_manifest(const std::string& path, DatasetRole role) {
  std::ifstream in = open_in(path);
  PreparedDataset ds;
  ds.role = role;
  std::string line;
  size_t lineno = 0;
  size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 5) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 5 tab fields");
    }
    SegmentRecord seg;
    seg.segment_id = fields[0];
    seg.recording_id = fields[1];
    seg.speaker_id = fields[2];
    if (ds.segments.empty()) {
      ds.channel = fields[3];
    } else if (ds.channel != fields[3]) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": mixed channels in manifest");
    }
    for (const std::string& tok : split_ws(fields[4])) seg.features.push_back(parse_double(tok));
    if (ds.segments.empty()) {
      dim = seg.features.size();
    } else if (seg.features.size() != dim) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": inconsistent feature dim");
    }
    ds.segments.push_back(std::move(seg));
  }
  return ds;
}

void write_trials(const std::string& path, const std::vector<TrialPair>& pairs) {
  std::ofstream out = open_out(path);
  for (const TrialPair& p : pairs) {
    out << p.seg_a << '\t' << p.seg_b << '\t' << p.label << '\n';
  }
}

std::vector<TrialPair> read_trials(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<TrialPair> pairs;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split(line, '\t');
    if (fields.size() != 3) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 3 tab fields");
    }
    long long label = parse_int(fields[2]);
    if (label != 0 && label != 1) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
    }
    pairs.push_back(TrialPair{fields[0], fields[1], static_cast<int>(label)});
  }
  return pairs;
}

void write_embeddings(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<Embedding>& embeddings) {
  if (ids.size() != embeddings.size()) {
    throw std::invalid_argument("write_embeddings: ids/embeddings size mismatch");
  }
  std::ofstream out = open_out(path);
  const size_t dim = embeddings.empty() ? 0 : embeddings.front().size();
  out << "dim=" << dim << '\n';
  for (size_t i = 0; i < ids.size(); ++i) {
    if (embeddings[i].size() != dim) {
      throw std::invalid_argument("write_embeddings: inconsistent dimension");
    }
    out << ids[i];
    for (double v : embeddings[i]) out << ' ' << format_double(v);
    out << '\n';
  }
}

std::pair<std::vector<std::string>, std::vector<Embedding>> read_embeddings(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string header;
  if (!std::getline(in, header) || header.rfind("dim=", 0) != 0) {
    throw std::runtime_error(path + ": missing 'dim=' header");
  }
  size_t dim = static_cast<size_t>(parse_int(header.substr(4)));
  std::vector<std::string> ids;
  std::vector<Embedding> embeddings;
  std::string line;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> toks = split_ws(line);
    if (toks.size() != dim + 1) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected id + " +
                               std::to_string(dim) + " values");
    }
    ids.push_back(toks[0]);
    Embedding e;
    e.reserve(dim);
    for (size_t i = 1; i < toks.size(); ++i) e.push_back(parse_double(toks[i]));
    embeddings.push_back(std::move(e));
  }
  return {std::move(ids), std::move(embeddings)};
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out = open_out(path);
  out << "dims " << ckpt.model.feature_dim() << ' ' << ckpt.model.hidden_dim() << ' '
      << ckpt.model.embedding_dim() << ' ' << ckpt.cls.num_classes() << '\n';
  write_block(out, "base.W", ckpt.model.base_w.data);
  write_block(out, "base.b", ckpt.model.base_b);
  write_block(out, "trunk.W", ckpt.model.trunk_w.data);
  write_block(out, "trunk.b", ckpt.model.trunk_b);
  write_block(out, "cls.W", ckpt.cls.w.data);
  write_block(out, "cls.b", ckpt.cls.b);
  write_block(out, "siam.w", ckpt.siam.w);
  write_block(out, "siam.b", {ckpt.siam.b});
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error(path + ": empty checkpoint");
  std::vector<std::string> head = split_ws(header);
  if (head.size() != 5 || head[0] != "dims") {
    throw std::runtime_error(path + ": bad checkpoint header '" + header + "'");
  }
  const int feat = static_cast<int>(parse_int(head[1]));
  const int hid = static_cast<int>(parse_int(head[2]));
  const int emb = static_cast<int>(parse_int(head[3]));
  const int classes = static_cast<int>(parse_int(head[4]));
  if (feat <= 0 || hid <= 0 || emb <= 0 || classes <= 0) {
    throw std::runtime_error(path + ": non-positive dims in checkpoint header");
  }

  auto fill_matrix = [&](Matrix& m, int rows, int cols, const char* name) {
    std::vector<double> values = read_block(in, name);
    if (values.size() != static_cast<size_t>(rows) * cols) {
      throw std::runtime_error(path + ": block '" + name + "' size mismatch");
    }
    m = Matrix(rows, cols);
    m.data = std::move(values);
  };

  Checkpoint ckpt;
  fill_matrix(ckpt.model.base_w, hid, feat, "base.W");
  ckpt.model.base_b = read_block(in, "base.b");
  fill_matrix(ckpt.model.trunk_w, emb, hid, "trunk.W");
  ckpt.model.trunk_b = read_block(in, "trunk.b");
  fill_matrix(ckpt.cls.w, classes, emb, "cls.W");
  ckpt.cls.b = read_block(in, "cls.b");
  ckpt.siam.w = read_block(in, "siam.w");
  std::vector<double> siam_b = read_block(in, "siam.b");
  if (ckpt.model.base_b.size() != static_cast<size_t>(hid) ||
      ckpt.model.trunk_b.size() != static_cast<size_t>(emb) ||
      ckpt.cls.b.size() != static_cast<size_t>(classes) ||
      ckpt.siam.w.size() != static_cast<size_t>(emb) || siam_b.size() != 1) {
    throw std::runtime_error(path + ": checkpoint block sizes inconsistent with dims");
  }
  ckpt.siam.b = siam_b[0];
  return ckpt;
}

void write_assignment(const std::string& path, const std::vector<std::string>& item_ids,
                      const ClusterAssignment& assignment, bool with_inertia) {
  if (item_ids.size() != assignment.labels.size()) {
    throw std::invalid_argument("write_assignment: ids/labels size mismatch");
  }
  std::ofstream out = open_out(path);
  for (size_t i = 0; i < item_ids.size(); ++i) {
    out << item_ids[i] << '\t' << assignment.labels[i] << '\n';
  }
  if (with_inertia) out << "# inertia=" << format_double(assignment.inertia) << '\n';
}

void write_scores(const std::string& path, const std::vector<ScoredTrial>& scored) {
  std::ofstream out = open_out(path);
  for (const ScoredTrial& st : scored) {
    out << st.pair.seg_a << '\t' << st.pair.seg_b << '\t' << st.pair.label << '\t'
        << format_double(st.score) << '\n';
  }
}

std::string format_eer_line(const EerResult& result) {
  return "eer=" + format_double(result.eer) + " threshold=" + format_double(result.threshold) +
         " n_target=" + std::to_string(result.n_target) +
         " n_nontarget=" + std::to_string(result.n_nontarget);
}

void write_adapt_report(const std::string& path, const AdaptReport& report) {
  std::ofstream out = open_out(path);
  for (const IterationRecord& rec : report.records) {
    nlohmann::json j;
    j["iteration"] = rec.iteration;
    j["validation_error"] = rec.validation_error;
    if (rec.cluster_purity.has_value()) {
      j["purity"] = *rec.cluster_purity;
    } else {
      j["purity"] = nullptr;
    }
    j["checkpoint"] = rec.checkpoint;
    out << j.dump() << '\n';
  }
  nlohmann::json tail;
  tail["best_iteration"] = report.best_iteration;
  tail["stop_reason"] = stop_reason_name(report.stop_reason);
  out << tail.dump() << '\n';
}

AdaptReport read_adapt_report(const std::string& path) {
  std::ifstream in = open_in(path);
  AdaptReport report;
  std::string line;
  bool saw_tail = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.contains("stop_reason")) {
      report.best_iteration = j.at("best_iteration").get<int>();
      std::string reason = j.at("stop_reason").get<std::string>();
      report.stop_reason =
          reason == "ErrorRose" ? StopReason::kErrorRose : StopReason::kMaxIterations;
      saw_tail = true;
      continue;
    }
    IterationRecord rec;
    rec.iteration = j.at("iteration").get<int>();
    rec.validation_error = j.at("validation_error").get<double>();
    if (!j.at("purity").is_null()) rec.cluster_purity = j.at("purity").get<double>();
    rec.checkpoint = j.at("checkpoint").get<std::string>();
    report.records.push_back(rec);
  }
  if (!saw_tail) throw std::runtime_error(path + ": adapt report missing final stop_reason line");
  return report;
}

std::vector<std::pair<std::string, std::string>> read_key_value_file(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string stripped = line;
    size_t hash = stripped.find('#');
    if (hash != std::string::npos) stripped = stripped.substr(0, hash);
    stripped = trim(stripped);
    if (stripped.empty()) continue;
    size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
    }
    for (const auto& [k, v] : entries) {
      if (k == key) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      }
    }
    entries.emplace_back(key, value);
  }
  return entries;
}

void write_history(const std::string& path, const TrainHistory& history) {
  std::ofstream out = open_out(path);
  for (size_t e = 0; e < history.epochs.size(); ++e) {
    out << e << '\t' << format_double(history.epochs[e].train_loss) << '\t'
        << format_double(history.epochs[e].val_error) << '\n';
  }
}

}  // namespace svadapt
