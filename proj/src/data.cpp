#include "safrlm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "safrlm/error.hpp"
#include "safrlm/rng.hpp"

namespace safrlm {

using nlohmann::json;

Eigen::Index DatasetSplit::max_text_length() const {
  Eigen::Index m = 0;
  for (const auto& r : records) m = std::max(m, r.text.rows());
  return m;
}

Eigen::Index DatasetSplit::max_audio_length() const {
  Eigen::Index m = 0;
  for (const auto& r : records) m = std::max(m, r.audio.rows());
  return m;
}

void validate_record(const UtteranceRecord& r) {
  if (r.text.rows() < 1 || r.audio.rows() < 1) {
    throw Error(ErrorCode::validation, "record '" + r.id + "' has an empty modality sequence");
  }
  if (!r.text.allFinite() || !r.audio.allFinite()) {
    throw Error(ErrorCode::validation, "record '" + r.id + "' contains non-finite features");
  }
  if (!std::isfinite(r.label) || r.label < kLabelMin || r.label > kLabelMax) {
    throw Error(ErrorCode::validation, "record '" + r.id + "' label outside [-3, 3]");
  }
}

void validate_split(const DatasetSplit& split) {
  if (split.records.empty()) throw Error(ErrorCode::validation, "dataset split is empty");
  std::unordered_set<std::string> ids;
  const auto dt = split.text_dim();
  const auto da = split.audio_dim();
  for (const auto& r : split.records) {
    validate_record(r);
    if (r.text.cols() != dt || r.audio.cols() != da) {
      throw Error(ErrorCode::dimension, "record '" + r.id + "' has feature dimensions (" +
                                            std::to_string(r.text.cols()) + ", " + std::to_string(r.audio.cols()) +
                                            "), expected (" + std::to_string(dt) + ", " + std::to_string(da) + ")");
    }
    if (!ids.insert(r.id).second) throw Error(ErrorCode::validation, "duplicate record id '" + r.id + "'");
  }
}

void SyntheticSpec::validate() const {
  if (n_records < 1) throw Error(ErrorCode::validation, "n_records must be >= 1");
  if (text_length.min < 1 || text_length.max < text_length.min) {
    throw Error(ErrorCode::validation, "text_length range must be non-empty with min >= 1");
  }
  if (audio_length.min < 1 || audio_length.max < audio_length.min) {
    throw Error(ErrorCode::validation, "audio_length range must be non-empty with min >= 1");
  }
  if (d_text < 1 || d_audio < 1) throw Error(ErrorCode::validation, "feature dimensions must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::validation, "noise_sigma must be finite and >= 0");
  }
}

double synthetic_label(const MatD& text, const MatD& audio, double noise) {
  const double mt = text.col(0).mean();
  const double ma = audio.col(0).mean();
  const double y = kSynthAlpha * mt + kSynthBeta * ma + kSynthGamma * mt * ma + noise;
  return std::clamp(y, kLabelMin, kLabelMax);
}

DatasetSplit generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  DatasetSplit split;
  split.role = spec.role;
  split.records.reserve(static_cast<std::size_t>(spec.n_records));
  for (int i = 0; i < spec.n_records; ++i) {
    Rng rng(spec.seed, static_cast<std::uint64_t>(i));
    const auto lt = rng.uniform_int(spec.text_length.min, spec.text_length.max);
    const auto la = rng.uniform_int(spec.audio_length.min, spec.audio_length.max);
    UtteranceRecord r;
    r.id = "synth-" + std::to_string(spec.seed) + "-" + std::to_string(i);
    r.text.resize(lt, spec.d_text);
    r.audio.resize(la, spec.d_audio);
    for (Eigen::Index k = 0; k < r.text.size(); ++k) r.text.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < r.audio.size(); ++k) r.audio.data()[k] = rng.normal();
    const double eps = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
    r.label = synthetic_label(r.text, r.audio, eps);
    split.records.push_back(std::move(r));
  }
  return split;
}

namespace {

LengthRange parse_range(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 2) {
    throw Error(ErrorCode::validation, std::string(key) + " must be a two-element [min, max] array");
  }
  return LengthRange{j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

SyntheticSpec synthetic_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::validation, std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::validation, "synthetic spec must be a JSON object");
  SyntheticSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_records") s.n_records = v.get<int>();
      else if (key == "text_length") s.text_length = parse_range(v, "text_length");
      else if (key == "audio_length") s.audio_length = parse_range(v, "audio_length");
      else if (key == "d_text") s.d_text = v.get<int>();
      else if (key == "d_audio") s.d_audio = v.get<int>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "noise_sigma") s.noise_sigma = v.get<double>();
      else throw Error(ErrorCode::validation, "unknown synthetic spec key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("synthetic spec has a malformed value: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open synthetic spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return synthetic_spec_from_json(ss.str());
}

namespace {

json matrix_rows(const MatD& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatD parse_matrix(const json& j, const char* field, std::size_t line_no, std::optional<Eigen::Index> width) {
  auto fail = [&](const std::string& what, ErrorCode code = ErrorCode::validation) {
    return Error(code, "line " + std::to_string(line_no) + ": field '" + field + "' " + what);
  };
  if (!j.is_array() || j.empty()) throw fail("must be a non-empty array of rows");
  if (!j[0].is_array()) throw fail("must be an array of rows");
  const auto expected = width.value_or(static_cast<Eigen::Index>(j[0].size()));
  if (expected < 1) throw fail("rows must be non-empty");
  MatD m(static_cast<Eigen::Index>(j.size()), expected);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array()) throw fail("row " + std::to_string(r) + " is not an array");
    if (static_cast<Eigen::Index>(row.size()) != expected) {
      throw fail("row " + std::to_string(r) + " has length " + std::to_string(row.size()) + ", expected " +
                     std::to_string(expected),
                 ErrorCode::dimension);
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!row[c].is_number()) throw fail("row " + std::to_string(r) + " contains a non-numeric value");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return m;
}

}  // namespace

void save_jsonl(const DatasetSplit& split, const std::filesystem::path& path) {
  validate_split(split);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& r : split.records) {
    json j;
    j["id"] = r.id;
    j["text"] = matrix_rows(r.text);
    j["audio"] = matrix_rows(r.audio);
    j["label"] = r.label;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::io, "failed while writing " + path.string());
}

DatasetSplit load_jsonl(const std::filesystem::path& path, SplitRole role) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open dataset " + path.string());
  DatasetSplit split;
  split.role = role;
  std::optional<Eigen::Index> d_text;
  std::optional<Eigen::Index> d_audio;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::validation, "line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw Error(ErrorCode::validation, "line " + std::to_string(line_no) + ": not an object");
    for (const char* key : {"id", "text", "audio", "label"}) {
      if (!j.contains(key)) {
        throw Error(ErrorCode::validation, "line " + std::to_string(line_no) + ": missing field '" + key + "'");
      }
    }
    if (!j["id"].is_string() || !j["label"].is_number()) {
      throw Error(ErrorCode::validation, "line " + std::to_string(line_no) + ": 'id' must be a string, 'label' a number");
    }
    UtteranceRecord r;
    r.id = j["id"].get<std::string>();
    r.text = parse_matrix(j["text"], "text", line_no, d_text);
    r.audio = parse_matrix(j["audio"], "audio", line_no, d_audio);
    r.label = j["label"].get<double>();
    if (r.label < kLabelMin || r.label > kLabelMax) {
      throw Error(ErrorCode::validation, "line " + std::to_string(line_no) + ": label " + std::to_string(r.label) +
                                             " outside [-3, 3]");
    }
    if (!ids.insert(r.id).second) {
      throw Error(ErrorCode::validation, "line " + std::to_string(line_no) + ": duplicate id '" + r.id + "'");
    }
    d_text = r.text.cols();
    d_audio = r.audio.cols();
    split.records.push_back(std::move(r));
  }
  validate_split(split);
  return split;
}

MatD pad_rows(const MatD& m, Eigen::Index length) {
  MatD out = MatD::Zero(length, m.cols());
  out.topRows(m.rows()) = m;
  return out;
}

std::vector<Batch> make_batches(const DatasetSplit& split, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed, const PadTo& pad) {
  if (batch_size < 1) throw Error(ErrorCode::validation, "batch_size must be >= 1");
  std::vector<std::size_t> order(split.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Eigen::Index lt = 0;
    Eigen::Index la = 0;
    for (std::size_t k = start; k < end; ++k) {
      lt = std::max(lt, split.records[order[k]].text.rows());
      la = std::max(la, split.records[order[k]].audio.rows());
    }
    if (pad.text_length) {
      if (lt > *pad.text_length) {
        throw Error(ErrorCode::dimension, "text sequence of length " + std::to_string(lt) +
                                                       " exceeds padded length " + std::to_string(*pad.text_length));
      }
      lt = *pad.text_length;
    }
    if (pad.audio_length) {
      if (la > *pad.audio_length) {
        throw Error(ErrorCode::dimension, "audio sequence of length " + std::to_string(la) +
                                                       " exceeds padded length " + std::to_string(*pad.audio_length));
      }
      la = *pad.audio_length;
    }
    Batch b;
    for (std::size_t k = start; k < end; ++k) {
      const auto& r = split.records[order[k]];
      b.ids.push_back(r.id);
      b.text.push_back(pad_rows(r.text, lt));
      b.audio.push_back(pad_rows(r.audio, la));
      b.text_lengths.push_back(r.text.rows());
      b.audio_lengths.push_back(r.audio.rows());
      b.labels.push_back(r.label);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace safrlm
