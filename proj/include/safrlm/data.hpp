#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "safrlm/autograd.hpp"

namespace safrlm {

inline constexpr int kDefaultTextDim = 300;
inline constexpr int kDefaultAudioDim = 74;
inline constexpr double kLabelMin = -3.0;
inline constexpr double kLabelMax = 3.0;

/// One utterance: unaligned text (L_T x d_text) and audio (L_A x d_audio)
/// feature sequences with a sentiment score in [-3, 3].
struct UtteranceRecord {
  std::string id;
  MatD text;
  MatD audio;
  double label = 0.0;
};

enum class SplitRole { train, validation, test };

struct DatasetSplit {
  std::vector<UtteranceRecord> records;
  SplitRole role = SplitRole::train;

  std::size_t size() const { return records.size(); }
  Eigen::Index text_dim() const { return records.front().text.cols(); }
  Eigen::Index audio_dim() const { return records.front().audio.cols(); }
  Eigen::Index max_text_length() const;
  Eigen::Index max_audio_length() const;
};

/// Throws ErrorCode::validation / ErrorCode::dimension on the first violated invariant.
void validate_record(const UtteranceRecord& r);
void validate_split(const DatasetSplit& split);

struct LengthRange {
  int min = 1;
  int max = 1;
};

struct SyntheticSpec {
  int n_records = 100;
  LengthRange text_length{10, 20};
  LengthRange audio_length{20, 40};
  int d_text = kDefaultTextDim;
  int d_audio = kDefaultAudioDim;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  SplitRole role = SplitRole::train;

  void validate() const;
};

// Label model for synthetic data.
inline constexpr double kSynthAlpha = 1.5;
inline constexpr double kSynthBeta = 1.5;
inline constexpr double kSynthGamma = 1.0;

/// Noise-free label: clip(alpha m_T + beta m_A + gamma m_T m_A, -3, 3), with
/// m_X the time-mean of feature channel 0.
double synthetic_label(const MatD& text, const MatD& audio, double noise = 0.0);

DatasetSplit generate_synthetic(const SyntheticSpec& spec);

/// Spec file format: {"n_records", "text_length": [lo, hi], "audio_length": [lo, hi],
/// "d_text", "d_audio", "seed", "noise_sigma"}; unknown keys rejected.
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
SyntheticSpec synthetic_spec_from_json(const std::string& text);

/// JSON-lines, one {"id", "text", "audio", "label"} object per line.
void save_jsonl(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_jsonl(const std::filesystem::path& path, SplitRole role = SplitRole::train);

struct Batch {
  std::vector<std::string> ids;
  std::vector<MatD> text;   // B x (L_T,max x d_text), zero-padded
  std::vector<MatD> audio;  // B x (L_A,max x d_audio), zero-padded
  std::vector<Eigen::Index> text_lengths;
  std::vector<Eigen::Index> audio_lengths;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
};

/// Fixed padded extents; absent members fall back to the per-batch maximum.
struct PadTo {
  std::optional<Eigen::Index> text_length;
  std::optional<Eigen::Index> audio_length;
};

std::vector<Batch> make_batches(const DatasetSplit& split, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed = std::nullopt,
                                const PadTo& pad = {});

/// Zero-pads rows at the end up to `length`.
MatD pad_rows(const MatD& m, Eigen::Index length);

}  // namespace safrlm
