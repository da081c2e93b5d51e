#pragma once

// Run configuration: one JSON document holding every hyperparameter and
// module setting. Defaults follow the reference training setup (batch 12,
// 20 epochs, Adam at 1e-3, 50 conv channels, 200-unit FC layers, dropout 0.3).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "safrlm/align.hpp"
#include "safrlm/heads.hpp"
#include "safrlm/metrics.hpp"
#include "safrlm/xadjust.hpp"

namespace safrlm {

struct DataConfig {
  std::string train;
  std::string validation;
  std::string test;
  int d_text = 300;
  int d_audio = 74;
  int text_length = 50;    // padded extent fed to the text convolution
  int audio_length = 375;  // padded extent fed to the audio convolution
};

struct XAdjustConfig {
  int blocks_per_stage = 5;
  int heads = 5;
  int ff_width = 200;
  double dropout = 0.3;
  ScaleMode scale_mode = ScaleMode::per_head;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 12;
  int epochs = 20;
  std::uint64_t seed = 1;
  bool shuffle = true;
};

inline constexpr int kDefaultSeedCount = 5;

struct RunConfig {
  DataConfig data;
  ConvSpec conv;
  int gru_depth = 1;
  XAdjustConfig xadjust;
  HeadsConfig heads;
  LossWeights loss_weights = kUnitLossWeights;
  TrainConfig train;
  Binarize binarize = Binarize::geq_zero;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "runs/default";

  /// Throws ErrorCode::configuration on the first invalid setting, including
  /// padded lengths whose convolutions disagree on the aligned length.
  void validate() const;

  /// Fully-resolved nested document (defaults expanded).
  nlohmann::ordered_json to_json() const;
};

/// Parses a (possibly partial) nested document over the defaults. Unknown keys
/// and type mismatches are rejected with ErrorCode::configuration.
RunConfig config_from_json(const nlohmann::json& j, const RunConfig& base = RunConfig{});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = RunConfig{});

/// Applies "dotted.key=value" overrides; value is parsed as JSON, falling back
/// to a plain string.
RunConfig apply_overrides(const RunConfig& config, const std::vector<std::string>& assignments);

/// Replaces train.seed with SAFRLM_SEED when that variable is set.
RunConfig apply_seed_env(const RunConfig& config);

std::string to_string(ScaleMode m);
ScaleMode scale_mode_from_string(const std::string& s);

}  // namespace safrlm
