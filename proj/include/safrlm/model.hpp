#pragma once

// The full text-audio regressor: alignment, fusion initialization, two
// adjustment stacks, self-attention heads, and classifiers.

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "safrlm/align.hpp"
#include "safrlm/config.hpp"
#include "safrlm/data.hpp"
#include "safrlm/fusion.hpp"
#include "safrlm/heads.hpp"
#include "safrlm/xadjust.hpp"

namespace safrlm {

struct ModelConfig {
  int d_text = 300;
  int d_audio = 74;
  int text_length = 50;
  int audio_length = 375;
  ConvSpec conv;
  int gru_depth = 1;
  int blocks_per_stage = 5;
  BlockConfig block;
  HeadsConfig heads;
  LossWeights loss_weights = kUnitLossWeights;

  static ModelConfig from_run_config(const RunConfig& c);
  int width() const { return conv.out_channels; }
  /// Aligned length l for the configured padded extents.
  Eigen::Index aligned_length() const { return conv.aligned_length(text_length, audio_length); }
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct ModelLayers {
  AlignModule align;
  FusionWeights fusion;
  AdjustStack adjust_ta_prime;   // keys X_T then X_A'
  AdjustStack adjust_t_prime_a;  // keys X_T' then X_A
  HeadsModule heads;
};

template <typename T>
class Model {
 public:
  Model(ModelConfig config, ModelLayers layers, ParamStore<T> params)
      : config_(std::move(config)), layers_(std::move(layers)), params_(std::move(params)) {}

  /// Parameters drawn from a generator seeded with `seed`, in a fixed order.
  static Model create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ModelLayers& layers() const { return layers_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Expects inputs already padded to the configured extents (or any lengths
  /// whose convolutions agree).
  PredictionTriple<ag::Var> forward(Graph<T>& g, ag::Var text, ag::Var audio) const;

  /// Evaluation-mode prediction for one record; pads to the configured extents.
  PredictionTriple<double> predict(const UtteranceRecord& record) const;
  PredictionTriple<double> predict(const MatD& padded_text, const MatD& padded_audio) const;

  template <typename U>
  Model<U> cast() const {
    return Model<U>(config_, layers_, params_.template cast<U>());
  }

  /// {"model": ModelConfig, "params": ParamStore}
  nlohmann::ordered_json checkpoint_json() const;
  static Model from_checkpoint(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  ModelConfig config_;
  ModelLayers layers_;
  ParamStore<T> params_;
};

/// Pads the record's modalities to the model's configured extents.
std::pair<MatD, MatD> pad_record(const UtteranceRecord& record, const ModelConfig& config);

}  // namespace safrlm
