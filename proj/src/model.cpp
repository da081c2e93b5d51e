#include "safrlm/model.hpp"

#include <fstream>
#include <sstream>

#include "safrlm/error.hpp"
#include "safrlm/rng.hpp"

namespace safrlm {

using nlohmann::json;
using nlohmann::ordered_json;

ModelConfig ModelConfig::from_run_config(const RunConfig& c) {
  ModelConfig m;
  m.d_text = c.data.d_text;
  m.d_audio = c.data.d_audio;
  m.text_length = c.data.text_length;
  m.audio_length = c.data.audio_length;
  m.conv = c.conv;
  m.gru_depth = c.gru_depth;
  m.blocks_per_stage = c.xadjust.blocks_per_stage;
  m.block = BlockConfig{c.conv.out_channels, c.xadjust.heads, c.xadjust.ff_width, c.xadjust.dropout,
                        c.xadjust.scale_mode};
  m.heads = c.heads;
  m.loss_weights = c.loss_weights;
  return m;
}

void ModelConfig::validate() const {
  if (d_text < 1 || d_audio < 1) throw Error(ErrorCode::configuration, "feature dimensions must be >= 1");
  aligned_length();
  if (block.width != conv.out_channels) {
    throw Error(ErrorCode::configuration, "block width must equal conv.out_channels");
  }
  block.validate();
  if (blocks_per_stage < 1 || heads.self_blocks < 1 || gru_depth < 1) {
    throw Error(ErrorCode::configuration, "block counts and gru depth must be >= 1");
  }
}

ordered_json ModelConfig::to_json() const {
  ordered_json j;
  j["d_text"] = d_text;
  j["d_audio"] = d_audio;
  j["text_length"] = text_length;
  j["audio_length"] = audio_length;
  j["conv"] = {{"kernel_text", conv.kernel_text},
               {"stride_text", conv.stride_text},
               {"kernel_audio", conv.kernel_audio},
               {"stride_audio", conv.stride_audio},
               {"out_channels", conv.out_channels}};
  j["gru_depth"] = gru_depth;
  j["blocks_per_stage"] = blocks_per_stage;
  j["heads"] = block.heads;
  j["ff_width"] = block.ff_width;
  j["block_dropout"] = block.dropout;
  j["scale_mode"] = to_string(block.scale);
  j["self_blocks"] = heads.self_blocks;
  j["hidden"] = heads.hidden;
  j["head_dropout"] = heads.dropout;
  j["loss_weights"] = loss_weights;
  return j;
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig m;
  try {
    m.d_text = j.at("d_text").get<int>();
    m.d_audio = j.at("d_audio").get<int>();
    m.text_length = j.at("text_length").get<int>();
    m.audio_length = j.at("audio_length").get<int>();
    const auto& c = j.at("conv");
    m.conv.kernel_text = c.at("kernel_text").get<int>();
    m.conv.stride_text = c.at("stride_text").get<int>();
    m.conv.kernel_audio = c.at("kernel_audio").get<int>();
    m.conv.stride_audio = c.at("stride_audio").get<int>();
    m.conv.out_channels = c.at("out_channels").get<int>();
    m.gru_depth = j.at("gru_depth").get<int>();
    m.blocks_per_stage = j.at("blocks_per_stage").get<int>();
    m.block.width = m.conv.out_channels;
    m.block.heads = j.at("heads").get<int>();
    m.block.ff_width = j.at("ff_width").get<int>();
    m.block.dropout = j.at("block_dropout").get<double>();
    m.block.scale = scale_mode_from_string(j.at("scale_mode").get<std::string>());
    m.heads.self_blocks = j.at("self_blocks").get<int>();
    m.heads.hidden = j.at("hidden").get<int>();
    m.heads.dropout = j.at("head_dropout").get<double>();
    const auto w = j.at("loss_weights").get<std::vector<double>>();
    if (w.size() != 3) throw Error(ErrorCode::validation, "loss_weights must have 3 entries");
    m.loss_weights = {w[0], w[1], w[2]};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::validation, std::string("malformed model config: ") + e.what());
  }
  m.validate();
  return m;
}

template <typename T>
Model<T> Model<T>::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore<T> store;
  ModelLayers layers;
  layers.align = make_align_module(store, config.conv, config.d_text, config.d_audio, config.gru_depth, rng);
  layers.fusion = make_fusion_weights(store, config.width());
  layers.adjust_ta_prime = make_adjust_stack(store, "ta_prime", config.blocks_per_stage, config.block, rng);
  layers.adjust_t_prime_a = make_adjust_stack(store, "t_prime_a", config.blocks_per_stage, config.block, rng);
  layers.heads = make_heads_module(store, config.heads, config.block, rng);
  return Model(config, std::move(layers), std::move(store));
}

template <typename T>
PredictionTriple<ag::Var> Model<T>::forward(Graph<T>& g, ag::Var text, ag::Var audio) const {
  const auto aligned = align_pair(g, text, audio, layers_.align);
  const auto collab = collab_attention(g, aligned.text, aligned.audio);
  const auto fused = init_fusion(g, aligned.text, aligned.audio, collab.x_tp, collab.x_ap, layers_.fusion);
  const ag::Var adj_tap =
      self_adjust(g, fused.x_tap, aligned.text, collab.x_ap, layers_.adjust_ta_prime, "xadjust.ta_prime");
  const ag::Var adj_tpa =
      self_adjust(g, fused.x_tpa, collab.x_tp, aligned.audio, layers_.adjust_t_prime_a, "xadjust.t_prime_a");
  return safrlm::predict(g, adj_tap, adj_tpa, layers_.heads);
}

std::pair<MatD, MatD> pad_record(const UtteranceRecord& record, const ModelConfig& config) {
  if (record.text.cols() != config.d_text || record.audio.cols() != config.d_audio) {
    throw Error(ErrorCode::dimension, "record '" + record.id + "' feature dims do not match the model (" +
                                          std::to_string(config.d_text) + ", " + std::to_string(config.d_audio) +
                                          ")");
  }
  if (record.text.rows() > config.text_length || record.audio.rows() > config.audio_length) {
    throw Error(ErrorCode::dimension, "record '" + record.id + "' is longer than the padded extents (" +
                                          std::to_string(config.text_length) + ", " +
                                          std::to_string(config.audio_length) + ")");
  }
  return {pad_rows(record.text, config.text_length), pad_rows(record.audio, config.audio_length)};
}

template <typename T>
PredictionTriple<double> Model<T>::predict(const MatD& padded_text, const MatD& padded_audio) const {
  Graph<T> g(params_);
  const auto p = forward(g, g.input(padded_text.cast<T>()), g.input(padded_audio.cast<T>()));
  return {static_cast<double>(g.value(p.ta_prime)(0, 0)), static_cast<double>(g.value(p.t_prime_a)(0, 0)),
          static_cast<double>(g.value(p.global)(0, 0))};
}

template <typename T>
PredictionTriple<double> Model<T>::predict(const UtteranceRecord& record) const {
  const auto [text, audio] = pad_record(record, config_);
  return predict(text, audio);
}

template <typename T>
ordered_json Model<T>::checkpoint_json() const {
  ordered_json j;
  j["model"] = config_.to_json();
  j["params"] = params_.to_json();
  return j;
}

template <typename T>
Model<T> Model<T>::from_checkpoint(const json& j) {
  if (!j.is_object() || !j.contains("model") || !j.contains("params")) {
    throw Error(ErrorCode::validation, "checkpoint must contain 'model' and 'params'");
  }
  Model m = create(ModelConfig::from_json(j.at("model")), 0);
  m.params_.load_json(j.at("params"));
  return m;
}

template <typename T>
void Model<T>::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write checkpoint " + path.string());
  out << checkpoint_json().dump() << '\n';
}

template <typename T>
Model<T> Model<T>::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::validation, "checkpoint " + path.string() + " is not valid JSON");
  return from_checkpoint(j);
}

template class Model<float>;
template class Model<double>;

}  // namespace safrlm
