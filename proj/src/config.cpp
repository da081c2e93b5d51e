#include "safrlm/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "safrlm/error.hpp"

namespace safrlm {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(ScaleMode m) { return m == ScaleMode::per_head ? "per_head" : "full_dim"; }

ScaleMode scale_mode_from_string(const std::string& s) {
  if (s == "per_head") return ScaleMode::per_head;
  if (s == "full_dim") return ScaleMode::full_dim;
  throw Error(ErrorCode::configuration, "xadjust.scale_mode must be per_head or full_dim, got '" + s + "'");
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["data"] = {{"train", data.train},
               {"validation", data.validation},
               {"test", data.test},
               {"d_text", data.d_text},
               {"d_audio", data.d_audio},
               {"text_length", data.text_length},
               {"audio_length", data.audio_length}};
  j["conv"] = {{"kernel_text", conv.kernel_text},
               {"stride_text", conv.stride_text},
               {"kernel_audio", conv.kernel_audio},
               {"stride_audio", conv.stride_audio},
               {"out_channels", conv.out_channels}};
  j["gru"] = {{"depth", gru_depth}};
  j["xadjust"] = {{"blocks_per_stage", xadjust.blocks_per_stage},
                  {"heads", xadjust.heads},
                  {"ff_width", xadjust.ff_width},
                  {"dropout", xadjust.dropout},
                  {"scale_mode", to_string(xadjust.scale_mode)}};
  j["heads"] = {{"self_blocks", heads.self_blocks},
                {"hidden", heads.hidden},
                {"dropout", heads.dropout},
                {"loss_weights", loss_weights}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"batch_size", train.batch_size},
                {"epochs", train.epochs},
                {"seed", train.seed},
                {"shuffle", train.shuffle}};
  j["metrics"] = {{"binarize", to_string(binarize)}};
  j["protocol"] = {{"seeds", seeds}};
  j["output_dir"] = output_dir;
  return j;
}

namespace {

bool compatible(const ordered_json& def, const json& v) {
  if (def.is_number_integer() || def.is_number_unsigned()) return v.is_number_integer() || v.is_number_unsigned();
  if (def.is_number_float()) return v.is_number();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

void merge_checked(ordered_json& into, const json& from, const std::string& path) {
  if (!from.is_object()) throw Error(ErrorCode::configuration, "config section '" + path + "' must be an object");
  for (const auto& [key, value] : from.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!into.contains(key)) throw Error(ErrorCode::configuration, "unknown config key '" + full + "'");
    ordered_json& slot = into[key];
    if (!compatible(slot, value)) throw Error(ErrorCode::configuration, "config key '" + full + "' has the wrong type");
    if (slot.is_object()) {
      merge_checked(slot, value, full);
    } else {
      slot = value;
    }
  }
}

RunConfig parse_resolved(const ordered_json& j) {
  RunConfig c;
  try {
    const auto& d = j.at("data");
    c.data.train = d.at("train").get<std::string>();
    c.data.validation = d.at("validation").get<std::string>();
    c.data.test = d.at("test").get<std::string>();
    c.data.d_text = d.at("d_text").get<int>();
    c.data.d_audio = d.at("d_audio").get<int>();
    c.data.text_length = d.at("text_length").get<int>();
    c.data.audio_length = d.at("audio_length").get<int>();
    const auto& cv = j.at("conv");
    c.conv.kernel_text = cv.at("kernel_text").get<int>();
    c.conv.stride_text = cv.at("stride_text").get<int>();
    c.conv.kernel_audio = cv.at("kernel_audio").get<int>();
    c.conv.stride_audio = cv.at("stride_audio").get<int>();
    c.conv.out_channels = cv.at("out_channels").get<int>();
    c.gru_depth = j.at("gru").at("depth").get<int>();
    const auto& x = j.at("xadjust");
    c.xadjust.blocks_per_stage = x.at("blocks_per_stage").get<int>();
    c.xadjust.heads = x.at("heads").get<int>();
    c.xadjust.ff_width = x.at("ff_width").get<int>();
    c.xadjust.dropout = x.at("dropout").get<double>();
    c.xadjust.scale_mode = scale_mode_from_string(x.at("scale_mode").get<std::string>());
    const auto& h = j.at("heads");
    c.heads.self_blocks = h.at("self_blocks").get<int>();
    c.heads.hidden = h.at("hidden").get<int>();
    c.heads.dropout = h.at("dropout").get<double>();
    const auto w = h.at("loss_weights").get<std::vector<double>>();
    if (w.size() != 3) throw Error(ErrorCode::configuration, "heads.loss_weights must have exactly 3 entries");
    c.loss_weights = {w[0], w[1], w[2]};
    const auto& t = j.at("train");
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.train.batch_size = t.at("batch_size").get<int>();
    c.train.epochs = t.at("epochs").get<int>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.train.shuffle = t.at("shuffle").get<bool>();
    c.binarize = binarize_from_string(j.at("metrics").at("binarize").get<std::string>());
    c.seeds = j.at("protocol").at("seeds").get<std::vector<std::uint64_t>>();
    c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::configuration, std::string("malformed config value: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::configuration, what);
  };
  require(data.d_text >= 1 && data.d_audio >= 1, "data.d_text and data.d_audio must be >= 1");
  require(data.text_length >= 1 && data.audio_length >= 1, "data.text_length and data.audio_length must be >= 1");
  conv.aligned_length(data.text_length, data.audio_length);
  require(gru_depth >= 1, "gru.depth must be >= 1");
  require(xadjust.blocks_per_stage >= 1, "xadjust.blocks_per_stage must be >= 1");
  BlockConfig{conv.out_channels, xadjust.heads, xadjust.ff_width, xadjust.dropout, xadjust.scale_mode}.validate();
  require(heads.self_blocks >= 1, "heads.self_blocks must be >= 1");
  require(heads.hidden >= 1, "heads.hidden must be >= 1");
  require(heads.dropout >= 0.0 && heads.dropout < 1.0, "heads.dropout must lie in [0, 1)");
  for (double w : loss_weights) require(w >= 0.0, "heads.loss_weights must be non-negative");
  require(train.learning_rate >= 0.0, "train.learning_rate must be >= 0");
  require(train.batch_size >= 1, "train.batch_size must be >= 1");
  require(train.epochs >= 1, "train.epochs must be >= 1");
  require(!seeds.empty(), "protocol.seeds must list at least one seed");
}

RunConfig config_from_json(const json& j, const RunConfig& base) {
  ordered_json resolved = base.to_json();
  merge_checked(resolved, j, "");
  return parse_resolved(resolved);
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::configuration, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, base);
}

RunConfig apply_overrides(const RunConfig& config, const std::vector<std::string>& assignments) {
  json patch = json::object();
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::configuration, "override '" + a + "' must look like key.path=value");
    }
    const std::string key = a.substr(0, eq);
    const std::string raw = a.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &patch;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (dot == std::string::npos) {
        (*node)[part] = value;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return config_from_json(patch, config);
}

RunConfig apply_seed_env(const RunConfig& config) {
  const char* env = std::getenv("SAFRLM_SEED");
  if (env == nullptr || *env == '\0') return config;
  RunConfig c = config;
  try {
    std::size_t used = 0;
    c.train.seed = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw Error(ErrorCode::configuration, std::string("SAFRLM_SEED is not an unsigned integer: ") + env);
  }
  return c;
}

}  // namespace safrlm
