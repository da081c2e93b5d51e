#include "safrlm/train.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "safrlm/error.hpp"
#include "safrlm/rng.hpp"

namespace safrlm {

using nlohmann::ordered_json;

Adam::Adam(const ParamStore<float>& store, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& e : store.entries()) {
    m_.push_back(MatF::Zero(e.value.rows(), e.value.cols()));
    v_.push_back(MatF::Zero(e.value.rows(), e.value.cols()));
  }
}

void Adam::step(ParamStore<float>& store, const std::vector<MatF>& grads) {
  ++t_;
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  const auto step = static_cast<float>(lr_ / (1.0 - std::pow(beta1_, static_cast<double>(t_))));
  const auto v_corr = static_cast<float>(1.0 / (1.0 - std::pow(beta2_, static_cast<double>(t_))));
  const auto eps = static_cast<float>(eps_);
  auto& entries = store.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0f - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0f - b2) * grads[i].cwiseProduct(grads[i]);
    entries[i].value.array() -= step * m_[i].array() / ((v_[i].array() * v_corr).sqrt() + eps);
  }
}

ordered_json RunHistory::to_json() const {
  ordered_json j;
  j["train_loss"] = train_loss;
  j["best_train_loss"] = best_train_loss;
  ordered_json val = ordered_json::array();
  for (const auto& r : validation) val.push_back(r.to_json());
  j["validation"] = std::move(val);
  j["best_epoch"] = best_epoch;
  j["best_validation_mae"] = best_validation_mae;
  return j;
}

namespace {

constexpr std::uint64_t kDropoutStream = 0x64726f70;  // "drop"
constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"

PadTo padding_for(const ModelConfig& mc) {
  return PadTo{static_cast<Eigen::Index>(mc.text_length), static_cast<Eigen::Index>(mc.audio_length)};
}

void check_compatible(const DatasetSplit& split, const ModelConfig& mc, const char* name) {
  validate_split(split);
  if (split.text_dim() != mc.d_text || split.audio_dim() != mc.d_audio) {
    throw Error(ErrorCode::dimension, std::string(name) + " split has feature dims (" +
                                          std::to_string(split.text_dim()) + ", " + std::to_string(split.audio_dim()) +
                                          "), config expects (" + std::to_string(mc.d_text) + ", " +
                                          std::to_string(mc.d_audio) + ")");
  }
  if (split.max_text_length() > mc.text_length || split.max_audio_length() > mc.audio_length) {
    throw Error(ErrorCode::dimension, std::string(name) + " split has sequences longer than data.text_length / " +
                                          "data.audio_length");
  }
}

}  // namespace

TrainResult train(const DatasetSplit& train_split, const DatasetSplit& validation_split, const RunConfig& config) {
  config.validate();
  const ModelConfig mc = ModelConfig::from_run_config(config);
  check_compatible(train_split, mc, "train");
  check_compatible(validation_split, mc, "validation");

  const auto seed = config.train.seed;
  Model<float> model = Model<float>::create(mc, seed);
  Model<float> best = model;
  Adam adam(model.params(), config.train.learning_rate);
  Rng dropout_rng(seed, kDropoutStream);
  RunHistory history;
  double best_mae = std::numeric_limits<double>::infinity();
  double best_loss = std::numeric_limits<double>::infinity();
  const auto batch_size = static_cast<std::size_t>(config.train.batch_size);

  for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
    std::optional<std::uint64_t> shuffle_seed;
    if (config.train.shuffle) shuffle_seed = Rng(seed ^ kShuffleStream, static_cast<std::uint64_t>(epoch)).engine()();
    const auto batches = make_batches(train_split, batch_size, shuffle_seed, padding_for(mc));
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      Graph<float> g(model.params(), true);
      g.set_training(&dropout_rng);
      auto& t = g.tape();
      ag::Var total;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto preds = model.forward(g, g.input(batch.text[i].cast<float>()), g.input(batch.audio[i].cast<float>()));
        const ag::Var l = joint_loss(g, preds, batch.labels[i], mc.loss_weights);
        total = total.valid() ? ag::add(t, total, l) : l;
      }
      const ag::Var loss = ag::affine(t, total, 1.0f / static_cast<float>(batch.size()), 0.0f);
      const double value = g.value(loss)(0, 0);
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::divergence, "non-finite training loss at epoch " + std::to_string(epoch + 1));
      }
      t.backward(loss);
      std::vector<MatF> grads;
      grads.reserve(model.params().size());
      for (std::size_t p = 0; p < model.params().size(); ++p) grads.push_back(g.param_grad(ParamId{p}));
      adam.step(model.params(), grads);
      epoch_loss += value * static_cast<double>(batch.size());
    }
    const double mean_loss = epoch_loss / static_cast<double>(train_split.size());
    history.train_loss.push_back(mean_loss);
    best_loss = std::min(best_loss, mean_loss);
    history.best_train_loss.push_back(best_loss);

    auto val = evaluate(model, validation_split, config.binarize);
    if (val.mae < best_mae) {
      best_mae = val.mae;
      best = model;
      history.best_epoch = epoch;
    }
    history.validation.push_back(std::move(val));
  }
  history.best_validation_mae = best_mae;
  return TrainResult{std::move(best), std::move(model), std::move(history)};
}

std::vector<PredictionTriple<double>> predict_split_triples(const Model<float>& model, const DatasetSplit& split) {
  std::vector<PredictionTriple<double>> out;
  out.reserve(split.size());
  for (const auto& r : split.records) out.push_back(model.predict(r));
  return out;
}

std::vector<double> predict_split(const Model<float>& model, const DatasetSplit& split) {
  std::vector<double> out;
  out.reserve(split.size());
  for (const auto& p : predict_split_triples(model, split)) out.push_back(p.global);
  return out;
}

MetricsReport evaluate(const Model<float>& model, const DatasetSplit& split, Binarize binarize) {
  const auto preds = predict_split(model, split);
  std::vector<double> labels;
  labels.reserve(split.size());
  for (const auto& r : split.records) labels.push_back(r.label);
  return compute_metrics(preds, labels, binarize);
}

Splits load_splits(const RunConfig& config) {
  if (config.data.train.empty() || config.data.validation.empty()) {
    throw Error(ErrorCode::configuration, "data.train and data.validation must name JSON-lines files");
  }
  Splits s;
  s.train = load_jsonl(config.data.train, SplitRole::train);
  s.validation = load_jsonl(config.data.validation, SplitRole::validation);
  if (config.data.test.empty()) {
    s.test = s.validation;
    s.test.role = SplitRole::test;
  } else {
    s.test = load_jsonl(config.data.test, SplitRole::test);
  }
  return s;
}

ordered_json MultiSeedReport::to_json() const {
  ordered_json j;
  j["seeds"] = seeds;
  ordered_json runs_j = ordered_json::array();
  for (const auto& r : runs) runs_j.push_back(r.to_json());
  j["runs"] = std::move(runs_j);
  j["mean"] = mean.to_json();
  return j;
}

MultiSeedReport multi_seed(const RunConfig& config, const Splits& splits, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw Error(ErrorCode::validation, "multi_seed needs at least one seed");
  MultiSeedReport report;
  for (const auto seed : seeds) {
    RunConfig c = config;
    c.train.seed = seed;
    try {
      const auto result = train(splits.train, splits.validation, c);
      report.runs.push_back(evaluate(result.best, splits.test, c.binarize));
    } catch (const Error& e) {
      throw Error(e.code(), "seed " + std::to_string(seed) + ": " + e.what());
    }
    report.seeds.push_back(seed);
  }
  report.mean = mean_report(report.runs);
  return report;
}

MultiSeedReport multi_seed(const RunConfig& config, const Splits& splits) {
  return multi_seed(config, splits, config.seeds);
}

int blocks_per_stage_for(int n) {
  if (n < 2 || n % 2 != 0) {
    throw Error(ErrorCode::validation,
                "block count n must be an even number >= 2 (n/2 blocks per stage), got " + std::to_string(n));
  }
  return n / 2;
}

std::vector<SweepRow> sweep_blocks(const RunConfig& config, const Splits& splits, std::span<const int> n_values) {
  if (n_values.empty()) throw Error(ErrorCode::validation, "sweep needs at least one block count");
  std::vector<int> per_stage;
  for (int n : n_values) per_stage.push_back(blocks_per_stage_for(n));
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    RunConfig c = config;
    c.xadjust.blocks_per_stage = per_stage[i];
    rows.push_back(SweepRow{n_values[i], per_stage[i], multi_seed(c, splits)});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "n,acc7,acc2,f1,mae,corr\n";
  for (const auto& r : rows) {
    const auto& m = r.report.mean;
    out << r.n << ',' << m.acc7 << ',' << m.acc2 << ',' << m.f1 << ',' << m.mae << ',';
    if (m.corr) out << *m.corr;
    out << '\n';
  }
  return out.str();
}

}  // namespace safrlm
