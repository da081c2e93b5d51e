#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "safrlm/config.hpp"
#include "safrlm/data.hpp"
#include "safrlm/metrics.hpp"
#include "safrlm/model.hpp"

namespace safrlm {

/// Adam with bias correction; moments are kept per parameter matrix.
class Adam {
 public:
  Adam(const ParamStore<float>& store, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(ParamStore<float>& store, const std::vector<MatF>& grads);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<MatF> m_, v_;
};

struct RunHistory {
  std::vector<double> train_loss;            // mean joint loss per epoch
  std::vector<MetricsReport> validation;     // eval-mode metrics per epoch
  std::vector<double> best_train_loss;       // best-so-far train loss per epoch
  int best_epoch = -1;                       // 0-based, selected by validation MAE
  double best_validation_mae = 0.0;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  Model<float> best;
  Model<float> last;
  RunHistory history;
};

/// Trains with Adam on the mean per-batch joint loss. Throws
/// ErrorCode::divergence naming the epoch when a batch loss is non-finite.
TrainResult train(const DatasetSplit& train_split, const DatasetSplit& validation_split, const RunConfig& config);

/// Eval-mode global predictions, one per record in split order.
std::vector<double> predict_split(const Model<float>& model, const DatasetSplit& split);
std::vector<PredictionTriple<double>> predict_split_triples(const Model<float>& model, const DatasetSplit& split);

MetricsReport evaluate(const Model<float>& model, const DatasetSplit& split, Binarize binarize = Binarize::geq_zero);

struct Splits {
  DatasetSplit train;
  DatasetSplit validation;
  DatasetSplit test;
};

/// Loads the splits named in config.data (test falls back to validation when empty).
Splits load_splits(const RunConfig& config);

struct MultiSeedReport {
  std::vector<std::uint64_t> seeds;
  std::vector<MetricsReport> runs;
  MetricsReport mean;

  nlohmann::ordered_json to_json() const;
};

/// One full train + test evaluation per seed, in input order; errors are
/// rethrown with the offending seed in the message.
MultiSeedReport multi_seed(const RunConfig& config, const Splits& splits, std::span<const std::uint64_t> seeds);
/// Uses config.seeds (five by default).
MultiSeedReport multi_seed(const RunConfig& config, const Splits& splits);

/// Total crossmodal block count n (both stages) to blocks per stage; n must be even and >= 2.
int blocks_per_stage_for(int n);

struct SweepRow {
  int n = 0;
  int blocks_per_stage = 0;
  MultiSeedReport report;
};

std::vector<SweepRow> sweep_blocks(const RunConfig& config, const Splits& splits, std::span<const int> n_values);

/// Header `n,acc7,acc2,f1,mae,corr`; undefined corr is written as an empty field.
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace safrlm
