#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

namespace safrlm {

/// Sign convention for Acc2 / F1.
enum class Binarize {
  geq_zero,      // value >= 0 is positive; every sample counts
  exclude_zero,  // samples whose label is exactly 0 are dropped; value > 0 is positive
};

std::string to_string(Binarize b);
Binarize binarize_from_string(const std::string& s);

struct MetricsReport {
  double acc7 = 0.0;  // percent
  double acc2 = 0.0;  // percent
  double f1 = 0.0;    // percent, positive class
  double mae = 0.0;
  std::optional<double> corr;  // empty when either vector has zero variance
  std::size_t count = 0;
  Binarize binarize = Binarize::geq_zero;

  nlohmann::ordered_json to_json() const;
};

/// Round half away from zero, then clip to [-3, 3].
int sentiment_class(double value);

/// Throws ErrorCode::shape on empty or unequal-length inputs.
MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> labels,
                              Binarize binarize = Binarize::geq_zero);

/// Arithmetic mean of each metric; corr averages the defined entries and is
/// empty only if none are defined.
MetricsReport mean_report(std::span<const MetricsReport> reports);

}  // namespace safrlm
