#include "safrlm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "safrlm/error.hpp"

namespace safrlm {

std::string to_string(Binarize b) { return b == Binarize::geq_zero ? "geq_zero" : "exclude_zero"; }

Binarize binarize_from_string(const std::string& s) {
  if (s == "geq_zero") return Binarize::geq_zero;
  if (s == "exclude_zero") return Binarize::exclude_zero;
  throw Error(ErrorCode::configuration, "metrics.binarize must be geq_zero or exclude_zero, got '" + s + "'");
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["acc7"] = acc7;
  j["acc2"] = acc2;
  j["f1"] = f1;
  j["mae"] = mae;
  j["corr"] = corr ? nlohmann::ordered_json(*corr) : nlohmann::ordered_json(nullptr);
  j["corr_defined"] = corr.has_value();
  j["count"] = count;
  j["binarize"] = to_string(binarize);
  return j;
}

int sentiment_class(double value) {
  return static_cast<int>(std::clamp(std::round(value), -3.0, 3.0));
}

MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> labels, Binarize binarize) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw Error(ErrorCode::shape, "compute_metrics needs equal, non-zero lengths (got " +
                                      std::to_string(preds.size()) + " and " + std::to_string(labels.size()) + ")");
  }
  const std::size_t n = preds.size();
  MetricsReport r;
  r.count = n;
  r.binarize = binarize;

  std::size_t exact7 = 0;
  double abs_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    exact7 += sentiment_class(preds[i]) == sentiment_class(labels[i]);
    abs_err += std::abs(preds[i] - labels[i]);
  }
  r.acc7 = 100.0 * static_cast<double>(exact7) / static_cast<double>(n);
  r.mae = abs_err / static_cast<double>(n);

  std::size_t counted = 0, correct = 0, tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool p_pos = preds[i] >= 0.0;
    bool l_pos = labels[i] >= 0.0;
    if (binarize == Binarize::exclude_zero) {
      if (labels[i] == 0.0) continue;
      p_pos = preds[i] > 0.0;
      l_pos = labels[i] > 0.0;
    }
    ++counted;
    correct += p_pos == l_pos;
    tp += p_pos && l_pos;
    fp += p_pos && !l_pos;
    fn += !p_pos && l_pos;
  }
  r.acc2 = counted ? 100.0 * static_cast<double>(correct) / static_cast<double>(counted) : 0.0;
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
  r.f1 = denom > 0.0 ? 100.0 * 2.0 * static_cast<double>(tp) / denom : 0.0;

  double mp = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mp += preds[i];
    ml += labels[i];
  }
  mp /= static_cast<double>(n);
  ml /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = preds[i] - mp;
    const double dy = labels[i] - ml;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx > 0.0 && syy > 0.0) r.corr = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return r;
}

MetricsReport mean_report(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::validation, "cannot average an empty list of reports");
  MetricsReport m;
  m.binarize = reports.front().binarize;
  double corr_sum = 0.0;
  std::size_t corr_n = 0;
  for (const auto& r : reports) {
    m.acc7 += r.acc7;
    m.acc2 += r.acc2;
    m.f1 += r.f1;
    m.mae += r.mae;
    if (r.corr) {
      corr_sum += *r.corr;
      ++corr_n;
    }
  }
  const double k = static_cast<double>(reports.size());
  m.acc7 /= k;
  m.acc2 /= k;
  m.f1 /= k;
  m.mae /= k;
  m.count = reports.front().count;
  if (corr_n) m.corr = corr_sum / static_cast<double>(corr_n);
  return m;
}

}  // namespace safrlm
