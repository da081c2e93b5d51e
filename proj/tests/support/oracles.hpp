#pragma once

// Naive loop implementations used as references in tests. They read parameter
// values from a store but never touch the tape or Eigen expression code.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "safrlm/align.hpp"
#include "safrlm/fusion.hpp"
#include "safrlm/metrics.hpp"
#include "safrlm/rng.hpp"
#include "safrlm/xadjust.hpp"

namespace oracle {

using safrlm::MatD;
using safrlm::ParamStore;

MatD random_matrix(safrlm::Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0);
double max_abs_diff(const MatD& a, const MatD& b);

struct Collab {
  MatD s_ta, s_at, x_tp, x_ap;
};
Collab collab_attention(const MatD& x_t, const MatD& x_a);

MatD bigru(const MatD& x, const safrlm::BiGru& gru, const ParamStore<double>& p);

MatD layer_norm(const MatD& x, const MatD& gain, const MatD& offset, double eps);
MatD positional_encoding(int length, int width);
MatD crossmodal_block(const MatD& target, const MatD& source, const safrlm::CrossmodalBlock& block,
                      const ParamStore<double>& p);

struct Metrics {
  double acc7, acc2, f1, mae;
  std::optional<double> corr;
};
Metrics metrics(const std::vector<double>& preds, const std::vector<double>& labels, bool exclude_zero);

double synthetic_label(const MatD& text, const MatD& audio);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace oracle
