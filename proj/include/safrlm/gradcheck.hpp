#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "safrlm/config.hpp"

namespace safrlm {

/// d = 4, l = 4, one block per stage, one self-attention block.
RunConfig tiny_gradcheck_config();

struct GroupCheck {
  std::string group;
  std::size_t parameters = 0;
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GroupCheck> groups;
  double tolerance = 0.0;
  double step = 0.0;
  double min_label_gap = 0.0;  // smallest |prediction - label| (kink distance)
  bool passed = false;

  nlohmann::ordered_json to_json() const;
};

inline constexpr double kGradcheckStep = 1e-5;
/// Denominator floor: errors are |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradcheckFloor = 1e-6;

/// Compares tape gradients of the mean joint loss over two synthetic samples
/// against central differences, in double precision, for every parameter.
GradcheckReport gradcheck(const RunConfig& config, double tolerance, std::uint64_t seed = 0);

}  // namespace safrlm
