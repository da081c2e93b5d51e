#pragma once

#include <filesystem>

#include "safrlm/config.hpp"
#include "safrlm/data.hpp"

namespace fixtures {

/// Small synthetic spec: d_text 8, d_audio 4, text 10..20 steps, audio 20..40.
safrlm::SyntheticSpec toy_spec(int n_records, std::uint64_t seed, double noise_sigma);

/// Width 8, one block per stage, one self-attention block; inputs padded to
/// 20 text / 40 audio steps and aligned with an audio kernel and stride of 2.
safrlm::RunConfig toy_config();

/// Writes train/validation/test JSON-lines files into `dir` and points the
/// config at them.
safrlm::RunConfig toy_run(const std::filesystem::path& dir, int n_train, int n_val, int n_test, double noise_sigma,
                          std::uint64_t data_seed = 100);

}  // namespace fixtures
