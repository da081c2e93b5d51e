#include "fixtures.hpp"

namespace fixtures {

safrlm::SyntheticSpec toy_spec(int n_records, std::uint64_t seed, double noise_sigma) {
  safrlm::SyntheticSpec s;
  s.n_records = n_records;
  s.seed = seed;
  s.noise_sigma = noise_sigma;
  s.d_text = 8;
  s.d_audio = 4;
  return s;
}

safrlm::RunConfig toy_config() {
  safrlm::RunConfig c;
  c.data.d_text = 8;
  c.data.d_audio = 4;
  c.data.text_length = 20;
  c.data.audio_length = 40;
  c.conv = safrlm::ConvSpec{1, 1, 2, 2, 8};
  c.xadjust = safrlm::XAdjustConfig{1, 2, 32, 0.0, safrlm::ScaleMode::per_head};
  c.heads = safrlm::HeadsConfig{1, 32, 0.0};
  c.train.batch_size = 8;
  c.train.epochs = 2;
  return c;
}

safrlm::RunConfig toy_run(const std::filesystem::path& dir, int n_train, int n_val, int n_test, double noise_sigma,
                          std::uint64_t data_seed) {
  std::filesystem::create_directories(dir);
  safrlm::RunConfig c = toy_config();
  const auto write = [&](const char* name, int n, std::uint64_t seed, safrlm::SplitRole role) {
    auto spec = toy_spec(n, seed, noise_sigma);
    spec.role = role;
    const auto path = dir / name;
    safrlm::save_jsonl(safrlm::generate_synthetic(spec), path);
    return path.string();
  };
  c.data.train = write("train.jsonl", n_train, data_seed, safrlm::SplitRole::train);
  c.data.validation = write("validation.jsonl", n_val, data_seed + 1, safrlm::SplitRole::validation);
  c.data.test = write("test.jsonl", n_test, data_seed + 2, safrlm::SplitRole::test);
  c.output_dir = (dir / "out").string();
  return c;
}

}  // namespace fixtures
