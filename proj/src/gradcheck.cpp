#include "safrlm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "safrlm/data.hpp"
#include "safrlm/error.hpp"
#include "safrlm/model.hpp"

namespace safrlm {

using nlohmann::ordered_json;

RunConfig tiny_gradcheck_config() {
  RunConfig c;
  c.data.d_text = 5;
  c.data.d_audio = 3;
  c.data.text_length = 4;
  c.data.audio_length = 8;
  c.conv = ConvSpec{1, 1, 2, 2, 4};
  c.gru_depth = 1;
  c.xadjust = XAdjustConfig{1, 2, 6, 0.3, ScaleMode::per_head};
  c.heads = HeadsConfig{1, 5, 0.3};
  return c;
}

ordered_json GradcheckReport::to_json() const {
  ordered_json j;
  j["passed"] = passed;
  j["tolerance"] = tolerance;
  j["step"] = step;
  j["min_label_gap"] = min_label_gap;
  ordered_json gs = ordered_json::array();
  for (const auto& g : groups) {
    gs.push_back({{"group", g.group},
                  {"parameters", g.parameters},
                  {"max_relative_error", g.max_relative_error},
                  {"max_abs_error", g.max_abs_error},
                  {"passed", g.passed}});
  }
  j["groups"] = std::move(gs);
  return j;
}

namespace {

struct Sample {
  MatD text;
  MatD audio;
  double label = 0.0;
};

double loss_value(const Model<double>& model, const std::vector<Sample>& samples) {
  Graph<double> g(model.params());
  double total = 0.0;
  for (const auto& s : samples) {
    const auto p = model.forward(g, g.input(s.text), g.input(s.audio));
    total += g.value(joint_loss(g, p, s.label, model.config().loss_weights))(0, 0);
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace

GradcheckReport gradcheck(const RunConfig& config, double tolerance, std::uint64_t seed) {
  config.validate();
  const ModelConfig mc = ModelConfig::from_run_config(config);
  Model<double> model = Model<float>::create(mc, seed).cast<double>();

  SyntheticSpec spec;
  spec.n_records = 2;
  spec.text_length = {mc.text_length, mc.text_length};
  spec.audio_length = {mc.audio_length, mc.audio_length};
  spec.d_text = mc.d_text;
  spec.d_audio = mc.d_audio;
  spec.seed = seed + 17;
  const auto data = generate_synthetic(spec);

  // Labels at the range ends keep every |prediction - label| away from the L1 kink.
  std::vector<Sample> samples;
  const double labels[] = {2.5, -2.5};
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    Sample s{data.records[i].text, data.records[i].audio, labels[i]};
    const auto p = model.predict(s.text, s.audio);
    for (double y : {p.ta_prime, p.t_prime_a, p.global}) gap = std::min(gap, std::abs(y - s.label));
    samples.push_back(std::move(s));
  }

  Graph<double> g(model.params(), true);
  auto& t = g.tape();
  ag::Var total;
  for (const auto& s : samples) {
    const auto p = model.forward(g, g.input(s.text), g.input(s.audio));
    const ag::Var l = joint_loss(g, p, s.label, mc.loss_weights);
    total = total.valid() ? ag::add(t, total, l) : l;
  }
  const ag::Var loss = ag::affine(t, total, 1.0 / static_cast<double>(samples.size()), 0.0);
  t.backward(loss);

  std::map<std::string, GroupCheck> by_group;
  auto& entries = model.params().entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    const MatD analytic = g.param_grad(ParamId{p});
    auto& check = by_group[entries[p].group];
    check.group = entries[p].group;
    MatD& value = entries[p].value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double orig = value.data()[i];
      value.data()[i] = orig + kGradcheckStep;
      const double up = loss_value(model, samples);
      value.data()[i] = orig - kGradcheckStep;
      const double down = loss_value(model, samples);
      value.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * kGradcheckStep);
      const double a = analytic.data()[i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), kGradcheckFloor});
      check.max_abs_error = std::max(check.max_abs_error, abs_err);
      check.max_relative_error = std::max(check.max_relative_error, rel);
      ++check.parameters;
    }
  }

  GradcheckReport report;
  report.tolerance = tolerance;
  report.step = kGradcheckStep;
  report.min_label_gap = gap;
  report.passed = true;
  for (const auto& name : model.params().groups()) {
    GroupCheck c = by_group.at(name);
    c.passed = c.max_relative_error < tolerance;
    report.passed = report.passed && c.passed;
    report.groups.push_back(std::move(c));
  }
  return report;
}

}  // namespace safrlm
