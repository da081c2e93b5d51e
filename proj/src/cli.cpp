#include "safrlm/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "safrlm/config.hpp"
#include "safrlm/data.hpp"
#include "safrlm/error.hpp"
#include "safrlm/gradcheck.hpp"
#include "safrlm/model.hpp"
#include "safrlm/train.hpp"

namespace safrlm {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io, "failed while writing " + path.string());
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::validation, "--n expects a comma-separated list of integers, got '" + s + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::validation, "--n must list at least one block count");
  return out;
}

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string output_dir;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
  auto* opt = cmd->add_option("--config", o.config, "JSON run configuration");
  if (config_required) opt->required();
  cmd->add_option("--set", o.overrides, "Override a config key, e.g. --set train.epochs=5");
  cmd->add_option("--output-dir", o.output_dir, "Override output_dir");
}

RunConfig resolve(const CommonOptions& o, const RunConfig& base = RunConfig{}) {
  RunConfig c = o.config.empty() ? base : load_config(o.config, base);
  c = apply_overrides(c, o.overrides);
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  return apply_seed_env(c);
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text-audio sentiment regression with crossmodal fusion", "safrlm"};
  app.require_subcommand(1);

  std::string spec_path, out_path;
  auto* gen = app.add_subcommand("generate", "Write a synthetic JSON-lines dataset");
  gen->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  gen->add_option("--out", out_path, "Output .jsonl path")->required();

  CommonOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train and write checkpoint + history");
  add_common(train_cmd, train_opts, true);

  CommonOptions eval_opts;
  std::string checkpoint_path, data_path, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  add_common(eval_cmd, eval_opts, true);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint JSON")->required();
  eval_cmd->add_option("--data", data_path, "Dataset .jsonl")->required();
  eval_cmd->add_option("--out", eval_out, "Metrics output path (default <output_dir>/metrics.json)");

  CommonOptions sweep_opts;
  std::string n_list;
  auto* sweep_cmd = app.add_subcommand("sweep-blocks", "Sweep the total crossmodal block count");
  add_common(sweep_cmd, sweep_opts, true);
  sweep_cmd->add_option("--n", n_list, "Comma-separated even block counts, e.g. 2,4,6")->required();

  CommonOptions grad_opts;
  double tolerance = 1e-4;
  std::uint64_t grad_seed = 0;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check on a tiny model");
  add_common(grad_cmd, grad_opts, false);
  grad_cmd->add_option("--tolerance", tolerance, "Maximum relative error per parameter group");
  grad_cmd->add_option("--seed", grad_seed, "Parameter/data seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (gen->parsed()) {
      const auto spec = load_synthetic_spec(spec_path);
      const auto split = generate_synthetic(spec);
      save_jsonl(split, out_path);
      out << "wrote " << split.size() << " records to " << out_path << "\n";
    } else if (train_cmd->parsed()) {
      const RunConfig config = resolve(train_opts);
      const Splits splits = load_splits(config);
      const fs::path dir = config.output_dir;
      write_json(dir / "config.json", config.to_json());
      const auto result = train(splits.train, splits.validation, config);
      result.best.save(dir / "checkpoint.json");
      result.last.save(dir / "checkpoint_last.json");
      write_json(dir / "history.json", result.history.to_json());
      out << "best epoch " << result.history.best_epoch + 1 << " validation MAE "
          << result.history.best_validation_mae << "\n";
      out << "wrote " << (dir / "checkpoint.json").string() << " and " << (dir / "history.json").string() << "\n";
    } else if (eval_cmd->parsed()) {
      const RunConfig config = resolve(eval_opts);
      const auto model = Model<float>::load(checkpoint_path);
      const auto split = load_jsonl(data_path, SplitRole::test);
      const auto report = evaluate(model, split, config.binarize);
      const fs::path dest = eval_out.empty() ? fs::path(config.output_dir) / "metrics.json" : fs::path(eval_out);
      write_json(dest.parent_path().empty() ? fs::path("config.json") : dest.parent_path() / "config.json",
                 config.to_json());
      write_json(dest, report.to_json());
      out << report.to_json().dump(2) << "\n";
    } else if (sweep_cmd->parsed()) {
      const RunConfig config = resolve(sweep_opts);
      const auto ns = parse_int_list(n_list);
      for (int n : ns) blocks_per_stage_for(n);
      const Splits splits = load_splits(config);
      const fs::path dir = config.output_dir;
      write_json(dir / "config.json", config.to_json());
      const auto rows = sweep_blocks(config, splits, ns);
      const auto csv = sweep_csv(rows);
      write_text(dir / "sweep_blocks.csv", csv);
      ordered_json j = ordered_json::array();
      for (const auto& r : rows) {
        j.push_back({{"n", r.n}, {"blocks_per_stage", r.blocks_per_stage}, {"report", r.report.to_json()}});
      }
      write_json(dir / "sweep_blocks.json", j);
      out << csv;
    } else if (grad_cmd->parsed()) {
      const RunConfig config = resolve(grad_opts, tiny_gradcheck_config());
      const auto report = gradcheck(config, tolerance, grad_seed);
      write_json(fs::path(config.output_dir) / "config.json", config.to_json());
      for (const auto& g : report.groups) {
        out << (g.passed ? "PASS " : "FAIL ") << g.group << " params=" << g.parameters
            << " max_rel_err=" << g.max_relative_error << "\n";
      }
      out << (report.passed ? "gradcheck passed" : "gradcheck FAILED") << " (tolerance " << tolerance << ")\n";
      return report.passed ? kExitOk : kExitRuntime;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_runtime() ? kExitRuntime : kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace safrlm
