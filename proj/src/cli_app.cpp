#include "evoclass/cli_app.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "evoclass/commands.hpp"
#include "evoclass/errors.hpp"

namespace evoclass {

namespace {

void add_run_options(CLI::App& app, RunConfig& cfg) {
  auto opt = [&app](const std::string& name, auto& target) {
    return app.add_option(name, target)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  };
  opt("--arch.input_size", cfg.arch.input_size);
  opt("--arch.conv_layers", cfg.arch.conv_layers);
  opt("--arch.channels", cfg.arch.channels);
  opt("--arch.kernel", cfg.arch.kernel);
  opt("--arch.stride", cfg.arch.stride);
  opt("--arch.pad", cfg.arch.pad);
  opt("--arch.fc_sizes", cfg.arch.fc_sizes)->delimiter(',');
  opt("--arch.num_classes", cfg.arch.num_classes);

  opt("--dne.population", cfg.dne.population);
  opt("--dne.sigma", cfg.dne.sigma);
  opt("--dne.eta", cfg.dne.eta);
  opt("--dne.generations", cfg.dne.generations);
  opt("--dne.eval_test_every", cfg.dne.eval_test_every);

  opt("--sgd.learning_rate", cfg.sgd.learning_rate);
  opt("--sgd.batch_size", cfg.sgd.batch_size);
  opt("--sgd.epochs", cfg.sgd.epochs);
  opt("--sgd.plateau_factor", cfg.sgd.plateau.factor);
  opt("--sgd.plateau_patience", cfg.sgd.plateau.patience);
  opt("--sgd.plateau_min_lr", cfg.sgd.plateau.min_lr);

  opt("--data.source", cfg.data.source);
  opt("--data.manifest", cfg.data.manifest);
  opt("--data.n_train_normal", cfg.data.corpus.n_train_normal);
  opt("--data.n_train_met", cfg.data.corpus.n_train_met);
  opt("--data.n_test_normal", cfg.data.corpus.n_test_normal);
  opt("--data.n_test_met", cfg.data.corpus.n_test_met);
  opt("--data.n_institutions", cfg.data.corpus.n_institutions);
  opt("--data.outside_fraction_train", cfg.data.corpus.outside_fraction_train);
  opt("--data.outside_fraction_test", cfg.data.corpus.outside_fraction_test);
  opt("--data.image_size", cfg.data.corpus.image_size);

  opt("--run.output_dir,--out", cfg.output_dir);
  opt("--run.seed,--seed", cfg.seed);
  opt("--run.workers,--workers", cfg.workers);
}

// Sectioned key=value config, expanded to --section.key tokens that are
// parsed ahead of the explicit flags, so flags always win.
std::vector<std::string> expand_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArgumentError("cannot open config file " + path);
  std::vector<std::string> tokens;
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ArgumentError(path + ":" + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ArgumentError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ArgumentError(path + ":" + std::to_string(lineno) + ": empty key");
    tokens.push_back("--" + (section.empty() ? key : section + "." + key));
    tokens.push_back(value);
  }
  return tokens;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"deep-neuroevolution image classifier toolkit"};
  app.fallthrough(true);
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "sectioned key=value config file")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  RunConfig cfg;
  add_run_options(app, cfg);
  app.add_flag("--force", cfg.force, "overwrite a nonempty output dir");

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");

  std::string method;
  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--method", method, "dne | sgd | adam")->required();

  std::string model_path, manifest_path, out_path, split = "test";
  CLI::App* eval = app.add_subcommand("eval", "evaluate a saved model on a manifest");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--manifest", manifest_path)->required();
  eval->add_option("--eval-out", out_path)->required();
  eval->add_option("--split", split, "train | test | all");

  std::string preds_a, preds_b, cmp_out, cmp_manifest;
  CLI::App* compare = app.add_subcommand("compare", "paired McNemar comparison");
  compare->add_option("--a", preds_a)->required();
  compare->add_option("--b", preds_b)->required();
  compare->add_option("--compare-out", cmp_out)->required();
  compare->add_option("--manifest", cmp_manifest,
                      "manifest supplying institutions for the outside-only test");

  std::vector<std::string> ids;
  std::string sal_model, sal_manifest, sal_out, fill = "mean";
  int patch = 16, stride = 8;
  CLI::App* saliency = app.add_subcommand("saliency", "occlusion saliency heatmaps");
  saliency->add_option("--model", sal_model)->required();
  saliency->add_option("--manifest", sal_manifest)->required();
  saliency->add_option("--id", ids, "sample id (repeatable)")->required();
  saliency->add_option("--saliency-out", sal_out)->required();
  saliency->add_option("--patch", patch);
  saliency->add_option("--stride", stride);
  saliency->add_option("--fill", fill, "mean | zero");

  std::vector<std::string> curves;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "merge history CSVs into a summary");
  report->add_option("--curve", curves, "label=path (repeatable)")->required();
  report->add_option("--report-out", report_out)->required();

  // expand --config before the real parse; config tokens go first so
  // explicit flags override them under the take-last policy
  std::vector<std::string> args;
  try {
    std::vector<std::string> raw(argv + 1, argv + argc);
    std::vector<std::string> from_config;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == "--config" && i + 1 < raw.size()) {
        auto tokens = expand_config_file(raw[i + 1]);
        from_config.insert(from_config.end(), tokens.begin(), tokens.end());
      } else if (raw[i].rfind("--config=", 0) == 0) {
        auto tokens = expand_config_file(raw[i].substr(9));
        from_config.insert(from_config.end(), tokens.begin(), tokens.end());
      }
    }
    args = std::move(from_config);
    args.insert(args.end(), raw.begin(), raw.end());
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::vector<const char*> cargv{argv[0]};
  for (const std::string& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (train->parsed()) return cmd_train(cfg, method);
    if (eval->parsed())
      return cmd_eval(model_path, manifest_path, out_path, split, cfg.workers);
    if (compare->parsed()) return cmd_compare(preds_a, preds_b, cmp_out, cmp_manifest);
    if (saliency->parsed())
      return cmd_saliency(sal_model, sal_manifest, ids, sal_out, patch, stride, fill,
                          cfg.workers);
    if (report->parsed()) return cmd_report(curves, report_out);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace evoclass
