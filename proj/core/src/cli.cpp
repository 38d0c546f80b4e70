#include "defrag/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "defrag/checkpoint.hpp"
#include "defrag/config.hpp"
#include "defrag/errors.hpp"
#include "defrag/metrics.hpp"
#include "defrag/selfcheck.hpp"
#include "defrag/trainer.hpp"

namespace defrag {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "runs/out";
  // raw override strings per config key, applied over the file values
  std::map<std::string, std::string> overrides;
};

void register_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path,
                  "JSON config file (flat keys)");
  cmd->add_option("--out", args.out_dir, "output directory")
      ->capture_default_str();
  for (const std::string& key : config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [&args, key](const std::string& value) {
          args.overrides[key] = value;
        },
        "override config key " + key);
  }
}

RunConfig build_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = config_from_json_file(args.config_path);
  }
  for (const auto& [key, value] : args.overrides) {
    apply_override(cfg, key, value);
  }
  validate_config(cfg);
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

std::string echo_effective_config(const RunConfig& cfg,
                                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string text = config_to_json_string(cfg);
  write_text(out_dir + "/config.json", text);
  return text;
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = build_config(args);
  echo_effective_config(cfg, args.out_dir);
  TrainResult result = train(cfg, &std::cout);
  write_history_csv(result.history, args.out_dir + "/history.csv");
  const std::string ckpt_path =
      cfg.checkpoint.empty() ? args.out_dir + "/model.ckpt" : cfg.checkpoint;
  save_checkpoint(result.model, result.history, ckpt_path);
  if (!result.history.empty()) {
    std::printf("final test accuracy %.4f\n",
                result.history.back().test_accuracy);
  }
  std::printf("wrote %s and %s/history.csv\n", ckpt_path.c_str(),
              args.out_dir.c_str());
  return 0;
}

std::string metrics_report(const ModelState& model, const LoadedData& data,
                           double delta) {
  FeatureDump train_dump = extract_features(model, data.train);
  FeatureDump test_dump = extract_features(model, data.test);
  SilhouetteResult sil = silhouette_score(test_dump);
  if (sil.flagged > 0) {
    std::cerr << "warning: " << sil.flagged
              << " test samples hit silhouette degeneracy rules (scored 0)"
              << std::endl;
  }
  nlohmann::json report;
  report["accuracy"] = accuracy(model, data.test);
  report["silhouette_classical"] = sil.score;
  report["silhouette_loss_metric"] = silhouette_loss_metric(test_dump, delta);
  report["distance_ratio"] = distance_ratio(test_dump);
  report["knn_accuracy@1"] = knn_accuracy(train_dump, test_dump, 1);
  report["knn_accuracy@5"] = knn_accuracy(train_dump, test_dump, 5);
  return report.dump(2) + "\n";
}

int cmd_eval(const CommonArgs& args) {
  RunConfig cfg = build_config(args);
  if (cfg.checkpoint.empty()) {
    throw ConfigError("eval needs a checkpoint (set --checkpoint or the "
                      "checkpoint config key)");
  }
  auto [model, history] = load_checkpoint(cfg.checkpoint);
  const LoadedData data = load_run_data(cfg);
  const std::string report = metrics_report(model, data, cfg.delta);
  fs::create_directories(args.out_dir);
  write_text(args.out_dir + "/metrics.json", report);
  std::cout << report;
  return 0;
}

int cmd_features(const CommonArgs& args) {
  RunConfig cfg = build_config(args);
  if (cfg.checkpoint.empty()) {
    throw ConfigError("features needs a checkpoint (set --checkpoint or the "
                      "checkpoint config key)");
  }
  auto [model, history] = load_checkpoint(cfg.checkpoint);
  const LoadedData data = load_run_data(cfg);
  fs::create_directories(args.out_dir);
  export_features(model, data.train, args.out_dir + "/features_train.csv");
  export_features(model, data.test, args.out_dir + "/features_test.csv");
  std::printf("wrote %s/features_train.csv and %s/features_test.csv\n",
              args.out_dir.c_str(), args.out_dir.c_str());
  return 0;
}

int cmd_selftest(std::uint64_t seed, int instances, bool inject_fault) {
  selfcheck::Options opts;
  opts.seed = seed;
  opts.instances = instances;
  opts.inject_fault = inject_fault;
  const auto results = selfcheck::run_all(opts);
  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  for (const auto& r : results) {
    std::printf("[%s] %-*s  %s\n", r.pass ? "PASS" : "FAIL",
                static_cast<int>(width), r.name.c_str(), r.detail.c_str());
  }
  const bool ok = selfcheck::all_passed(results);
  std::printf("%zu checks, %s\n", results.size(),
              ok ? "all passed" : "FAILURES present");
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"DEFRAG: discriminative embeddings with clustering losses "
               "and Grassmann retraction"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, features_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model and write run artifacts");
  register_common(train_cmd, train_args);
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint: accuracy, "
                                 "clustering metrics, k-NN");
  register_common(eval_cmd, eval_args);
  CLI::App* features_cmd = app.add_subcommand(
      "features", "export feature-space CSVs from a checkpoint");
  register_common(features_cmd, features_args);

  std::uint64_t selftest_seed = 42;
  int selftest_instances = 20;
  bool inject_fault = false;
  CLI::App* selftest_cmd = app.add_subcommand(
      "selftest", "run gradient, SVD/retraction, and loss-oracle suites");
  selftest_cmd->add_option("--seed", selftest_seed, "suite seed")
      ->capture_default_str();
  selftest_cmd
      ->add_option("--instances", selftest_instances,
                   "random instances per property")
      ->capture_default_str();
  selftest_cmd->add_flag("--inject-fault", inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help and friends
    }
    std::cerr << e.what() << std::endl;
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (features_cmd->parsed()) return cmd_features(features_args);
    if (selftest_cmd->parsed()) {
      return cmd_selftest(selftest_seed, selftest_instances, inject_fault);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << std::endl;
    return 1;
  }
  return 2;  // unreachable with require_subcommand(1)
}

}  // namespace defrag
