#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "gvlad/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"GhostVLAD set-aggregation toolkit"};
  app.require_subcommand(1);

  gvlad::ExperimentConfig cfg;
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;

  app.add_option("--config", config_path, "flat key=value config file");
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t s) { seed = s; seed_given = true; },
         "seed override");
  app.add_option("--threads", threads,
                 "worker threads (accepted for compatibility; computation is "
                 "deterministic and single-threaded)");
  app.add_flag("--no-timestamp", cfg.no_timestamp,
               "write 0 instead of the wall clock into model headers");

  std::string dataset, model, in_model, out, log_path, protocol, out_dir;
  bool jsonl = false;

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("out", out, "output dataset path")->required();
  gen->add_flag("--jsonl", jsonl, "write the JSON-lines text format");

  auto* init = app.add_subcommand("init", "k-means/PCA model initialization");
  init->add_option("dataset", dataset)->required();
  init->add_option("out", out, "output model path")->required();

  auto* tr = app.add_subcommand("train", "staged training");
  tr->add_option("dataset", dataset)->required();
  tr->add_option("in_model", in_model)->required();
  tr->add_option("out", out, "output model path")->required();
  tr->add_option("--log", log_path, "metrics CSV path");

  auto* embed = app.add_subcommand("embed", "embed templates");
  embed->add_option("dataset", dataset)->required();
  embed->add_option("model", model)->required();
  embed->add_option("out", out, "output embeddings path")->required();
  embed->add_option("--protocol", protocol, "template protocol (JSON lines)");

  auto* eval = app.add_subcommand("eval", "verification/identification curves");
  eval->add_option("embeddings", dataset)->required();
  eval->add_option("out_dir", out_dir)->required();
  eval->add_option("--protocol", protocol, "eval protocol JSON");

  auto* contrib = app.add_subcommand("contrib", "per-example contributions");
  contrib->add_option("dataset", dataset)->required();
  contrib->add_option("model", model)->required();
  contrib->add_option("out", out, "output CSV path")->required();

  auto* ablate = app.add_subcommand("ablate", "hyperparameter grid study");
  ablate->add_option("dataset", dataset)->required();
  ablate->add_option("out_dir", out_dir)->required();

  // per-key overrides, e.g. --set k=8 --set stage3_epochs=20
  std::vector<std::string> overrides;
  app.add_option("--set", overrides, "config override key=value (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& kv : overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw gvlad::InvalidSpec("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_given) {
      cfg.corpus.seed = seed;
      cfg.train.seed = seed;
    }
    (void)threads;

    if (gen->parsed()) gvlad::cmd_gen(cfg, out, jsonl);
    else if (init->parsed()) gvlad::cmd_init(dataset, cfg, out);
    else if (tr->parsed()) gvlad::cmd_train(dataset, cfg, in_model, out, log_path);
    else if (embed->parsed()) gvlad::cmd_embed(dataset, model, protocol, out);
    else if (eval->parsed()) gvlad::cmd_eval(dataset, protocol, out_dir);
    else if (contrib->parsed()) gvlad::cmd_contrib(dataset, model, out);
    else if (ablate->parsed()) gvlad::cmd_ablate(dataset, cfg, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
