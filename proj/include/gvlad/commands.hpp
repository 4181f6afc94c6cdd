#pragma once

#include <string>
#include <vector>

#include "gvlad/corpus.hpp"
#include "gvlad/training.hpp"

namespace gvlad {

// Everything the CLI can configure, overridable from a flat key=value file
// and command-line flags.
struct ExperimentConfig {
  SyntheticCorpusSpec corpus;
  TrainConfig train;
  int k = 8;
  int g = 1;
  int d = 128;
  double alpha = 100.0;  // assignment sharpness for center-derived init
  bool no_timestamp = false;
  // ablation grids
  std::vector<int> grid_k{4, 8};
  std::vector<int> grid_g{0, 1};
  std::vector<int> grid_set_size{2};
  std::vector<int> grid_d{128};

  // applies key=value lines from path; unknown keys are an error
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
};

void cmd_gen(const ExperimentConfig& cfg, const std::string& out_path,
             bool jsonl = false);

void cmd_init(const std::string& dataset_path, const ExperimentConfig& cfg,
              const std::string& out_model);

void cmd_train(const std::string& dataset_path, const ExperimentConfig& cfg,
               const std::string& in_model, const std::string& out_model,
               const std::string& log_path);

void cmd_embed(const std::string& dataset_path, const std::string& model_path,
               const std::string& protocol_path, const std::string& out_path);

void cmd_eval(const std::string& embeddings_path,
              const std::string& protocol_path, const std::string& out_dir);

void cmd_contrib(const std::string& dataset_path,
                 const std::string& model_path, const std::string& out_path);

void cmd_ablate(const std::string& dataset_path, const ExperimentConfig& cfg,
                const std::string& out_dir);

}  // namespace gvlad
