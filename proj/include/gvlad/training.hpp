#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "gvlad/model.hpp"
#include "gvlad/types.hpp"

namespace gvlad {

struct TrainConfig {
  int set_size = 2;     // faces per training set (stage 3)
  int batch_sets = 42;  // image sets per batch; 84 images at set_size 2
  double base_lr = 1e-4;
  double assign_lr = 0.1;
  double classifier_lr = 1.0;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int neg_classes = 20;
  double lr_drop_factor = 0.1;
  int plateau_patience = 3;
  int stage2_epochs = 5;
  int stage3_epochs = 15;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;
  // trains head+classifier only, on top of a frozen aggregation; used for
  // the mean-pooling baseline (K=1, zero centers and assignment weights)
  bool freeze_aggregation = false;

  void validate() const;
};

struct OvaResult {
  double loss = 0.0;
  Eigen::VectorXd d_embedding;
  // (row, gradient) for rows in the active set; all other rows are zero
  std::vector<std::pair<int, Eigen::VectorXd>> d_classifier_rows;
  std::vector<int> active_rows;
};

// One-vs-all logistic loss over the target row and the top neg_classes
// non-target rows by score (ties to the lower index).
OvaResult ova_loss_and_grad(const Eigen::VectorXd& embedding, int target,
                            const Eigen::MatrixXd& classifier, int neg_classes);

// SGD with momentum: v <- momentum*v - lr*(grad + wd*param); param += v.
void sgd_update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                Eigen::MatrixXd& velocity, double lr, double momentum,
                double weight_decay);
void sgd_update(Eigen::VectorXd& param, const Eigen::VectorXd& grad,
                Eigen::VectorXd& velocity, double lr, double momentum,
                double weight_decay);

// One batch: batch_sets distinct identities, set_size examples each, sampled
// without replacement within a set. Returns record indices per set paired
// with the identity.
std::vector<std::pair<int, std::vector<int>>> sample_batch(
    const std::vector<std::vector<int>>& examples_by_identity,
    const std::vector<int>& eligible_identities, int batch_sets, int set_size,
    Rng& rng);

struct EpochLog {
  int epoch = 0;
  int stage = 2;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_tar_far2 = 0.0;  // TAR at FAR=1e-2 on the validation split
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
};

// Staged training: stage 2 runs singles with ghost clusters masked on the
// caller-marked stage-2 subset; stage 3 runs full sets with ghosts enabled
// on the whole corpus. The learning rates drop by lr_drop_factor when the
// validation error stops improving for plateau_patience evaluations.
// stage2_mask marks the records eligible for stage 2 (the non-degraded
// ones); training never inspects record metadata itself.
TrainResult train(const std::vector<ExampleRecord>& records,
                  const std::vector<char>& stage2_mask, int num_identities,
                  const TrainConfig& cfg, const Model& init_model);

}  // namespace gvlad
