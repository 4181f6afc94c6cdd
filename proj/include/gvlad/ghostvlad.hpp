#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gvlad/types.hpp"

namespace gvlad {

// Trainable aggregation parameters. Soft assignment runs over K+G clusters
// (K real plus G ghost); only the K real clusters own centers and output
// blocks.
struct GhostVladParams {
  Eigen::MatrixXd assign_w;  // (K+G) x D_F
  Eigen::VectorXd assign_b;  // K+G
  Eigen::MatrixXd centers;   // K x D_F
  int num_clusters = 0;      // K
  int num_ghosts = 0;        // G

  int dim() const { return static_cast<int>(centers.cols()); }
  void check() const;  // throws DimMismatch on inconsistent shapes
};

// Softmax over the K+G cluster logits of x. With mask_ghosts the ghost
// logits are excluded from the softmax and their weights are exactly zero.
Eigen::VectorXd soft_assign(const Eigen::VectorXd& x, const GhostVladParams& p,
                            bool mask_ghosts = false);

struct PoolResult {
  Eigen::VectorXd values;  // D_F * K, K contiguous blocks of D_F
  bool zero = false;       // unnormalized vector was exactly zero
};

// Weighted residual aggregation over the K real clusters. weights are the
// per-example deployment weights (all 1 during training). Summation over
// examples is compensated so reordering the inputs cannot drift the result.
PoolResult pool(const std::vector<Eigen::VectorXd>& xs,
                const std::vector<double>& weights, const GhostVladParams& p,
                bool normalize_output, bool mask_ghosts = false);

// L2 norm of example x's addend to the unnormalized pooled vector.
double contribution(const Eigen::VectorXd& x, double weight,
                    const GhostVladParams& p, bool mask_ghosts = false);

struct PoolGrads {
  Eigen::MatrixXd assign_w;
  Eigen::VectorXd assign_b;
  Eigen::MatrixXd centers;
  std::vector<Eigen::VectorXd> inputs;
};

// Gradients of upstream . pool(xs, weights, p) with respect to all
// parameters and inputs, including the softmax coupling across the K+G
// logits and, when normalize_output is set, the output L2 normalization.
PoolGrads pool_backward(const std::vector<Eigen::VectorXd>& xs,
                        const std::vector<double>& weights,
                        const GhostVladParams& p,
                        const Eigen::VectorXd& upstream, bool normalize_output,
                        bool mask_ghosts = false);

}  // namespace gvlad
