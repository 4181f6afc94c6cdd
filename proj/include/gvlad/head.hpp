#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gvlad/ghostvlad.hpp"
#include "gvlad/types.hpp"

namespace gvlad {

// Dimensionality-reduction FC + batch norm + final L2 normalization.
struct HeadParams {
  Eigen::MatrixXd proj;       // D x (D_F*K)
  Eigen::VectorXd proj_bias;  // D
  Eigen::VectorXd bn_gamma;   // D
  Eigen::VectorXd bn_beta;    // D
  Eigen::VectorXd bn_mean;    // running mean
  Eigen::VectorXd bn_var;     // running variance
  double bn_momentum = 0.9;   // running = momentum*running + (1-momentum)*batch
  double bn_eps = 1e-5;

  int out_dim() const { return static_cast<int>(proj.rows()); }
  int in_dim() const { return static_cast<int>(proj.cols()); }
  void check() const;
};

// Inference path, uses running statistics. Result has unit norm.
Eigen::VectorXd head_infer(const Eigen::VectorXd& pooled, const HeadParams& p);

// Everything the backward pass needs from a train-mode forward.
struct HeadBatchCache {
  Eigen::MatrixXd pooled;  // B x M inputs
  Eigen::MatrixXd xhat;    // B x D normalized pre-affine activations
  Eigen::MatrixXd z;       // B x D post-affine, pre-L2
  Eigen::MatrixXd out;     // B x D unit-norm outputs
  Eigen::VectorXd batch_mean, batch_var;
};

// Train-mode forward over a batch (rows = samples). Normalizes with batch
// statistics and updates the running statistics in place.
Eigen::MatrixXd head_train_forward(const Eigen::MatrixXd& pooled_rows,
                                   HeadParams& p, HeadBatchCache& cache);

struct HeadGrads {
  Eigen::MatrixXd proj;
  Eigen::VectorXd proj_bias;
  Eigen::VectorXd bn_gamma;
  Eigen::VectorXd bn_beta;
  Eigen::MatrixXd pooled;  // B x M gradient w.r.t. the inputs
};

// Gradients of the train-mode forward, including the batch-statistics
// coupling and the final L2 normalization. upstream is B x D.
HeadGrads head_backward(const HeadBatchCache& cache, const HeadParams& p,
                        const Eigen::MatrixXd& upstream);

// Source-balancing weights: 1 per still, 1/n_v per frame of a video with n_v
// frames in this template.
std::vector<double> deployment_weights(const Template& t);

// pool with source balancing, then the inference head.
Eigen::VectorXd embed_template(const Template& t, const GhostVladParams& gv,
                               const HeadParams& head,
                               bool mask_ghosts = false);

// scalar product of two unit-norm embeddings
double similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace gvlad
