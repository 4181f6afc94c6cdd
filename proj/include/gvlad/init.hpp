#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "gvlad/ghostvlad.hpp"

namespace gvlad {

struct KMeansResult {
  Eigen::MatrixXd centers;       // K x dim
  std::vector<int> assignments;  // cluster index per point
  double inertia = 0.0;          // sum of squared distances
};

// Lloyd's algorithm with k-means++ seeding; deterministic given seed.
KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int k,
                    std::uint64_t seed, int max_iters = 100);

// Centers from k-means on clean descriptors, ghost centers from k-means on
// degraded descriptors (the mean when G=1), assignment parameters derived
// from all K+G centers: a = 2*alpha*c, b = -alpha*|c|^2.
GhostVladParams init_ghostvlad(const std::vector<Eigen::VectorXd>& clean,
                               const std::vector<Eigen::VectorXd>& degraded,
                               int k, int g, double alpha, std::uint64_t seed);

// Rows of proj are the top-d principal directions of the samples
// (descending eigenvalue); proj_bias = -proj*mean so the layer centers the
// data.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> init_projection_pca(
    const std::vector<Eigen::VectorXd>& samples, int d);

}  // namespace gvlad
