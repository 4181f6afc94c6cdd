#include "gvlad/init.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace gvlad {

namespace {

double sq_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).squaredNorm();
}

// k-means++ seeding
Eigen::MatrixXd seed_centers(const std::vector<Eigen::VectorXd>& pts, int k,
                             Rng& rng) {
  const int n = static_cast<int>(pts.size());
  const int dim = static_cast<int>(pts[0].size());
  Eigen::MatrixXd centers(k, dim);
  std::vector<char> chosen(n, 0);

  int first = static_cast<int>(rng.next_below(n));
  centers.row(0) = pts[first].transpose();
  chosen[first] = 1;

  std::vector<double> d2(n);
  for (int i = 0; i < n; ++i) d2[i] = sq_dist(pts[i], pts[first]);

  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    int pick = -1;
    if (total > 0.0) {
      double r = rng.next_unit() * total;
      double run = 0.0;
      for (int i = 0; i < n; ++i) {
        run += d2[i];
        if (run >= r) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = n - 1;
    }
    if (pick < 0 || chosen[pick]) {
      // all remaining mass on duplicates: take the first unchosen point
      pick = 0;
      while (pick < n && chosen[pick]) ++pick;
      if (pick == n) pick = 0;
    }
    centers.row(c) = pts[pick].transpose();
    chosen[pick] = 1;
    for (int i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], pts[pick]));
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const std::vector<Eigen::VectorXd>& points, int k,
                    std::uint64_t seed, int max_iters) {
  const int n = static_cast<int>(points.size());
  if (k < 1) throw TooFewPoints("k must be >= 1");
  if (n < k)
    throw TooFewPoints("k-means needs at least k points (" + std::to_string(n) +
                       " < " + std::to_string(k) + ")");

  Rng rng = stream_rng(seed, 0x6b6d65616e73ULL);  // "kmeans"
  Eigen::MatrixXd centers = seed_centers(points, k, rng);
  std::vector<int> assign(n, -1);

  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = sq_dist(points[i], centers.row(0).transpose());
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(points[i], centers.row(c).transpose());
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, centers.cols());
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += points[i].transpose();
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / counts[c];
      } else {
        // empty-cluster repair: steal the point farthest from its center
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          double d = sq_dist(points[i], centers.row(assign[i]).transpose());
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centers.row(c) = points[far_i].transpose();
        assign[far_i] = c;
      }
    }
  }

  KMeansResult res;
  res.centers = std::move(centers);
  res.assignments = std::move(assign);
  for (int i = 0; i < n; ++i)
    res.inertia += sq_dist(points[i], res.centers.row(res.assignments[i]).transpose());
  return res;
}

GhostVladParams init_ghostvlad(const std::vector<Eigen::VectorXd>& clean,
                               const std::vector<Eigen::VectorXd>& degraded,
                               int k, int g, double alpha, std::uint64_t seed) {
  KMeansResult km = kmeans(clean, k, seed);
  const int dim = static_cast<int>(km.centers.cols());

  Eigen::MatrixXd all_centers(k + g, dim);
  all_centers.topRows(k) = km.centers;
  if (g == 1) {
    // k-means with one cluster is just the mean
    if (degraded.empty()) throw TooFewPoints("no degraded points for the ghost cluster");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& x : degraded) mean += x;
    all_centers.row(k) = (mean / static_cast<double>(degraded.size())).transpose();
  } else if (g > 1) {
    KMeansResult gm = kmeans(degraded, g, mix64(seed) ^ 0x67686f7374ULL);
    all_centers.bottomRows(g) = gm.centers;
  }

  GhostVladParams p;
  p.num_clusters = k;
  p.num_ghosts = g;
  p.centers = all_centers.topRows(k);
  p.assign_w = 2.0 * alpha * all_centers;
  p.assign_b = -alpha * all_centers.rowwise().squaredNorm();
  p.check();
  return p;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> init_projection_pca(
    const std::vector<Eigen::VectorXd>& samples, int d) {
  const int n = static_cast<int>(samples.size());
  if (n == 0) throw TooFewSamples("no samples");
  const int dim = static_cast<int>(samples[0].size());
  if (d < 1 || d > dim) throw TooFewSamples("need 1 <= d <= ambient dim");
  if (n <= d)
    throw TooFewSamples("PCA needs more samples than output dimensions");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& s : samples) mean += s;
  mean /= n;

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& s : samples) {
    Eigen::VectorXd c = s - mean;
    cov.noalias() += c * c.transpose();
  }
  cov /= (n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw TooFewSamples("eigendecomposition failed");

  // eigenvalues come out ascending; take the top d, descending
  Eigen::MatrixXd proj(d, dim);
  for (int r = 0; r < d; ++r) {
    Eigen::VectorXd v = es.eigenvectors().col(dim - 1 - r);
    // deterministic sign: largest-magnitude coefficient positive
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    proj.row(r) = v.transpose();
  }
  return {proj, -(proj * mean)};
}

}  // namespace gvlad
