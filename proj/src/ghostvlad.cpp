#include "gvlad/ghostvlad.hpp"

#include <cmath>

namespace gvlad {

void GhostVladParams::check() const {
  int total = num_clusters + num_ghosts;
  if (num_clusters < 1 || num_ghosts < 0)
    throw DimMismatch("need K >= 1 and G >= 0");
  if (assign_w.rows() != total || assign_b.size() != total)
    throw DimMismatch("assignment parameters must have K+G rows");
  if (centers.rows() != num_clusters)
    throw DimMismatch("centers must have K rows");
  if (assign_w.cols() != centers.cols())
    throw DimMismatch("assign_w and centers disagree on D_F");
  if (!assign_w.allFinite() || !assign_b.allFinite() || !centers.allFinite())
    throw DimMismatch("non-finite parameter entries");
}

Eigen::VectorXd soft_assign(const Eigen::VectorXd& x, const GhostVladParams& p,
                            bool mask_ghosts) {
  if (x.size() != p.dim()) throw DimMismatch("descriptor length != D_F");
  int total = p.num_clusters + p.num_ghosts;
  int active = mask_ghosts ? p.num_clusters : total;

  Eigen::VectorXd logits = p.assign_w * x + p.assign_b;
  double m = logits.head(active).maxCoeff();
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(total);
  double sum = 0.0;
  for (int k = 0; k < active; ++k) {
    weights[k] = std::exp(logits[k] - m);
    sum += weights[k];
  }
  weights.head(active) /= sum;
  return weights;
}

namespace {

void check_pool_args(const std::vector<Eigen::VectorXd>& xs,
                     const std::vector<double>& weights,
                     const GhostVladParams& p) {
  p.check();
  if (xs.empty()) throw EmptyInput("pool needs at least one descriptor");
  if (weights.size() != xs.size())
    throw DimMismatch("weights length != number of descriptors");
  for (const auto& x : xs)
    if (x.size() != p.dim()) throw DimMismatch("descriptor length != D_F");
}

}  // namespace

PoolResult pool(const std::vector<Eigen::VectorXd>& xs,
                const std::vector<double>& weights, const GhostVladParams& p,
                bool normalize_output, bool mask_ghosts) {
  check_pool_args(xs, weights, p);
  const int d = p.dim();
  const int k_real = p.num_clusters;
  const int m = d * k_real;

  // Kahan accumulators, one per output component
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd comp = Eigen::VectorXd::Zero(m);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    Eigen::VectorXd alpha = soft_assign(xs[i], p, mask_ghosts);
    for (int k = 0; k < k_real; ++k) {
      double c = weights[i] * alpha[k];
      for (int j = 0; j < d; ++j) {
        double term = c * (xs[i][j] - p.centers(k, j));
        int idx = k * d + j;
        double y = term - comp[idx];
        double t = acc[idx] + y;
        comp[idx] = (t - acc[idx]) - y;
        acc[idx] = t;
      }
    }
  }

  PoolResult res;
  res.values = std::move(acc);
  double n = res.values.norm();
  if (n == 0.0) {
    res.zero = true;
    return res;
  }
  if (normalize_output) res.values /= n;
  return res;
}

double contribution(const Eigen::VectorXd& x, double weight,
                    const GhostVladParams& p, bool mask_ghosts) {
  p.check();
  if (x.size() != p.dim()) throw DimMismatch("descriptor length != D_F");
  Eigen::VectorXd alpha = soft_assign(x, p, mask_ghosts);
  double sq = 0.0;
  for (int k = 0; k < p.num_clusters; ++k) {
    double c = weight * alpha[k];
    sq += c * c * (x - p.centers.row(k).transpose()).squaredNorm();
  }
  return std::sqrt(sq);
}

PoolGrads pool_backward(const std::vector<Eigen::VectorXd>& xs,
                        const std::vector<double>& weights,
                        const GhostVladParams& p,
                        const Eigen::VectorXd& upstream, bool normalize_output,
                        bool mask_ghosts) {
  check_pool_args(xs, weights, p);
  const int d = p.dim();
  const int k_real = p.num_clusters;
  const int total = k_real + p.num_ghosts;
  const int m = d * k_real;
  if (upstream.size() != m) throw DimMismatch("upstream length != D_F*K");

  PoolGrads g;
  g.assign_w = Eigen::MatrixXd::Zero(total, d);
  g.assign_b = Eigen::VectorXd::Zero(total);
  g.centers = Eigen::MatrixXd::Zero(k_real, d);
  g.inputs.assign(xs.size(), Eigen::VectorXd::Zero(d));

  // backprop through the output normalization: y = U/||U||
  Eigen::VectorXd gbar = upstream;
  if (normalize_output) {
    PoolResult fwd = pool(xs, weights, p, false, mask_ghosts);
    if (!fwd.zero) {
      double n = fwd.values.norm();
      Eigen::VectorXd y = fwd.values / n;
      gbar = (upstream - y.dot(upstream) * y) / n;
    }
  }

  for (std::size_t i = 0; i < xs.size(); ++i) {
    Eigen::VectorXd alpha = soft_assign(xs[i], p, mask_ghosts);

    // t(k) = d(loss)/d(alpha_ik), nonzero for real clusters only
    Eigen::VectorXd t = Eigen::VectorXd::Zero(total);
    for (int k = 0; k < k_real; ++k) {
      Eigen::VectorXd resid = xs[i] - p.centers.row(k).transpose();
      t[k] = weights[i] * gbar.segment(k * d, d).dot(resid);
      // residual path: dU/dx_i and dU/dc_k
      double c = weights[i] * alpha[k];
      g.inputs[i] += c * gbar.segment(k * d, d);
      g.centers.row(k) -= c * gbar.segment(k * d, d).transpose();
    }

    // softmax jacobian across all (unmasked) logits
    double dot = alpha.dot(t);
    Eigen::VectorXd dlogit = alpha.cwiseProduct(t - Eigen::VectorXd::Constant(total, dot));

    g.assign_w += dlogit * xs[i].transpose();
    g.assign_b += dlogit;
    g.inputs[i] += p.assign_w.transpose() * dlogit;
  }
  return g;
}

}  // namespace gvlad
