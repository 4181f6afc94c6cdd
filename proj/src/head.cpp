#include "gvlad/head.hpp"

#include <cmath>
#include <map>

namespace gvlad {

void HeadParams::check() const {
  int d = out_dim();
  if (proj_bias.size() != d || bn_gamma.size() != d || bn_beta.size() != d ||
      bn_mean.size() != d || bn_var.size() != d)
    throw DimMismatch("head parameter vectors must all have length D");
  if (!proj.allFinite() || !proj_bias.allFinite() || !bn_gamma.allFinite() ||
      !bn_beta.allFinite() || !bn_mean.allFinite() || !bn_var.allFinite())
    throw DimMismatch("non-finite head parameters");
  if ((bn_var.array() < 0.0).any()) throw DimMismatch("negative bn_var entries");
  if (!(bn_eps > 0.0)) throw DimMismatch("bn_eps must be positive");
}

Eigen::VectorXd head_infer(const Eigen::VectorXd& pooled, const HeadParams& p) {
  p.check();
  if (pooled.size() != p.in_dim()) throw DimMismatch("pooled length != D_F*K");
  Eigen::VectorXd y = p.proj * pooled + p.proj_bias;
  Eigen::VectorXd denom = (p.bn_var.array() + p.bn_eps).sqrt();
  Eigen::VectorXd z =
      p.bn_gamma.cwiseProduct((y - p.bn_mean).cwiseQuotient(denom)) + p.bn_beta;
  double n = z.norm();
  if (n == 0.0) throw ZeroVector("head produced an exactly zero embedding");
  return z / n;
}

Eigen::MatrixXd head_train_forward(const Eigen::MatrixXd& pooled_rows,
                                   HeadParams& p, HeadBatchCache& cache) {
  p.check();
  if (pooled_rows.cols() != p.in_dim())
    throw DimMismatch("pooled length != D_F*K");
  const int b = static_cast<int>(pooled_rows.rows());
  const int d = p.out_dim();
  if (b < 1) throw EmptyInput("empty batch");

  Eigen::MatrixXd y = (pooled_rows * p.proj.transpose()).rowwise() +
                      p.proj_bias.transpose();
  Eigen::VectorXd mean = y.colwise().mean().transpose();
  Eigen::MatrixXd centered = y.rowwise() - mean.transpose();
  // biased batch variance, matching the normalization below
  Eigen::VectorXd var = centered.array().square().colwise().mean().matrix().transpose();

  Eigen::ArrayXd inv_std = (var.array() + p.bn_eps).rsqrt();
  Eigen::MatrixXd xhat = centered.array().rowwise() * inv_std.transpose();
  Eigen::MatrixXd z =
      (xhat.array().rowwise() * p.bn_gamma.transpose().array()).rowwise() +
      p.bn_beta.transpose().array();

  Eigen::MatrixXd out(b, d);
  for (int i = 0; i < b; ++i) {
    double n = z.row(i).norm();
    if (n == 0.0) throw ZeroVector("head produced an exactly zero embedding");
    out.row(i) = z.row(i) / n;
  }

  p.bn_mean = p.bn_momentum * p.bn_mean + (1.0 - p.bn_momentum) * mean;
  p.bn_var = p.bn_momentum * p.bn_var + (1.0 - p.bn_momentum) * var;

  cache.pooled = pooled_rows;
  cache.xhat = xhat;
  cache.z = z;
  cache.out = out;
  cache.batch_mean = mean;
  cache.batch_var = var;
  return out;
}

HeadGrads head_backward(const HeadBatchCache& cache, const HeadParams& p,
                        const Eigen::MatrixXd& upstream) {
  const int b = static_cast<int>(cache.xhat.rows());
  const int d = p.out_dim();
  if (upstream.rows() != b || upstream.cols() != d)
    throw DimMismatch("upstream shape != batch output shape");

  // L2 normalization backward, per sample
  Eigen::MatrixXd dz(b, d);
  for (int i = 0; i < b; ++i) {
    double n = cache.z.row(i).norm();
    Eigen::RowVectorXd o = cache.out.row(i);
    dz.row(i) = (upstream.row(i) - o.dot(upstream.row(i)) * o) / n;
  }

  HeadGrads g;
  g.bn_gamma = (dz.array() * cache.xhat.array()).colwise().sum().matrix().transpose();
  g.bn_beta = dz.colwise().sum().transpose();

  // standard batch-norm backward with batch statistics
  Eigen::MatrixXd dxhat = dz.array().rowwise() * p.bn_gamma.transpose().array();
  Eigen::ArrayXd inv_std = (cache.batch_var.array() + p.bn_eps).rsqrt();
  Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
  Eigen::RowVectorXd sum_dxhat_xhat =
      (dxhat.array() * cache.xhat.array()).colwise().sum();
  Eigen::MatrixXd dy(b, d);
  for (int i = 0; i < b; ++i) {
    dy.row(i) =
        (inv_std.transpose() / b) *
        (b * dxhat.row(i).array() - sum_dxhat.array() -
         cache.xhat.row(i).array() * sum_dxhat_xhat.array());
  }

  g.proj = dy.transpose() * cache.pooled;
  g.proj_bias = dy.colwise().sum().transpose();
  g.pooled = dy * p.proj;
  return g;
}

std::vector<double> deployment_weights(const Template& t) {
  if (t.records.empty()) throw EmptyTemplate("template has no records");
  std::map<std::uint32_t, int> frames_per_video;
  for (const auto& r : t.records)
    if (r.source_kind == SourceKind::VideoFrame) ++frames_per_video[r.media_id];

  std::vector<double> w;
  w.reserve(t.records.size());
  for (const auto& r : t.records) {
    if (r.source_kind == SourceKind::VideoFrame)
      w.push_back(1.0 / frames_per_video[r.media_id]);
    else
      w.push_back(1.0);
  }
  return w;
}

Eigen::VectorXd embed_template(const Template& t, const GhostVladParams& gv,
                               const HeadParams& head, bool mask_ghosts) {
  if (t.records.empty()) throw EmptyTemplate("template has no records");
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(t.records.size());
  for (const auto& r : t.records) xs.push_back(r.descriptor);
  PoolResult pooled = pool(xs, deployment_weights(t), gv, true, mask_ghosts);
  return head_infer(pooled.values, head);
}

double similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DimMismatch("embedding sizes differ");
  return a.dot(b);
}

}  // namespace gvlad
