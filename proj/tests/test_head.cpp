#include "doctest.h"
#include "gvlad/head.hpp"
#include "test_util.hpp"

using namespace gvlad;
using testutil::random_params;
using testutil::random_unit;

namespace {

HeadParams identity_head(int d) {
  HeadParams h;
  h.proj = Eigen::MatrixXd::Identity(d, d);
  h.proj_bias = Eigen::VectorXd::Zero(d);
  h.bn_gamma = Eigen::VectorXd::Ones(d);
  h.bn_beta = Eigen::VectorXd::Zero(d);
  h.bn_mean = Eigen::VectorXd::Zero(d);
  h.bn_var = Eigen::VectorXd::Ones(d);
  return h;
}

HeadParams random_head(Rng& rng, int d, int m) {
  HeadParams h;
  h.proj.resize(d, m);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < m; ++j) h.proj(i, j) = rng.next_gaussian();
  h.proj_bias = testutil::random_vec(rng, d);
  h.bn_gamma = Eigen::VectorXd::Ones(d) + 0.2 * testutil::random_vec(rng, d);
  h.bn_beta = 0.2 * testutil::random_vec(rng, d);
  h.bn_mean = 0.2 * testutil::random_vec(rng, d);
  h.bn_var = (Eigen::VectorXd::Ones(d) + 0.3 * testutil::random_vec(rng, d)).cwiseAbs();
  return h;
}

ExampleRecord still_record(const Eigen::VectorXd& x, std::uint32_t media_id) {
  ExampleRecord r;
  r.descriptor = x;
  r.media_id = media_id;
  r.source_kind = SourceKind::Still;
  return r;
}

ExampleRecord frame_record(const Eigen::VectorXd& x, std::uint32_t media_id) {
  ExampleRecord r = still_record(x, media_id);
  r.source_kind = SourceKind::VideoFrame;
  return r;
}

}  // namespace

TEST_CASE("head_infer: identity head is plain normalization") {
  Rng rng = stream_rng(31, 0);
  HeadParams h = identity_head(8);
  Eigen::VectorXd pooled = testutil::random_vec(rng, 8);
  Eigen::VectorXd out = head_infer(pooled, h);
  // 1/sqrt(1+eps) scales uniformly and cancels in the normalization
  CHECK((out - pooled.normalized()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("head_infer: output always has unit norm") {
  Rng rng = stream_rng(32, 0);
  for (int t = 0; t < 10; ++t) {
    HeadParams h = random_head(rng, 6, 12);
    CHECK(std::abs(head_infer(testutil::random_vec(rng, 12), h).norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("head_train_forward: identical inputs collapse onto normalize(beta)") {
  Rng rng = stream_rng(33, 0);
  HeadParams h = random_head(rng, 5, 7);
  h.bn_beta = testutil::random_vec(rng, 5);
  Eigen::MatrixXd batch(3, 7);
  Eigen::VectorXd x = testutil::random_vec(rng, 7);
  for (int i = 0; i < 3; ++i) batch.row(i) = x.transpose();
  HeadBatchCache cache;
  Eigen::MatrixXd out = head_train_forward(batch, h, cache);
  Eigen::VectorXd expected = h.bn_beta.normalized();
  for (int i = 0; i < 3; ++i)
    CHECK((out.row(i).transpose() - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("head_train_forward: batch statistics are normalized out") {
  Rng rng = stream_rng(34, 0);
  HeadParams h = random_head(rng, 6, 9);
  Eigen::MatrixXd batch(8, 9);
  for (int i = 0; i < 8; ++i) batch.row(i) = testutil::random_vec(rng, 9).transpose();
  HeadBatchCache cache;
  head_train_forward(batch, h, cache);
  // xhat has per-dimension mean 0 and variance ~1 (up to eps)
  Eigen::VectorXd mean = cache.xhat.colwise().mean().transpose();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-9);
  Eigen::VectorXd var =
      (cache.xhat.rowwise() - mean.transpose()).array().square().colwise().mean().matrix().transpose();
  CHECK((var.array() - 1.0).abs().maxCoeff() < 1e-4);
}

TEST_CASE("head_train_forward: running statistics update with momentum") {
  Rng rng = stream_rng(35, 0);
  HeadParams h = random_head(rng, 4, 6);
  Eigen::VectorXd mean0 = h.bn_mean, var0 = h.bn_var;
  Eigen::MatrixXd batch(5, 6);
  for (int i = 0; i < 5; ++i) batch.row(i) = testutil::random_vec(rng, 6).transpose();
  HeadBatchCache cache;
  head_train_forward(batch, h, cache);
  CHECK((h.bn_mean - (0.9 * mean0 + 0.1 * cache.batch_mean)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((h.bn_var - (0.9 * var0 + 0.1 * cache.batch_var)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("head_backward: finite differences across all parameter groups") {
  Rng rng = stream_rng(36, 0);
  const double h_step = 1e-5;
  const int d = 4, m = 6, b = 3;
  HeadParams head = random_head(rng, d, m);
  Eigen::MatrixXd batch(b, m);
  for (int i = 0; i < b; ++i) batch.row(i) = testutil::random_vec(rng, m).transpose();
  Eigen::MatrixXd upstream(b, d);
  for (int i = 0; i < b; ++i) upstream.row(i) = testutil::random_vec(rng, d).transpose();

  auto loss = [&](HeadParams hp, const Eigen::MatrixXd& in) {
    HeadBatchCache c;
    Eigen::MatrixXd out = head_train_forward(in, hp, c);
    return (out.array() * upstream.array()).sum();
  };

  HeadBatchCache cache;
  HeadParams head_fwd = head;
  head_train_forward(batch, head_fwd, cache);
  HeadGrads g = head_backward(cache, head, upstream);

  auto fd = [&](auto&& mutate) {
    HeadParams hp = head;
    mutate(hp, h_step);
    double fp = loss(hp, batch);
    hp = head;
    mutate(hp, -h_step);
    double fm = loss(hp, batch);
    return (fp - fm) / (2 * h_step);
  };

  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < m; ++j)
      CHECK(testutil::grad_close(
          g.proj(i, j), fd([&](HeadParams& hp, double s) { hp.proj(i, j) += s; })));
    CHECK(testutil::grad_close(
        g.proj_bias[i], fd([&](HeadParams& hp, double s) { hp.proj_bias[i] += s; })));
    CHECK(testutil::grad_close(
        g.bn_gamma[i], fd([&](HeadParams& hp, double s) { hp.bn_gamma[i] += s; })));
    CHECK(testutil::grad_close(
        g.bn_beta[i], fd([&](HeadParams& hp, double s) { hp.bn_beta[i] += s; })));
  }
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < m; ++j) {
      Eigen::MatrixXd bp = batch, bm = batch;
      bp(i, j) += h_step;
      bm(i, j) -= h_step;
      double num = (loss(head, bp) - loss(head, bm)) / (2 * h_step);
      CHECK(testutil::grad_close(g.pooled(i, j), num));
    }
}

TEST_CASE("head_backward: zero upstream gives zero gradients") {
  Rng rng = stream_rng(37, 0);
  HeadParams head = random_head(rng, 4, 6);
  Eigen::MatrixXd batch(3, 6);
  for (int i = 0; i < 3; ++i) batch.row(i) = testutil::random_vec(rng, 6).transpose();
  HeadBatchCache cache;
  head_train_forward(batch, head, cache);
  HeadGrads g = head_backward(cache, head, Eigen::MatrixXd::Zero(3, 4));
  CHECK(g.proj.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.proj_bias.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.bn_gamma.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.bn_beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.pooled.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("head_backward: gamma gradient equals upstream dot normalized input") {
  // with the final L2 norm removed analytically: pick upstream orthogonal to
  // the output so the normalization jacobian is the plain scaling
  Rng rng = stream_rng(38, 0);
  const int d = 5, m = 5, b = 4;
  HeadParams head = identity_head(d);
  Eigen::MatrixXd batch(b, m);
  for (int i = 0; i < b; ++i) batch.row(i) = testutil::random_vec(rng, m).transpose();
  HeadBatchCache cache;
  HeadParams hf = head;
  head_train_forward(batch, hf, cache);
  Eigen::MatrixXd upstream(b, d);
  for (int i = 0; i < b; ++i) upstream.row(i) = testutil::random_vec(rng, d).transpose();
  HeadGrads g = head_backward(cache, head, upstream);

  Eigen::VectorXd expected = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < b; ++i) {
    double n = cache.z.row(i).norm();
    Eigen::RowVectorXd o = cache.out.row(i);
    Eigen::RowVectorXd dz = (upstream.row(i) - o.dot(upstream.row(i)) * o) / n;
    expected += (dz.array() * cache.xhat.row(i).array()).matrix().transpose();
  }
  CHECK((g.bn_gamma - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("embed_template: stills only equals unweighted pooling") {
  Rng rng = stream_rng(39, 0);
  GhostVladParams gv = random_params(rng, 3, 1, 8);
  HeadParams head = random_head(rng, 6, 24);
  Template t;
  t.subject = 0;
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd x = random_unit(rng, 8);
    xs.push_back(x);
    t.records.push_back(still_record(x, i));
  }
  Eigen::VectorXd via_template = embed_template(t, gv, head);
  Eigen::VectorXd direct =
      head_infer(pool(xs, {1, 1, 1, 1}, gv, true).values, head);
  CHECK((via_template - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("embed_template: deployment weights follow the definition") {
  Rng rng = stream_rng(40, 0);
  Template t;
  t.records.push_back(still_record(random_unit(rng, 4), 10));
  t.records.push_back(frame_record(random_unit(rng, 4), 20));
  t.records.push_back(frame_record(random_unit(rng, 4), 20));
  auto w = deployment_weights(t);
  CHECK(w == std::vector<double>{1.0, 0.5, 0.5});
}

TEST_CASE("embed_template: video frame count cancels for repeated descriptors") {
  Rng rng = stream_rng(41, 0);
  GhostVladParams gv = random_params(rng, 3, 1, 8);
  HeadParams head = random_head(rng, 6, 24);
  Eigen::VectorXd x = random_unit(rng, 8);
  Eigen::VectorXd still = random_unit(rng, 8);

  auto make = [&](int n_frames) {
    Template t;
    t.records.push_back(still_record(still, 1));
    for (int i = 0; i < n_frames; ++i) t.records.push_back(frame_record(x, 2));
    return embed_template(t, gv, head);
  };
  CHECK((make(1) - make(100)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("embed_template: duplicating every frame m times changes nothing") {
  Rng rng = stream_rng(42, 0);
  GhostVladParams gv = random_params(rng, 3, 0, 8);
  HeadParams head = random_head(rng, 6, 24);
  Template base;
  base.records.push_back(still_record(random_unit(rng, 8), 1));
  for (int i = 0; i < 3; ++i)
    base.records.push_back(frame_record(random_unit(rng, 8), 7));

  Template tripled;
  tripled.records.push_back(base.records[0]);
  for (int copy = 0; copy < 3; ++copy)
    for (int i = 1; i < 4; ++i) tripled.records.push_back(base.records[i]);

  CHECK((embed_template(base, gv, head) - embed_template(tripled, gv, head))
            .cwiseAbs()
            .maxCoeff() < 1e-9);
}

TEST_CASE("similarity: trivial identities") {
  Rng rng = stream_rng(43, 0);
  Eigen::VectorXd a = random_unit(rng, 6);
  CHECK(similarity(a, a) == doctest::Approx(1.0).epsilon(1e-9));
  Eigen::VectorXd b = testutil::random_vec(rng, 6);
  b = (b - a * a.dot(b)).normalized();
  CHECK(similarity(a, b) == doctest::Approx(0.0).epsilon(1e-9));
  Eigen::VectorXd c = random_unit(rng, 6);
  CHECK(similarity(a, c) == similarity(c, a));
}

TEST_CASE("embed_template: empty template rejected") {
  Rng rng = stream_rng(44, 0);
  GhostVladParams gv = random_params(rng, 2, 0, 4);
  HeadParams head = identity_head(8);
  Template t;
  CHECK_THROWS_AS(embed_template(t, gv, head), EmptyTemplate);
}
