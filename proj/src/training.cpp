#include "gvlad/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gvlad/evaluation.hpp"
#include "gvlad/ghostvlad.hpp"
#include "gvlad/head.hpp"

namespace gvlad {

namespace {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void TrainConfig::validate() const {
  if (set_size < 1 || batch_sets < 1) throw InvalidSpec("set_size and batch_sets must be positive");
  if (base_lr <= 0 || assign_lr <= 0 || classifier_lr <= 0)
    throw InvalidSpec("learning rates must be positive");
  if (momentum < 0 || momentum >= 1) throw InvalidSpec("momentum must be in [0, 1)");
  if (weight_decay < 0) throw InvalidSpec("weight_decay must be non-negative");
  if (neg_classes < 1) throw InvalidSpec("neg_classes must be positive");
  if (lr_drop_factor <= 0 || lr_drop_factor >= 1)
    throw InvalidSpec("lr_drop_factor must be in (0, 1)");
  if (plateau_patience < 1) throw InvalidSpec("plateau_patience must be positive");
  if (stage2_epochs < 0 || stage3_epochs < 0) throw InvalidSpec("epoch counts must be >= 0");
  if (val_fraction <= 0 || val_fraction >= 1)
    throw InvalidSpec("val_fraction must be in (0, 1)");
}

OvaResult ova_loss_and_grad(const Eigen::VectorXd& embedding, int target,
                            const Eigen::MatrixXd& classifier, int neg_classes) {
  const int t = static_cast<int>(classifier.rows());
  if (target < 0 || target >= t) throw BadLabel("target identity out of range");
  if (classifier.cols() != embedding.size())
    throw DimMismatch("classifier columns != embedding length");

  Eigen::VectorXd scores = classifier * embedding;

  // top neg_classes non-target rows by score, ties to the lower index
  std::vector<int> order;
  order.reserve(t - 1);
  for (int r = 0; r < t; ++r)
    if (r != target) order.push_back(r);
  int keep = std::min<int>(neg_classes, static_cast<int>(order.size()));
  std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                    [&](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(keep);

  OvaResult res;
  res.loss = softplus(-scores[target]);
  res.d_embedding = Eigen::VectorXd::Zero(embedding.size());
  res.active_rows.push_back(target);

  double coeff_t = -sigmoid(-scores[target]);
  res.d_embedding += coeff_t * classifier.row(target).transpose();
  res.d_classifier_rows.push_back({target, coeff_t * embedding});

  for (int r : order) {
    res.loss += softplus(scores[r]);
    double coeff = sigmoid(scores[r]);
    res.d_embedding += coeff * classifier.row(r).transpose();
    res.d_classifier_rows.push_back({r, coeff * embedding});
    res.active_rows.push_back(r);
  }
  return res;
}

void sgd_update(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                Eigen::MatrixXd& velocity, double lr, double momentum,
                double weight_decay) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols() ||
      param.rows() != velocity.rows() || param.cols() != velocity.cols())
    throw ShapeMismatch("sgd_update shapes disagree");
  velocity = momentum * velocity - lr * (grad + weight_decay * param);
  param += velocity;
}

void sgd_update(Eigen::VectorXd& param, const Eigen::VectorXd& grad,
                Eigen::VectorXd& velocity, double lr, double momentum,
                double weight_decay) {
  if (param.size() != grad.size() || param.size() != velocity.size())
    throw ShapeMismatch("sgd_update shapes disagree");
  velocity = momentum * velocity - lr * (grad + weight_decay * param);
  param += velocity;
}

std::vector<std::pair<int, std::vector<int>>> sample_batch(
    const std::vector<std::vector<int>>& examples_by_identity,
    const std::vector<int>& eligible_identities, int batch_sets, int set_size,
    Rng& rng) {
  if (eligible_identities.empty())
    throw InsufficientExamples("no identities with enough examples");
  int sets = std::min<int>(batch_sets, static_cast<int>(eligible_identities.size()));

  std::vector<int> ids = eligible_identities;
  rng.shuffle(ids);
  ids.resize(sets);

  std::vector<std::pair<int, std::vector<int>>> batch;
  batch.reserve(sets);
  for (int id : ids) {
    const auto& pool_idx = examples_by_identity[id];
    if (static_cast<int>(pool_idx.size()) < set_size)
      throw InsufficientExamples("identity " + std::to_string(id) +
                                 " has fewer than set_size examples");
    std::vector<int> picks = pool_idx;
    // partial Fisher-Yates: the first set_size entries are the sample
    for (int i = 0; i < set_size; ++i) {
      std::size_t j = i + rng.next_below(picks.size() - i);
      std::swap(picks[i], picks[j]);
    }
    picks.resize(set_size);
    batch.push_back({id, std::move(picks)});
  }
  return batch;
}

namespace {

struct Velocities {
  Eigen::MatrixXd assign_w, centers, proj, classifier;
  Eigen::VectorXd assign_b, proj_bias, bn_gamma, bn_beta;

  explicit Velocities(const Model& m)
      : assign_w(Eigen::MatrixXd::Zero(m.gv.assign_w.rows(), m.gv.assign_w.cols())),
        centers(Eigen::MatrixXd::Zero(m.gv.centers.rows(), m.gv.centers.cols())),
        proj(Eigen::MatrixXd::Zero(m.head.proj.rows(), m.head.proj.cols())),
        classifier(Eigen::MatrixXd::Zero(m.classifier.rows(), m.classifier.cols())),
        assign_b(Eigen::VectorXd::Zero(m.gv.assign_b.size())),
        proj_bias(Eigen::VectorXd::Zero(m.head.proj_bias.size())),
        bn_gamma(Eigen::VectorXd::Zero(m.head.bn_gamma.size())),
        bn_beta(Eigen::VectorXd::Zero(m.head.bn_beta.size())) {}
};

struct ValProtocol {
  std::vector<Template> templates;
  std::vector<VerificationPair> pairs;
};

// Two validation templates per identity; genuine pair within an identity,
// impostors across identities.
ValProtocol build_val_protocol(const std::vector<ExampleRecord>& records,
                               const std::vector<std::vector<int>>& val_by_identity) {
  ValProtocol vp;
  std::vector<int> subjects;
  for (std::size_t id = 0; id < val_by_identity.size(); ++id) {
    const auto& idx = val_by_identity[id];
    if (idx.size() < 2) continue;
    std::size_t half = idx.size() / 2;
    Template a, b;
    a.subject = b.subject = static_cast<std::uint32_t>(id);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < half ? a : b).records.push_back(records[idx[i]]);
    vp.templates.push_back(std::move(a));
    vp.templates.push_back(std::move(b));
  }
  const int n = static_cast<int>(vp.templates.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      vp.pairs.push_back(
          {i, j, vp.templates[i].subject == vp.templates[j].subject});
  return vp;
}

double validation_tar(const ValProtocol& vp, const Model& m, bool mask_ghosts) {
  EmbeddingStore store;
  for (std::size_t i = 0; i < vp.templates.size(); ++i) {
    TemplateEntry e;
    e.template_id = static_cast<int>(i);
    e.subject = static_cast<int>(vp.templates[i].subject);
    e.embedding = embed_template(vp.templates[i], m.gv, m.head, mask_ghosts);
    store[e.template_id] = std::move(e);
  }
  return verify(vp.pairs, store).tar_at_far(1e-2);
}

}  // namespace

TrainResult train(const std::vector<ExampleRecord>& records,
                  const std::vector<char>& stage2_mask, int num_identities,
                  const TrainConfig& cfg, const Model& init_model) {
  cfg.validate();
  init_model.check();
  if (stage2_mask.size() != records.size())
    throw ShapeMismatch("stage2_mask length != record count");
  if (init_model.classifier.rows() != num_identities)
    throw ShapeMismatch("classifier rows != identity count");

  TrainResult result;
  result.model = init_model;
  if (cfg.stage2_epochs == 0 && cfg.stage3_epochs == 0) return result;

  Model& m = result.model;
  const int batch_images = cfg.batch_sets * cfg.set_size;

  // train/validation split: per identity, the tail of its example list is
  // held out
  std::vector<std::vector<int>> train_by_id(num_identities), val_by_id(num_identities);
  {
    std::vector<std::vector<int>> by_id(num_identities);
    for (std::size_t i = 0; i < records.size(); ++i) {
      int id = static_cast<int>(records[i].identity);
      if (id < 0 || id >= num_identities) throw BadLabel("record identity out of range");
      by_id[id].push_back(static_cast<int>(i));
    }
    for (int id = 0; id < num_identities; ++id) {
      std::size_t n = by_id[id].size();
      std::size_t n_val = std::min(n, static_cast<std::size_t>(
          std::ceil(cfg.val_fraction * static_cast<double>(n))));
      std::size_t n_train = n - n_val;
      for (std::size_t i = 0; i < n; ++i)
        (i < n_train ? train_by_id : val_by_id)[id].push_back(by_id[id][i]);
    }
  }

  std::vector<std::vector<int>> stage2_by_id(num_identities);
  for (int id = 0; id < num_identities; ++id)
    for (int i : train_by_id[id])
      if (stage2_mask[i]) stage2_by_id[id].push_back(i);

  ValProtocol vp = build_val_protocol(records, val_by_id);

  Velocities vel(m);
  Rng rng = stream_rng(cfg.seed, 0x747261696eULL);  // "train"

  double lr_scale = 1.0;
  double best_val_err = std::numeric_limits<double>::infinity();
  int evals_since_best = 0;
  int epoch_counter = 0;

  auto run_stage = [&](int stage, int epochs) {
    const bool mask_ghosts = stage == 2 && m.gv.num_ghosts > 0;
    const int set_size = stage == 2 ? 1 : cfg.set_size;
    const auto& by_id = stage == 2 ? stage2_by_id : train_by_id;

    std::vector<int> eligible;
    std::size_t total_examples = 0;
    for (int id = 0; id < num_identities; ++id) {
      if (static_cast<int>(by_id[id].size()) >= set_size) eligible.push_back(id);
      total_examples += by_id[id].size();
    }
    if (epochs > 0 && eligible.empty())
      throw InsufficientExamples("no identity has enough stage examples");

    const int sets_per_batch =
        std::min<int>(std::max(1, batch_images / set_size),
                      static_cast<int>(eligible.size()));
    const int batches_per_epoch = std::max<int>(
        1, static_cast<int>((total_examples + batch_images - 1) / batch_images));

    for (int ep = 0; ep < epochs; ++ep) {
      double epoch_loss = 0.0;
      for (int bi = 0; bi < batches_per_epoch; ++bi) {
        auto batch = sample_batch(by_id, eligible, sets_per_batch, set_size, rng);
        const int b = static_cast<int>(batch.size());

        // forward: pool every set, then the head over the whole batch
        Eigen::MatrixXd pooled(b, m.head.in_dim());
        std::vector<std::vector<Eigen::VectorXd>> set_inputs(b);
        std::vector<double> unit_weights(set_size, 1.0);
        for (int s = 0; s < b; ++s) {
          for (int idx : batch[s].second)
            set_inputs[s].push_back(records[idx].descriptor);
          pooled.row(s) =
              pool(set_inputs[s], unit_weights, m.gv, true, mask_ghosts)
                  .values.transpose();
        }

        HeadBatchCache cache;
        Eigen::MatrixXd out = head_train_forward(pooled, m.head, cache);

        double batch_loss = 0.0;
        Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(b, m.head.out_dim());
        Eigen::MatrixXd classifier_grad =
            Eigen::MatrixXd::Zero(m.classifier.rows(), m.classifier.cols());
        for (int s = 0; s < b; ++s) {
          OvaResult ova = ova_loss_and_grad(out.row(s).transpose(),
                                            batch[s].first, m.classifier,
                                            cfg.neg_classes);
          batch_loss += ova.loss;
          upstream.row(s) = ova.d_embedding.transpose();
          for (const auto& [row, g] : ova.d_classifier_rows)
            classifier_grad.row(row) += g.transpose();
        }
        const double inv_b = 1.0 / b;
        batch_loss *= inv_b;
        upstream *= inv_b;
        classifier_grad *= inv_b;
        epoch_loss += batch_loss;

        HeadGrads hg = head_backward(cache, m.head, upstream);

        // per-group learning rates
        const double lr_base = cfg.base_lr * lr_scale;
        const double lr_assign = cfg.assign_lr * lr_scale;
        const double lr_cls = cfg.classifier_lr * lr_scale;

        if (!cfg.freeze_aggregation) {
          Eigen::MatrixXd g_aw =
              Eigen::MatrixXd::Zero(m.gv.assign_w.rows(), m.gv.assign_w.cols());
          Eigen::VectorXd g_ab = Eigen::VectorXd::Zero(m.gv.assign_b.size());
          Eigen::MatrixXd g_c =
              Eigen::MatrixXd::Zero(m.gv.centers.rows(), m.gv.centers.cols());
          for (int s = 0; s < b; ++s) {
            PoolGrads pg =
                pool_backward(set_inputs[s], unit_weights, m.gv,
                              hg.pooled.row(s).transpose(), true, mask_ghosts);
            g_aw += pg.assign_w;
            g_ab += pg.assign_b;
            g_c += pg.centers;
          }
          g_aw *= inv_b;
          g_ab *= inv_b;
          g_c *= inv_b;

          if (mask_ghosts) {
            // ghost parameters stay untouched while masked
            g_aw.bottomRows(m.gv.num_ghosts).setZero();
            g_ab.tail(m.gv.num_ghosts).setZero();
            Eigen::MatrixXd ghost_w = m.gv.assign_w.bottomRows(m.gv.num_ghosts);
            Eigen::VectorXd ghost_b = m.gv.assign_b.tail(m.gv.num_ghosts);
            sgd_update(m.gv.assign_w, g_aw, vel.assign_w, lr_assign,
                       cfg.momentum, cfg.weight_decay);
            sgd_update(m.gv.assign_b, g_ab, vel.assign_b, lr_assign,
                       cfg.momentum, 0.0);
            m.gv.assign_w.bottomRows(m.gv.num_ghosts) = ghost_w;
            m.gv.assign_b.tail(m.gv.num_ghosts) = ghost_b;
            vel.assign_w.bottomRows(m.gv.num_ghosts).setZero();
            vel.assign_b.tail(m.gv.num_ghosts).setZero();
          } else {
            sgd_update(m.gv.assign_w, g_aw, vel.assign_w, lr_assign,
                       cfg.momentum, cfg.weight_decay);
            sgd_update(m.gv.assign_b, g_ab, vel.assign_b, lr_assign,
                       cfg.momentum, 0.0);
          }
          sgd_update(m.gv.centers, g_c, vel.centers, lr_base, cfg.momentum,
                     cfg.weight_decay);
        }

        sgd_update(m.head.proj, hg.proj, vel.proj, lr_base, cfg.momentum,
                   cfg.weight_decay);
        sgd_update(m.head.proj_bias, hg.proj_bias, vel.proj_bias, lr_base,
                   cfg.momentum, 0.0);
        sgd_update(m.head.bn_gamma, hg.bn_gamma, vel.bn_gamma, lr_base,
                   cfg.momentum, 0.0);
        sgd_update(m.head.bn_beta, hg.bn_beta, vel.bn_beta, lr_base,
                   cfg.momentum, 0.0);
        sgd_update(m.classifier, classifier_grad, vel.classifier, lr_cls,
                   cfg.momentum, cfg.weight_decay);
      }

      epoch_loss /= batches_per_epoch;
      double val_tar =
          vp.pairs.empty() ? 0.0 : validation_tar(vp, m, mask_ghosts);

      EpochLog log;
      log.epoch = epoch_counter++;
      log.stage = stage;
      log.lr = cfg.base_lr * lr_scale;
      log.train_loss = epoch_loss;
      log.val_tar_far2 = val_tar;
      result.log.push_back(log);

      // plateau-based decay on the validation error
      double val_err = 1.0 - val_tar;
      if (val_err < best_val_err) {
        best_val_err = val_err;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best >= cfg.plateau_patience) {
          lr_scale *= cfg.lr_drop_factor;
          evals_since_best = 0;
        }
      }
    }
  };

  run_stage(2, cfg.stage2_epochs);
  run_stage(3, cfg.stage3_epochs);
  return result;
}

}  // namespace gvlad
