#pragma once

#include <Eigen/Dense>
#include <unordered_map>
#include <vector>

#include "gvlad/model.hpp"
#include "gvlad/types.hpp"

namespace gvlad {

// One stored template embedding.
struct TemplateEntry {
  int template_id = 0;
  int subject = 0;
  Eigen::VectorXd embedding;  // unit norm
};

using EmbeddingStore = std::unordered_map<int, TemplateEntry>;

struct VerificationPair {
  int template_a = 0;
  int template_b = 0;
  bool genuine = false;
};

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

// 1:1 verification. Threshold semantics are inclusive (score >= t) at every
// site; tar_at_far picks the smallest impostor-score threshold whose FAR does
// not exceed the target (no interpolation).
struct RocResult {
  std::vector<CurvePoint> curve;  // (FAR, TAR), FAR ascending
  std::vector<double> genuine_scores;
  std::vector<double> impostor_scores;
  double tar_at_far(double far_target) const;
};

RocResult verify(const std::vector<VerificationPair>& pairs,
                 const EmbeddingStore& store);

// 1:N open-set identification. A probe counts toward TPIR at threshold t only
// if its rank-1 match is its mate and the score is >= t; ranking ties break
// by gallery position.
struct IdentifyResult {
  std::vector<CurvePoint> det;  // (FPIR, TPIR), FPIR ascending
  std::vector<CurvePoint> cmc;  // (rank, TPIR), rank 1..gallery size
  double tpir_at_fpir(double fpir_target) const;
  double tpir_at_rank(int rank) const;
};

IdentifyResult identify(const std::vector<TemplateEntry>& probes,
                        const std::vector<TemplateEntry>& gallery);

// Per-example aggregation contributions, normalized by the template max.
struct ContributionRow {
  int template_id = 0;
  int example_index = 0;
  QualityTag quality_tag = QualityTag::Clean;
  double relative_contribution = 0.0;
};

std::vector<ContributionRow> contribution_report(
    const std::vector<Template>& templates, const Model& model,
    const std::vector<int>& template_ids = {});

}  // namespace gvlad
