#include "gvlad/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "gvlad/head.hpp"

namespace gvlad {

namespace {

double frac_at_or_above(const std::vector<double>& sorted_desc, double t) {
  // sorted descending; count of scores >= t
  auto it = std::upper_bound(sorted_desc.begin(), sorted_desc.end(), t,
                             [](double a, double b) { return a > b; });
  return static_cast<double>(it - sorted_desc.begin()) /
         static_cast<double>(sorted_desc.size());
}

const TemplateEntry& resolve(const EmbeddingStore& store, int id) {
  auto it = store.find(id);
  if (it == store.end())
    throw FormatError("pair references unknown template " + std::to_string(id));
  return it->second;
}

}  // namespace

double RocResult::tar_at_far(double far_target) const {
  // smallest impostor score whose FAR stays within the target
  double threshold = 0.0;
  bool found = false;
  for (auto it = impostor_scores.rbegin(); it != impostor_scores.rend(); ++it) {
    // ascending over impostor scores; FAR shrinks as the threshold grows
    double far = frac_at_or_above(impostor_scores, *it);
    if (far <= far_target) {
      threshold = *it;
      found = true;
      break;
    }
  }
  if (!found) return 0.0;
  return frac_at_or_above(genuine_scores, threshold);
}

RocResult verify(const std::vector<VerificationPair>& pairs,
                 const EmbeddingStore& store) {
  RocResult res;
  for (const auto& p : pairs) {
    double s = similarity(resolve(store, p.template_a).embedding,
                          resolve(store, p.template_b).embedding);
    (p.genuine ? res.genuine_scores : res.impostor_scores).push_back(s);
  }
  if (res.genuine_scores.empty()) throw NoGenuine("no genuine pairs");
  if (res.impostor_scores.empty()) throw NoImpostor("no impostor pairs");

  std::sort(res.genuine_scores.begin(), res.genuine_scores.end(), std::greater<>());
  std::sort(res.impostor_scores.begin(), res.impostor_scores.end(), std::greater<>());

  std::vector<double> thresholds;
  thresholds.reserve(res.genuine_scores.size() + res.impostor_scores.size());
  thresholds.insert(thresholds.end(), res.genuine_scores.begin(), res.genuine_scores.end());
  thresholds.insert(thresholds.end(), res.impostor_scores.begin(), res.impostor_scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  // descending threshold sweep gives ascending FAR and TAR
  for (double t : thresholds)
    res.curve.push_back({frac_at_or_above(res.impostor_scores, t),
                         frac_at_or_above(res.genuine_scores, t)});
  return res;
}

double IdentifyResult::tpir_at_fpir(double fpir_target) const {
  double best = 0.0;
  for (const auto& p : det)
    if (p.x <= fpir_target) best = std::max(best, p.y);
  return best;
}

double IdentifyResult::tpir_at_rank(int rank) const {
  for (const auto& p : cmc)
    if (static_cast<int>(p.x) == rank) return p.y;
  return rank >= static_cast<int>(cmc.size()) && !cmc.empty() ? cmc.back().y : 0.0;
}

IdentifyResult identify(const std::vector<TemplateEntry>& probes,
                        const std::vector<TemplateEntry>& gallery) {
  if (gallery.empty()) throw EmptyGallery("gallery is empty");
  if (probes.empty()) throw EmptyInput("no probes");

  struct ProbeOutcome {
    bool mated = false;
    double top_score = 0.0;
    bool top_is_mate = false;
    int mate_rank = 0;  // 1-based, mated probes only
  };
  std::vector<ProbeOutcome> outcomes;
  outcomes.reserve(probes.size());

  const int gsize = static_cast<int>(gallery.size());
  for (const auto& probe : probes) {
    std::vector<std::pair<double, int>> ranked;  // (score, gallery index)
    ranked.reserve(gsize);
    for (int gi = 0; gi < gsize; ++gi)
      ranked.push_back({similarity(probe.embedding, gallery[gi].embedding), gi});
    // descending score, ties by gallery index
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    ProbeOutcome oc;
    oc.top_score = ranked[0].first;
    for (int r = 0; r < gsize; ++r) {
      if (gallery[ranked[r].second].subject == probe.subject) {
        oc.mated = true;
        oc.mate_rank = r + 1;
        break;
      }
    }
    oc.top_is_mate = gallery[ranked[0].second].subject == probe.subject;
    outcomes.push_back(oc);
  }

  int n_mated = 0, n_nonmated = 0;
  for (const auto& oc : outcomes) (oc.mated ? n_mated : n_nonmated)++;
  if (n_mated == 0) throw NoGenuine("no mated probes");

  IdentifyResult res;

  // CMC over mated probes
  if (n_mated > 0) {
    std::vector<int> hits(gsize + 1, 0);
    for (const auto& oc : outcomes)
      if (oc.mated) ++hits[oc.mate_rank];
    int cum = 0;
    for (int r = 1; r <= gsize; ++r) {
      cum += hits[r];
      res.cmc.push_back({static_cast<double>(r),
                         static_cast<double>(cum) / n_mated});
    }
  }

  // DET sweep over all top scores
  std::vector<double> thresholds;
  for (const auto& oc : outcomes) thresholds.push_back(oc.top_score);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  for (double t : thresholds) {
    int fp = 0, tp = 0;
    for (const auto& oc : outcomes) {
      if (!oc.mated && oc.top_score >= t) ++fp;
      if (oc.mated && oc.top_is_mate && oc.top_score >= t) ++tp;
    }
    double fpir = n_nonmated > 0 ? static_cast<double>(fp) / n_nonmated : 0.0;
    double tpir = n_mated > 0 ? static_cast<double>(tp) / n_mated : 0.0;
    res.det.push_back({fpir, tpir});
  }
  std::sort(res.det.begin(), res.det.end(),
            [](const CurvePoint& a, const CurvePoint& b) {
              if (a.x != b.x) return a.x < b.x;
              return a.y < b.y;
            });
  return res;
}

std::vector<ContributionRow> contribution_report(
    const std::vector<Template>& templates, const Model& model,
    const std::vector<int>& template_ids) {
  std::vector<ContributionRow> rows;
  for (std::size_t ti = 0; ti < templates.size(); ++ti) {
    const Template& t = templates[ti];
    if (t.records.empty()) throw EmptyTemplate("template has no records");
    std::vector<double> weights = deployment_weights(t);

    std::vector<double> contrib(t.records.size());
    double max_c = 0.0;
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      contrib[i] = contribution(t.records[i].descriptor, weights[i], model.gv);
      max_c = std::max(max_c, contrib[i]);
    }
    int tid = template_ids.empty() ? static_cast<int>(ti)
                                   : template_ids.at(ti);
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      ContributionRow row;
      row.template_id = tid;
      row.example_index = static_cast<int>(i);
      row.quality_tag = t.records[i].quality_tag;
      row.relative_contribution = max_c > 0.0 ? contrib[i] / max_c : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace gvlad
