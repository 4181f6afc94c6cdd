#include "gvlad/corpus.hpp"

namespace gvlad {

namespace {
// stream tags for the counter-based rng
constexpr std::uint64_t kMeanStream = 1;
constexpr std::uint64_t kJunkMeanStream = 2;
constexpr std::uint64_t kNoiseStream = 3;
constexpr std::uint64_t kDegradeStream = 4;
constexpr std::uint64_t kJunkNoiseStream = 5;

Eigen::VectorXd gaussian_vec(Rng& rng, int dim) {
  Eigen::VectorXd v(dim);
  for (int j = 0; j < dim; ++j) v[j] = rng.next_gaussian();
  return v;
}
}  // namespace

void SyntheticCorpusSpec::validate() const {
  if (identities < 2) throw InvalidSpec("identities must be >= 2");
  if (per_identity < 1) throw InvalidSpec("per_identity must be >= 1");
  if (dim < 1) throw InvalidSpec("dim must be >= 1");
  if (!(spread > 0.0)) throw InvalidSpec("spread must be > 0");
  if (degrade_prob < 0.0 || degrade_prob > 1.0)
    throw InvalidSpec("degrade_prob must be in [0, 1]");
  if (degrade_strength < 0.0 || degrade_strength > 1.0)
    throw InvalidSpec("degrade_strength must be in [0, 1]");
}

std::vector<ExampleRecord> generate_corpus(const SyntheticCorpusSpec& spec) {
  spec.validate();

  // one shared junk distribution per corpus
  Rng junk_rng = stream_rng(spec.seed, kJunkMeanStream);
  Eigen::VectorXd junk_mean = normalize(gaussian_vec(junk_rng, spec.dim));

  std::vector<ExampleRecord> out;
  out.reserve(static_cast<std::size_t>(spec.identities) * spec.per_identity);

  for (int t = 0; t < spec.identities; ++t) {
    Rng mean_rng = stream_rng(spec.seed, kMeanStream, static_cast<std::uint64_t>(t));
    Eigen::VectorXd mean = normalize(gaussian_vec(mean_rng, spec.dim));

    for (int e = 0; e < spec.per_identity; ++e) {
      Rng noise_rng = stream_rng(spec.seed, kNoiseStream,
                                 static_cast<std::uint64_t>(t),
                                 static_cast<std::uint64_t>(e));
      Eigen::VectorXd x =
          normalize(mean + spec.spread * gaussian_vec(noise_rng, spec.dim));

      ExampleRecord rec;
      rec.identity = static_cast<std::uint32_t>(t);
      rec.media_id = static_cast<std::uint32_t>(t * spec.per_identity + e);
      rec.source_kind = SourceKind::Still;
      rec.quality_tag = QualityTag::Clean;

      Rng degrade_rng = stream_rng(spec.seed, kDegradeStream,
                                   static_cast<std::uint64_t>(t),
                                   static_cast<std::uint64_t>(e));
      if (degrade_rng.next_unit() < spec.degrade_prob) {
        Rng jn_rng = stream_rng(spec.seed, kJunkNoiseStream,
                                static_cast<std::uint64_t>(t),
                                static_cast<std::uint64_t>(e));
        Eigen::VectorXd junk =
            junk_mean + spec.spread * gaussian_vec(jn_rng, spec.dim);
        double s = spec.degrade_strength;
        Eigen::VectorXd blended = (1.0 - s) * x + s * junk;
        x = normalize(blended);
        rec.quality_tag = QualityTag::Degraded;
      }

      rec.descriptor = std::move(x);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace gvlad
