#pragma once

#include <cstdint>
#include <vector>

#include "gvlad/types.hpp"

namespace gvlad {

// Synthetic labeled-descriptor corpus. Identities are unit mean directions on
// the sphere; examples are noisy copies, optionally blended towards a single
// shared "junk" distribution to model quality degradation in descriptor space.
struct SyntheticCorpusSpec {
  int identities = 30;       // T
  int per_identity = 60;     // examples per identity
  int dim = 256;             // D_F
  double spread = 0.15;      // within-identity noise scale
  double degrade_prob = 0.2;
  double degrade_strength = 0.8;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidSpec
};

// Deterministic given the SyntheticCorpusSpec: every random draw comes from
// a counter-derived stream, so the output is independent of generation order.
std::vector<ExampleRecord> generate_corpus(const SyntheticCorpusSpec& spec);

}  // namespace gvlad
