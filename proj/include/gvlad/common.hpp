#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvlad {

struct ZeroVector : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidSpec : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyTemplate : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooFewPoints : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TooFewSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientExamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadLabel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoGenuine : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoImpostor : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyGallery : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; bijective on u64
std::uint64_t mix64(std::uint64_t x);

// Small deterministic generator. Streams are derived by hashing a seed with
// counter values, so independent streams can be opened in any order and the
// output never depends on call interleaving or thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // uniform in [0, 1)
  double next_unit();
  // uniform integer in [0, n)
  std::uint64_t next_below(std::uint64_t n);
  // standard normal via Box-Muller
  double next_gaussian();

  // deterministic Fisher-Yates over [0, n)
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Opens the stream identified by (seed, a, b, c).
Rng stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
               std::uint64_t c = 0);

}  // namespace gvlad
