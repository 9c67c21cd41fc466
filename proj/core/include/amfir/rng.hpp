#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace amfir {

// Seeded random stream. Independent substreams are derived by hashing the
// parent key with a stream index, so callers that need reproducibility under
// concurrency each take their own substream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  Rng substream(std::uint64_t index) const;

  double normal();
  double uniform();
  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);

  std::uint64_t key() const { return key_; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Well-known stream indices so that training, evaluation and initialization
// draws never overlap for a given seed.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kTrain = 2;
inline constexpr std::uint64_t kEval = 3;
inline constexpr std::uint64_t kSplit = 4;
}  // namespace streams

}  // namespace amfir
