#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

#include "fedmoe/core_types.hpp"

namespace fedmoe {

// What a random stream is used for. Each (seed, agent, purpose) triple names an
// independent stream so that, e.g., Monte-Carlo moment sampling never shifts the
// path-generating noise.
enum class StreamPurpose : std::uint64_t {
  kParameters = 1,   // A^i, b^i, B^i drawn once at construction
  kPath = 2,         // per-step encoder noise W_t
  kMonteCarlo = 3,   // expectation sampling inside synchronisation
  kDataset = 4,      // synthetic generators
  kFeatureMap = 5,   // deterministic feature-map construction
};

// SplitMix64 finaliser folded over the keys.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> keys);

// Counter-based generator: the whole state is one 64-bit word, so a fresh
// substream per (t, agent, sample) is free to create.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

 private:
  std::uint64_t state_;
};

using PathRng = std::mt19937_64;

PathRng make_stream(std::uint64_t master_seed, std::uint64_t agent, StreamPurpose purpose);

template <typename Rng>
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  }
  return m;
}

}  // namespace fedmoe
