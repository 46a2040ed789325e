#pragma once

// Deterministic RNG for the whole pipeline. One root seed per run; every
// subtask derives an independent substream by hashing (seed, task name), so
// results do not depend on scheduling or thread count.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace taste {

class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Substream keyed by task name; append numeric keys for per-item streams,
  // e.g. substream(seed, "synth.listener", i).
  static Rng substream(uint64_t seed, std::string_view task);
  static Rng substream(uint64_t seed, std::string_view task, uint64_t index);

  uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double next_double();
  // Uniform integer in [0, n), unbiased.
  uint64_t below(uint64_t n);

  double normal();
  // Marsaglia-Tsang; any shape > 0, unit scale.
  double gamma(double shape);
  int64_t poisson(double mean);
  // Trials until first success, >= 1.
  int64_t geometric(double p);

  std::vector<double> dirichlet(std::span<const double> alpha);
  // Symmetric Dirichlet(alpha) of dimension k.
  std::vector<double> dirichlet(double alpha, int k);

  // Index draw from unnormalized non-negative weights.
  int categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  // k distinct values from [0, n), in draw order.
  std::vector<int64_t> sample_indices(int64_t n, int64_t k);

 private:
  uint64_t s_[4];
  bool have_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace taste
