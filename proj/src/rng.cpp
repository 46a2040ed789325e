#include "taste/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "taste/util.hpp"

namespace taste {

namespace {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
  uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

Rng Rng::substream(uint64_t seed, std::string_view task) {
  return Rng(fnv1a64(task) ^ (seed * 0x9e3779b97f4a7c15ull));
}

Rng Rng::substream(uint64_t seed, std::string_view task, uint64_t index) {
  uint64_t h = fnv1a64(task) ^ (seed * 0x9e3779b97f4a7c15ull);
  uint64_t sm = h + index * 0xbf58476d1ce4e5b9ull;
  return Rng(splitmix64(sm));
}

uint64_t Rng::next_u64() {
  // xoshiro256++
  uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  // Rejection sampling over the largest multiple of n.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  if (have_spare_normal_) {
    have_spare_normal_ = false;
    return spare_normal_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * m;
  have_spare_normal_ = true;
  return u * m;
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("Rng::gamma: shape must be > 0");
  if (shape < 1.0) {
    // Boost via Gamma(shape + 1) and a power of a uniform.
    double u = next_double();
    while (u == 0.0) u = next_double();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = next_double();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0)) throw std::invalid_argument("Rng::poisson: mean must be >= 0");
  // Poisson(a + b) = Poisson(a) + Poisson(b); split large means into chunks
  // small enough for the multiplication method.
  int64_t total = 0;
  while (mean > 16.0) {
    double half = mean * 0.5;
    // Gamma-Poisson reduction: draw the waiting time of the floor(half)-th
    // event; if it exceeds the budget, recurse on the conditional remainder.
    int64_t m = static_cast<int64_t>(std::floor(half));
    double g = gamma(static_cast<double>(m));
    if (g > mean) {
      // Fewer than m events in "mean" time: binomial thinning via betas.
      double remaining = mean / g;
      int64_t count = 0;
      for (int64_t i = 0; i < m - 1; ++i) {
        // Order statistics of m-1 uniforms against the cut point.
        if (next_double() < remaining) ++count;
      }
      return total + count;
    }
    total += m;
    mean -= g;
  }
  double limit = std::exp(-mean);
  double prod = next_double();
  int64_t k = 0;
  while (prod > limit) {
    prod *= next_double();
    ++k;
  }
  return total + k;
}

int64_t Rng::geometric(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("Rng::geometric: p in (0,1]");
  if (p == 1.0) return 1;
  double u = next_double();
  while (u == 0.0) u = next_double();
  return 1 + static_cast<int64_t>(std::floor(std::log(u) / std::log1p(-p)));
}

std::vector<double> Rng::dirichlet(std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  double sum = 0.0;
  for (size_t i = 0; i < alpha.size(); ++i) {
    out[i] = gamma(alpha[i]);
    sum += out[i];
  }
  if (sum <= 0.0) {
    // All gammas underflowed; fall back to a point mass on a uniform index.
    out.assign(alpha.size(), 0.0);
    out[below(alpha.size())] = 1.0;
    return out;
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> Rng::dirichlet(double alpha, int k) {
  std::vector<double> a(static_cast<size_t>(k), alpha);
  return dirichlet(a);
}

int Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("Rng::categorical: weights sum to 0");
  double u = next_double() * total;
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<int64_t> Rng::sample_indices(int64_t n, int64_t k) {
  if (k > n) throw std::invalid_argument("Rng::sample_indices: k > n");
  // Floyd's algorithm; order of first appearance is the draw order.
  std::vector<int64_t> out;
  out.reserve(static_cast<size_t>(k));
  std::unordered_map<int64_t, bool> seen;
  for (int64_t j = n - k; j < n; ++j) {
    int64_t t = static_cast<int64_t>(below(static_cast<uint64_t>(j) + 1));
    if (seen.count(t)) t = j;
    seen[t] = true;
    out.push_back(t);
  }
  return out;
}

}  // namespace taste
