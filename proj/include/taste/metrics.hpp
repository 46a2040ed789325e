#pragma once

// Diversity and dissimilarity machinery: co-consumption distances, UPGMA,
// Rao-Stirling, weighted UniFrac, KL/Jensen-Shannon, rarefaction curves.
// All functions are pure and safe for concurrent invocation.

#include <span>
#include <vector>

#include "taste/model.hpp"
#include "taste/rng.hpp"
#include "taste/util.hpp"

namespace taste {

// One merge step of average-linkage clustering. Clusters are identified by
// the smallest member index; ties break on the smallest (a, b) pair.
struct LinkageMerge {
  int a = 0;           // surviving cluster id (a < b)
  int b = 0;           // absorbed cluster id
  double distance = 0; // inter-cluster average distance at merge time
};

// Full merge sequence (n - 1 entries) for a symmetric distance matrix.
std::vector<LinkageMerge> average_linkage(const Matrix& dist);

// C[i][j] = number of listeners whose profile has >= 1 stream in both genres.
Matrix co_consumption(std::span<const std::vector<int64_t>> profiles, int k);

// d(i, j) = correlation distance between rows i and j of C. Constant rows
// cannot support a correlation and fall back to distance 1, with a warning.
Matrix genre_distances(const Matrix& co, int threads = 1);

// Standard UPGMA: merge closest pair, new node at height d/2, size-weighted
// average distances. Throws on NaN or negative input.
GenreTree upgma(const Matrix& dist);

// Full double sum over ordered pairs: sum_ij p_i p_j d(i, j).
double rao_stirling(std::span<const double> p, const Matrix& d);

// Raw weighted UniFrac: sum over edges of branch_length * |P_e - Q_e| where
// P_e is the fraction of p's mass at leaves below the edge. The normalized
// variant divides by sum over leaves of root-distance * (p_leaf + q_leaf).
double weighted_unifrac(std::span<const double> p, std::span<const double> q, const GenreTree& tree,
                        bool normalized = false);

// Base-2 logs; 0 * log(0/x) = 0. Throws std::domain_error when a has mass
// where b has none.
double kl_divergence(std::span<const double> a, std::span<const double> b);

// (KL(a||c) + KL(b||c)) / 2 with c the midpoint; in [0, 1] with base-2 logs.
double jensen_shannon(std::span<const double> a, std::span<const double> b);

enum class RarefactionMode { kDistinctGenres, kRaoStirling };

struct RarefactionRow {
  int depth = 0;
  double mean = 0.0;
  double sd = 0.0;
};

// Subsample the stream multiset without replacement at each depth, averaged
// over `reps` draws. Each draw is one random permutation, so per-draw curves
// (and hence the means) are monotone in depth. Depths beyond the total number
// of streams are skipped with a warning.
std::vector<RarefactionRow> rarefaction_curve(std::span<const int64_t> genre_counts,
                                              std::span<const int> depths, int reps, Rng rng,
                                              RarefactionMode mode = RarefactionMode::kDistinctGenres,
                                              const Matrix* genre_distance = nullptr);

}  // namespace taste
