#pragma once

// Data-derived genre taxonomy: transition matrix over top artists,
// correlation distances, clustering, cluster-count diagnostics, labeling.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taste/ingest.hpp"
#include "taste/model.hpp"
#include "taste/rng.hpp"
#include "taste/util.hpp"

namespace taste {

// A vector without variation cannot support a correlation.
struct ConstantVectorError : std::domain_error {
  using std::domain_error::domain_error;
};

struct TransitionMatrix {
  // Top-N artists by total stream count, descending, ties by artist id.
  std::vector<std::string> artist_ids;
  std::vector<int64_t> counts;  // N x N, row-major; counts[i*N+j] = i -> j
  bool include_self = false;

  int n() const { return static_cast<int>(artist_ids.size()); }
  int64_t count(int i, int j) const { return counts[static_cast<size_t>(i) * artist_ids.size() + j]; }

  // Row-normalized transition probabilities; zero rows stay all-zero.
  Matrix probabilities() const;
  std::vector<uint8_t> zero_rows() const;
};

// Count successions: same listener, adjacent events, gap <= session gap.
// Throws std::invalid_argument when top_n_artists exceeds the number of
// distinct artists among eligible listeners' events.
TransitionMatrix build_transitions(const EventTable& events, std::span<const std::string> eligible,
                                   const RunConfig& cfg);

// 1 - Pearson correlation; throws ConstantVectorError on a constant input.
double correlation_distance(std::span<const double> u, std::span<const double> v);

// Pairwise correlation distances between rows. Constant rows get distance 1
// to every other row and are reported through constant_rows when provided.
Matrix correlation_distance_matrix(const Matrix& rows, int threads = 1,
                                   std::vector<int>* constant_rows = nullptr);

// Average-linkage agglomerative clustering cut to exactly k clusters.
// Labels are 0..k-1 in order of each cluster's smallest member index.
std::vector<int> cluster_agglomerative(const Matrix& dist, int k);

// Lloyd iterations with k-means++ seeding; max 300 iterations, centroid
// movement tolerance 1e-6. An emptied cluster is re-seeded at the point
// farthest from its centroid assignment.
std::vector<int> cluster_kmeans(const Matrix& rows, int k, Rng& rng);

// AMI under the permutation model: (MI - E[MI]) / (mean(H(a), H(b)) - E[MI]).
// Identical partitions give 1; a degenerate denominator gives 0.
double adjusted_mutual_information(std::span<const int> a, std::span<const int> b);

// 1 - H(clusters|classes) / H(clusters); 1 when H(clusters) = 0. Items with
// class -1 are treated as unlabeled and excluded.
double completeness(std::span<const int> classes, std::span<const int> clusters);

struct SweepRow {
  int k = 0;
  std::string method;
  double ami = 0.0;
  double completeness = 0.0;
};

// Cluster-count diagnostics against reference labels (-1 = unlabeled), for
// agglomerative and k-means. Throws when fewer than 2 items are labeled.
std::vector<SweepRow> sweep_cluster_counts(const Matrix& dist, std::span<const int> ref_labels,
                                           std::span<const int> ks, uint64_t seed);

// Plurality tag per cluster ("UNKNOWN" when untagged); duplicate labels get
// an ordinal suffix in cluster order: "rock", "rock 2".
std::vector<std::string> label_genres(std::span<const int> partition, int k,
                                      std::span<const std::optional<std::string>> tags);

}  // namespace taste
