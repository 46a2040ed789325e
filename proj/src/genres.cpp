#include "taste/genres.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "taste/metrics.hpp"

namespace taste {

Matrix TransitionMatrix::probabilities() const {
  const int size = n();
  Matrix p(size, size, 0.0);
  for (int i = 0; i < size; ++i) {
    int64_t row_total = 0;
    for (int j = 0; j < size; ++j) row_total += count(i, j);
    if (row_total == 0) continue;
    for (int j = 0; j < size; ++j) p(i, j) = static_cast<double>(count(i, j)) / static_cast<double>(row_total);
  }
  return p;
}

std::vector<uint8_t> TransitionMatrix::zero_rows() const {
  const int size = n();
  std::vector<uint8_t> flags(size, 0);
  for (int i = 0; i < size; ++i) {
    int64_t row_total = 0;
    for (int j = 0; j < size; ++j) row_total += count(i, j);
    flags[i] = row_total == 0 ? 1 : 0;
  }
  return flags;
}

TransitionMatrix build_transitions(const EventTable& events, std::span<const std::string> eligible,
                                   const RunConfig& cfg) {
  // Eligible listener mask over interned ids.
  std::set<std::string_view> eligible_set(eligible.begin(), eligible.end());
  std::vector<uint8_t> keep(events.listener_ids.size(), 0);
  for (size_t l = 0; l < events.listener_ids.size(); ++l) {
    keep[l] = eligible_set.count(events.listener_ids[l]) ? 1 : 0;
  }

  // Total streams per artist over eligible listeners' events.
  std::vector<int64_t> artist_streams(events.artist_ids.size(), 0);
  for (const auto& row : events.rows) {
    if (keep[row.listener]) artist_streams[row.artist] += 1;
  }
  int distinct = 0;
  for (int64_t c : artist_streams) {
    if (c > 0) ++distinct;
  }
  if (cfg.top_n_artists > distinct) {
    throw std::invalid_argument("build_transitions: top_n_artists (" + std::to_string(cfg.top_n_artists) +
                                ") exceeds distinct artists (" + std::to_string(distinct) + ")");
  }

  // Top-N by stream count descending, ties by artist id ascending.
  std::vector<uint32_t> order;
  order.reserve(events.artist_ids.size());
  for (uint32_t a = 0; a < events.artist_ids.size(); ++a) {
    if (artist_streams[a] > 0) order.push_back(a);
  }
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    if (artist_streams[a] != artist_streams[b]) return artist_streams[a] > artist_streams[b];
    return events.artist_ids[a] < events.artist_ids[b];
  });
  order.resize(cfg.top_n_artists);

  TransitionMatrix tm;
  tm.include_self = cfg.include_self_transitions;
  tm.artist_ids.reserve(order.size());
  std::vector<int32_t> artist_slot(events.artist_ids.size(), -1);
  for (size_t slot = 0; slot < order.size(); ++slot) {
    artist_slot[order[slot]] = static_cast<int32_t>(slot);
    tm.artist_ids.push_back(events.artist_ids[order[slot]]);
  }
  const size_t n = order.size();
  tm.counts.assign(n * n, 0);

  // Per-listener event order: timestamp, then file order on exact ties.
  std::vector<uint32_t> idx;
  idx.reserve(events.rows.size());
  for (uint32_t i = 0; i < events.rows.size(); ++i) {
    if (keep[events.rows[i].listener]) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
    const auto& ra = events.rows[a];
    const auto& rb = events.rows[b];
    return std::tie(ra.listener, ra.timestamp, ra.file_index) < std::tie(rb.listener, rb.timestamp, rb.file_index);
  });

  const int64_t gap_limit = static_cast<int64_t>(cfg.session_gap_minutes) * 60;
  for (size_t i = 1; i < idx.size(); ++i) {
    const auto& prev = events.rows[idx[i - 1]];
    const auto& cur = events.rows[idx[i]];
    if (prev.listener != cur.listener) continue;
    if (cur.timestamp - prev.timestamp > gap_limit) continue;
    int32_t from = artist_slot[prev.artist];
    int32_t to = artist_slot[cur.artist];
    if (from < 0 || to < 0) continue;
    if (from == to && !tm.include_self) continue;
    tm.counts[static_cast<size_t>(from) * n + to] += 1;
  }
  return tm;
}

double correlation_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("correlation_distance: length mismatch");
  if (u.size() < 2) throw std::invalid_argument("correlation_distance: need length >= 2");
  double mu = 0.0, mv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    mv += v[i];
  }
  mu /= static_cast<double>(u.size());
  mv /= static_cast<double>(v.size());
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    double du = u[i] - mu;
    double dv = v[i] - mv;
    suv += du * dv;
    suu += du * du;
    svv += dv * dv;
  }
  if (suu <= 0.0 || svv <= 0.0) throw ConstantVectorError("correlation_distance: constant vector");
  double r = suv / std::sqrt(suu * svv);
  r = std::clamp(r, -1.0, 1.0);
  return 1.0 - r;
}

Matrix correlation_distance_matrix(const Matrix& rows, int threads, std::vector<int>* constant_rows) {
  const int n = rows.rows();
  const int dim = rows.cols();
  // Center and normalize once; D is then 1 minus pairwise dot products.
  Matrix centered(n, dim, 0.0);
  std::vector<uint8_t> constant(n, 0);
  for (int i = 0; i < n; ++i) {
    auto src = rows.row(i);
    double m = 0.0;
    for (double v : src) m += v;
    m /= dim;
    double ss = 0.0;
    auto dst = centered.row(i);
    for (int j = 0; j < dim; ++j) {
      dst[j] = src[j] - m;
      ss += dst[j] * dst[j];
    }
    if (ss <= 0.0) {
      constant[i] = 1;
    } else {
      double inv = 1.0 / std::sqrt(ss);
      for (int j = 0; j < dim; ++j) dst[j] *= inv;
    }
  }
  if (constant_rows) {
    constant_rows->clear();
    for (int i = 0; i < n; ++i) {
      if (constant[i]) constant_rows->push_back(i);
    }
  }

  Matrix d(n, n, 0.0);
  parallel_for(n, threads, [&](int64_t i) {
    auto ri = centered.row(static_cast<int>(i));
    for (int j = static_cast<int>(i) + 1; j < n; ++j) {
      double value;
      if (constant[i] || constant[j]) {
        value = 1.0;  // neutral fallback for rows with no variation
      } else {
        auto rj = centered.row(j);
        double dot = 0.0;
        for (int t = 0; t < dim; ++t) dot += ri[t] * rj[t];
        value = 1.0 - std::clamp(dot, -1.0, 1.0);
      }
      d(static_cast<int>(i), j) = value;
    }
  });
  // Mirror after the parallel fill so writes stay disjoint.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) d(j, i) = d(i, j);
  }
  return d;
}

std::vector<int> cluster_agglomerative(const Matrix& dist, int k) {
  const int n = dist.rows();
  if (k < 2 || k > n) throw std::invalid_argument("cluster_agglomerative: need 2 <= k <= n");
  auto merges = average_linkage(dist);
  // Apply the first n - k merges; label clusters by smallest member index.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
  for (int m = 0; m < n - k; ++m) {
    parent[find(merges[m].b)] = find(merges[m].a);
  }
  std::map<int, int> relabel;
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    int root = find(i);
    labels[i] = relabel.try_emplace(root, static_cast<int>(relabel.size())).first->second;
  }
  return labels;
}

std::vector<int> cluster_kmeans(const Matrix& rows, int k, Rng& rng) {
  const int n = rows.rows();
  const int dim = rows.cols();
  if (k < 1 || k > n) throw std::invalid_argument("cluster_kmeans: need 1 <= k <= n");

  auto sqdist = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (int t = 0; t < dim; ++t) {
      double d = a[t] - b[t];
      s += d * d;
    }
    return s;
  };

  // k-means++ seeding.
  Matrix centroids(k, dim, 0.0);
  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
  int first = static_cast<int>(rng.below(n));
  std::copy_n(rows.row(first).begin(), dim, centroids.row(0).begin());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      min_sq[i] = std::min(min_sq[i], sqdist(rows.row(i), centroids.row(c - 1)));
      total += min_sq[i];
    }
    int chosen;
    if (total <= 0.0) {
      chosen = static_cast<int>(rng.below(n));  // all points duplicated
    } else {
      double u = rng.next_double() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += min_sq[i];
        if (u < acc) {
          chosen = i;
          break;
        }
      }
    }
    std::copy_n(rows.row(chosen).begin(), dim, centroids.row(c).begin());
  }

  std::vector<int> assign(n, 0);
  std::vector<int64_t> cluster_size(k, 0);
  Matrix next(k, dim, 0.0);
  const int kMaxIterations = 300;
  const double kTolerance = 1e-6;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (int c = 0; c < k; ++c) {
        double d = sqdist(rows.row(i), centroids.row(c));
        if (d < best) {  // ties keep the lowest centroid index
          best = d;
          best_c = c;
        }
      }
      assign[i] = best_c;
    }
    std::fill(cluster_size.begin(), cluster_size.end(), 0);
    for (int i = 0; i < n; ++i) ++cluster_size[assign[i]];
    for (int c = 0; c < k; ++c) std::fill(next.row(c).begin(), next.row(c).end(), 0.0);
    for (int i = 0; i < n; ++i) {
      auto dst = next.row(assign[i]);
      auto src = rows.row(i);
      for (int t = 0; t < dim; ++t) dst[t] += src[t];
    }
    for (int c = 0; c < k; ++c) {
      if (cluster_size[c] == 0) {
        // Re-seed an emptied cluster at the point farthest from its current
        // centroid; ties resolve to the lowest point index.
        double far_d = -1.0;
        int far_i = 0;
        for (int i = 0; i < n; ++i) {
          double d = sqdist(rows.row(i), centroids.row(assign[i]));
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        std::copy_n(rows.row(far_i).begin(), dim, next.row(c).begin());
        cluster_size[c] = 1;
        // The donor keeps its assignment until the next sweep.
      } else {
        auto dst = next.row(c);
        for (int t = 0; t < dim; ++t) dst[t] /= static_cast<double>(cluster_size[c]);
      }
    }
    double movement = 0.0;
    for (int c = 0; c < k; ++c) movement = std::max(movement, sqdist(centroids.row(c), next.row(c)));
    centroids = next;
    if (std::sqrt(movement) < kTolerance) break;
  }

  // Final assignment against the converged centroids.
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (int c = 0; c < k; ++c) {
      double d = sqdist(rows.row(i), centroids.row(c));
      if (d < best) {
        best = d;
        best_c = c;
      }
    }
    assign[i] = best_c;
  }
  return assign;
}

namespace {

// Contingency table between two label vectors over the same items.
struct Contingency {
  std::vector<int64_t> a_sizes;
  std::vector<int64_t> b_sizes;
  std::map<std::pair<int, int>, int64_t> cells;
  int64_t n = 0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("partition length mismatch");
  std::map<int, int> amap, bmap;
  for (int v : a) amap.try_emplace(v, static_cast<int>(amap.size()));
  for (int v : b) bmap.try_emplace(v, static_cast<int>(bmap.size()));
  Contingency c;
  c.a_sizes.assign(amap.size(), 0);
  c.b_sizes.assign(bmap.size(), 0);
  c.n = static_cast<int64_t>(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    int ai = amap[a[i]];
    int bi = bmap[b[i]];
    ++c.a_sizes[ai];
    ++c.b_sizes[bi];
    ++c.cells[{ai, bi}];
  }
  return c;
}

double entropy(std::span<const int64_t> sizes, int64_t n) {
  double h = 0.0;
  for (int64_t s : sizes) {
    if (s > 0) {
      double p = static_cast<double>(s) / static_cast<double>(n);
      h -= p * std::log(p);
    }
  }
  return h;
}

double mutual_information(const Contingency& c) {
  double mi = 0.0;
  double n = static_cast<double>(c.n);
  for (const auto& [key, count] : c.cells) {
    double pij = static_cast<double>(count) / n;
    double pa = static_cast<double>(c.a_sizes[key.first]) / n;
    double pb = static_cast<double>(c.b_sizes[key.second]) / n;
    mi += pij * std::log(pij / (pa * pb));
  }
  return std::max(0.0, mi);
}

// E[MI] under the permutation (hypergeometric) model, natural logs.
double expected_mutual_information(const Contingency& c) {
  const int64_t n = c.n;
  std::vector<double> log_fact(static_cast<size_t>(n) + 1, 0.0);
  for (int64_t i = 2; i <= n; ++i) log_fact[i] = log_fact[i - 1] + std::log(static_cast<double>(i));
  double emi = 0.0;
  for (int64_t ai : c.a_sizes) {
    for (int64_t bj : c.b_sizes) {
      int64_t lo = std::max<int64_t>(1, ai + bj - n);
      int64_t hi = std::min(ai, bj);
      for (int64_t nij = lo; nij <= hi; ++nij) {
        double term = static_cast<double>(nij) / n *
                      std::log(static_cast<double>(n) * nij / (static_cast<double>(ai) * bj));
        double log_prob = log_fact[ai] + log_fact[bj] + log_fact[n - ai] + log_fact[n - bj] - log_fact[n] -
                          log_fact[nij] - log_fact[ai - nij] - log_fact[bj - nij] - log_fact[n - ai - bj + nij];
        emi += term * std::exp(log_prob);
      }
    }
  }
  return emi;
}

bool same_partition(std::span<const int> a, std::span<const int> b) {
  std::map<int, int> fwd, rev;
  for (size_t i = 0; i < a.size(); ++i) {
    auto f = fwd.try_emplace(a[i], b[i]);
    if (!f.second && f.first->second != b[i]) return false;
    auto r = rev.try_emplace(b[i], a[i]);
    if (!r.second && r.first->second != a[i]) return false;
  }
  return true;
}

}  // namespace

double adjusted_mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_mutual_information: length mismatch");
  if (a.empty()) throw std::invalid_argument("adjusted_mutual_information: empty partitions");
  if (same_partition(a, b)) return 1.0;
  Contingency c = contingency(a, b);
  double mi = mutual_information(c);
  double emi = expected_mutual_information(c);
  double ha = entropy(c.a_sizes, c.n);
  double hb = entropy(c.b_sizes, c.n);
  double denom = 0.5 * (ha + hb) - emi;
  if (std::fabs(denom) < 1e-12) return 0.0;
  return (mi - emi) / denom;
}

double completeness(std::span<const int> classes, std::span<const int> clusters) {
  if (classes.size() != clusters.size()) throw std::invalid_argument("completeness: length mismatch");
  std::vector<int> cls, clu;
  for (size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] < 0) continue;  // unlabeled
    cls.push_back(classes[i]);
    clu.push_back(clusters[i]);
  }
  if (cls.empty()) throw std::invalid_argument("completeness: no labeled items");
  Contingency c = contingency(cls, clu);
  double h_clusters = entropy(c.b_sizes, c.n);
  if (h_clusters <= 0.0) return 1.0;
  // H(clusters | classes)
  double h_cond = 0.0;
  double n = static_cast<double>(c.n);
  for (const auto& [key, count] : c.cells) {
    double pij = static_cast<double>(count) / n;
    double pa = static_cast<double>(c.a_sizes[key.first]) / n;
    h_cond -= pij * std::log(pij / pa);
  }
  return 1.0 - h_cond / h_clusters;
}

std::vector<SweepRow> sweep_cluster_counts(const Matrix& dist, std::span<const int> ref_labels,
                                           std::span<const int> ks, uint64_t seed) {
  const int n = dist.rows();
  if (static_cast<int>(ref_labels.size()) != n) {
    throw std::invalid_argument("sweep_cluster_counts: label length mismatch");
  }
  std::vector<int> labeled_idx;
  for (int i = 0; i < n; ++i) {
    if (ref_labels[i] >= 0) labeled_idx.push_back(i);
  }
  if (labeled_idx.size() < 2) throw std::invalid_argument("sweep_cluster_counts: fewer than 2 labeled items");

  std::vector<SweepRow> rows;
  for (int k : ks) {
    for (const char* method : {"agglomerative", "kmeans"}) {
      std::vector<int> partition;
      if (std::string_view(method) == "agglomerative") {
        partition = cluster_agglomerative(dist, k);
      } else {
        Rng rng = Rng::substream(seed, "sweep.kmeans", static_cast<uint64_t>(k));
        partition = cluster_kmeans(dist, k, rng);
      }
      std::vector<int> ref_sub, part_sub;
      ref_sub.reserve(labeled_idx.size());
      part_sub.reserve(labeled_idx.size());
      for (int i : labeled_idx) {
        ref_sub.push_back(ref_labels[i]);
        part_sub.push_back(partition[i]);
      }
      SweepRow row;
      row.k = k;
      row.method = method;
      row.ami = adjusted_mutual_information(ref_sub, part_sub);
      row.completeness = completeness(ref_sub, part_sub);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<std::string> label_genres(std::span<const int> partition, int k,
                                      std::span<const std::optional<std::string>> tags) {
  if (partition.size() != tags.size()) throw std::invalid_argument("label_genres: length mismatch");
  // Plurality tag per cluster; lexicographically smallest wins ties.
  std::vector<std::map<std::string, int64_t>> tallies(static_cast<size_t>(k));
  for (size_t i = 0; i < partition.size(); ++i) {
    int c = partition[i];
    if (c < 0 || c >= k) throw std::invalid_argument("label_genres: cluster index out of range");
    if (tags[i]) tallies[c][*tags[i]] += 1;
  }
  std::vector<std::string> labels(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c) {
    std::string best = "UNKNOWN";
    int64_t best_count = 0;
    for (const auto& [tag, count] : tallies[c]) {
      if (count > best_count) {  // map order makes ties lexicographic
        best = tag;
        best_count = count;
      }
    }
    labels[c] = best;
  }
  // Number duplicates in cluster order: "rock", "rock 2", "rock 3".
  std::map<std::string, int> seen;
  for (auto& label : labels) {
    int times = ++seen[label];
    if (times > 1) label += " " + std::to_string(times);
  }
  return labels;
}

}  // namespace taste
