#include "taste/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "taste/genres.hpp"

namespace taste {

std::vector<LinkageMerge> average_linkage(const Matrix& dist) {
  const int n = dist.rows();
  if (n != dist.cols()) throw std::invalid_argument("average_linkage: matrix must be square");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double v = dist(i, j);
      if (std::isnan(v) || v < 0.0) throw std::invalid_argument("average_linkage: NaN or negative distance");
    }
  }

  // Working copy; cluster id = smallest member index, so a merge keeps the
  // lower id and retires the higher one.
  Matrix d = dist;
  std::vector<int> active;
  active.reserve(n);
  for (int i = 0; i < n; ++i) active.push_back(i);
  std::vector<int> size(n, 1);

  std::vector<LinkageMerge> merges;
  merges.reserve(n > 0 ? n - 1 : 0);
  while (active.size() > 1) {
    int best_a = -1, best_b = -1;
    double best = std::numeric_limits<double>::infinity();
    for (size_t ai = 0; ai + 1 < active.size(); ++ai) {
      int i = active[ai];
      for (size_t bi = ai + 1; bi < active.size(); ++bi) {
        int j = active[bi];
        double v = d(i, j);
        if (v < best) {
          best = v;
          best_a = i;
          best_b = j;
        }
        // Ties resolve to the smallest (i, j); the scan order guarantees it.
      }
    }
    merges.push_back({best_a, best_b, best});
    // Lance-Williams update for average linkage.
    double wa = static_cast<double>(size[best_a]);
    double wb = static_cast<double>(size[best_b]);
    for (int i : active) {
      if (i == best_a || i == best_b) continue;
      double v = (wa * d(i, best_a) + wb * d(i, best_b)) / (wa + wb);
      d(i, best_a) = v;
      d(best_a, i) = v;
    }
    size[best_a] += size[best_b];
    active.erase(std::find(active.begin(), active.end(), best_b));
  }
  return merges;
}

Matrix co_consumption(std::span<const std::vector<int64_t>> profiles, int k) {
  Matrix c(k, k, 0.0);
  std::vector<int> present;
  for (const auto& counts : profiles) {
    if (static_cast<int>(counts.size()) != k) throw std::invalid_argument("co_consumption: profile dimension mismatch");
    present.clear();
    for (int g = 0; g < k; ++g) {
      if (counts[g] > 0) present.push_back(g);
    }
    for (int gi : present) {
      for (int gj : present) c(gi, gj) += 1.0;
    }
  }
  return c;
}

Matrix genre_distances(const Matrix& co, int threads) {
  std::vector<int> constant_rows;
  Matrix d = correlation_distance_matrix(co, threads, &constant_rows);
  if (!constant_rows.empty()) {
    warn("genre_distances: " + std::to_string(constant_rows.size()) +
         " constant co-consumption row(s) mapped to distance 1.0");
  }
  return d;
}

GenreTree upgma(const Matrix& dist) {
  const int n = dist.rows();
  if (n < 1) throw std::invalid_argument("upgma: empty matrix");
  GenreTree tree;
  tree.nodes.reserve(2 * n - 1);
  for (int i = 0; i < n; ++i) {
    GenreTree::Node leaf;
    leaf.genre = i;
    tree.nodes.push_back(leaf);
  }
  if (n == 1) {
    tree.root = 0;
    return tree;
  }
  auto merges = average_linkage(dist);
  // Cluster id -> current tree node for that cluster.
  std::vector<int> cluster_node(n);
  std::iota(cluster_node.begin(), cluster_node.end(), 0);
  for (const auto& m : merges) {
    GenreTree::Node parent;
    parent.left = cluster_node[m.a];
    parent.right = cluster_node[m.b];
    parent.height = m.distance / 2.0;
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(parent);
    for (int child : {parent.left, parent.right}) {
      tree.nodes[child].parent = id;
      tree.nodes[child].branch_length = parent.height - tree.nodes[child].height;
    }
    cluster_node[m.a] = id;
  }
  tree.root = static_cast<int>(tree.nodes.size()) - 1;
  return tree;
}

double rao_stirling(std::span<const double> p, const Matrix& d) {
  const int k = d.rows();
  if (static_cast<int>(p.size()) != k) throw std::invalid_argument("rao_stirling: dimension mismatch");
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    if (p[i] == 0.0) continue;
    double row = 0.0;
    for (int j = 0; j < k; ++j) row += p[j] * d(i, j);
    total += p[i] * row;
  }
  return total;
}

double weighted_unifrac(std::span<const double> p, std::span<const double> q, const GenreTree& tree,
                        bool normalized) {
  const size_t node_count = tree.nodes.size();
  const int leaves = tree.leaf_count();
  if (static_cast<int>(p.size()) != leaves || static_cast<int>(q.size()) != leaves) {
    throw std::invalid_argument("weighted_unifrac: profile dimension must equal leaf count");
  }
  // Children precede parents in node order (construction invariant), so one
  // ascending pass accumulates subtree masses.
  std::vector<double> pm(node_count, 0.0), qm(node_count, 0.0);
  for (size_t i = 0; i < node_count; ++i) {
    const auto& node = tree.nodes[i];
    if (node.left < 0) {
      pm[i] = p[node.genre];
      qm[i] = q[node.genre];
    } else {
      pm[i] = pm[node.left] + pm[node.right];
      qm[i] = qm[node.left] + qm[node.right];
    }
    if (node.parent >= 0 && node.parent <= static_cast<int>(i)) {
      throw std::invalid_argument("weighted_unifrac: tree nodes must be child-before-parent");
    }
  }
  double sum = 0.0;
  for (size_t i = 0; i < node_count; ++i) {
    if (static_cast<int>(i) == tree.root) continue;
    sum += tree.nodes[i].branch_length * std::fabs(pm[i] - qm[i]);
  }
  if (!normalized) return sum;

  // Depth of each leaf from the root, weighted by combined mass.
  std::vector<double> depth(node_count, 0.0);
  double denom = 0.0;
  for (size_t i = node_count; i-- > 0;) {
    const auto& node = tree.nodes[i];
    if (node.parent >= 0) depth[i] = depth[node.parent] + node.branch_length;
    if (node.left < 0) denom += depth[i] * (p[node.genre] + q[node.genre]);
  }
  return denom > 0.0 ? sum / denom : 0.0;
}

double kl_divergence(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kl_divergence: dimension mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    if (b[i] == 0.0) throw std::domain_error("kl_divergence: infinite divergence (support mismatch)");
    sum += a[i] * std::log2(a[i] / b[i]);
  }
  return std::max(0.0, sum);
}

double jensen_shannon(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("jensen_shannon: dimension mismatch");
  std::vector<double> mid(a.size());
  for (size_t i = 0; i < a.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);
  return 0.5 * kl_divergence(a, mid) + 0.5 * kl_divergence(b, mid);
}

std::vector<RarefactionRow> rarefaction_curve(std::span<const int64_t> genre_counts,
                                              std::span<const int> depths, int reps, Rng rng,
                                              RarefactionMode mode, const Matrix* genre_distance) {
  if (reps <= 0) throw std::invalid_argument("rarefaction_curve: reps must be positive");
  if (mode == RarefactionMode::kRaoStirling && genre_distance == nullptr) {
    throw std::invalid_argument("rarefaction_curve: Rao-Stirling mode needs a distance matrix");
  }
  int64_t total = 0;
  for (int64_t c : genre_counts) {
    if (c < 0) throw std::invalid_argument("rarefaction_curve: negative count");
    total += c;
  }

  std::vector<int> usable;
  for (int d : depths) {
    if (d <= 0) continue;
    if (d > total) {
      warn("rarefaction_curve: depth " + std::to_string(d) + " exceeds total streams " +
           std::to_string(total) + ", skipped");
      continue;
    }
    usable.push_back(d);
  }
  std::sort(usable.begin(), usable.end());
  usable.erase(std::unique(usable.begin(), usable.end()), usable.end());
  if (usable.empty()) return {};

  // Stream multiset expanded to one genre id per stream.
  std::vector<int> items;
  items.reserve(static_cast<size_t>(total));
  for (size_t g = 0; g < genre_counts.size(); ++g) {
    for (int64_t c = 0; c < genre_counts[g]; ++c) items.push_back(static_cast<int>(g));
  }

  const int k = static_cast<int>(genre_counts.size());
  int max_depth = usable.back();
  std::vector<std::vector<double>> values(usable.size(), std::vector<double>(reps, 0.0));
  std::vector<int64_t> sub_counts(k);
  std::vector<uint8_t> seen(k);
  for (int rep = 0; rep < reps; ++rep) {
    // Partial Fisher-Yates: the first max_depth entries are a uniform draw
    // without replacement, and every prefix of the draw is one too.
    for (int i = 0; i < max_depth; ++i) {
      size_t j = i + rng.below(items.size() - i);
      std::swap(items[i], items[j]);
    }
    std::fill(sub_counts.begin(), sub_counts.end(), 0);
    std::fill(seen.begin(), seen.end(), 0);
    int distinct = 0;
    double rs_pair_sum = 0.0;  // sum_ij c_i c_j d(i,j), updated incrementally
    size_t next_checkpoint = 0;
    for (int i = 0; i < max_depth; ++i) {
      int g = items[i];
      if (!seen[g]) {
        seen[g] = 1;
        ++distinct;
      }
      if (mode == RarefactionMode::kRaoStirling) {
        double delta = 0.0;
        for (int h = 0; h < k; ++h) delta += static_cast<double>(sub_counts[h]) * (*genre_distance)(h, g);
        rs_pair_sum += 2.0 * delta;
        ++sub_counts[g];
      }
      while (next_checkpoint < usable.size() && usable[next_checkpoint] == i + 1) {
        if (mode == RarefactionMode::kDistinctGenres) {
          values[next_checkpoint][rep] = static_cast<double>(distinct);
        } else {
          double nn = static_cast<double>(i + 1);
          values[next_checkpoint][rep] = rs_pair_sum / (nn * nn);
        }
        ++next_checkpoint;
      }
    }
  }

  std::vector<RarefactionRow> rows;
  rows.reserve(usable.size());
  for (size_t di = 0; di < usable.size(); ++di) {
    RarefactionRow row;
    row.depth = usable[di];
    double m = 0.0;
    for (double v : values[di]) m += v;
    m /= reps;
    double ss = 0.0;
    for (double v : values[di]) ss += (v - m) * (v - m);
    row.mean = m;
    row.sd = reps > 1 ? std::sqrt(ss / (reps - 1)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace taste
