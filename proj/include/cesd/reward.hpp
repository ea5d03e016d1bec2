#pragma once

// Intrinsic rewards: k-nearest-neighbour novelty inside prototype clusters,
// the per-skill constraint reward for cluster mismatch, and their mix.

#include "cesd/env.hpp"
#include "cesd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesd {

struct Transition {
  Point s;
  Point a;
  Point s_next;
  int z_pe = 0;    // skill that collected the transition
  int z_clu = -1;  // cluster label, assigned when the transition is sampled
  double r_ext = 0.0;
};

struct RewardedBatch {
  std::vector<Transition> transitions;
  std::vector<double> r_cesd;
  std::vector<double> r_reg;
  std::vector<double> r_total;
};

inline constexpr double kEntropyFloor = 1e-6;

/// Distance from `query` to its k-th nearest row of `refs` (1-based k),
/// skipping row `skip` (pass -1 to keep all rows).
inline double kth_neighbor_distance(const Mat& refs, const Eigen::Ref<const RowVec>& query, int k, Eigen::Index skip = -1) {
  const Eigen::Index n = refs.rows();
  const Eigen::Index available = n - (skip >= 0 && skip < n ? 1 : 0);
  if (k < 1 || k > available)
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the " + std::to_string(available) + " available neighbours");
  // Column-outer accumulation keeps each row's sum in column order.
  thread_local std::vector<double> d2;
  d2.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index c = 0; c < refs.cols(); ++c) {
    const double q = query(c);
    const double* col = refs.col(c).data();
    for (Eigen::Index r = 0; r < n; ++r) {
      const double d = col[r] - q;
      d2[static_cast<std::size_t>(r)] += d * d;
    }
  }
  if (available < n) {
    d2[static_cast<std::size_t>(skip)] = d2.back();
    d2.pop_back();
  }
  // Max-heap of the k smallest squared distances.
  const auto kk = static_cast<std::ptrdiff_t>(k);
  std::make_heap(d2.begin(), d2.begin() + kk);
  for (auto it = d2.begin() + kk; it != d2.end(); ++it)
    if (*it < d2.front()) {
      std::pop_heap(d2.begin(), d2.begin() + kk);
      d2[static_cast<std::size_t>(k - 1)] = *it;
      std::push_heap(d2.begin(), d2.begin() + kk);
    }
  return std::sqrt(d2.front());
}

/// Euclidean distance from row `index` to its k-th nearest other row.
inline double knn_distance(const Mat& features, Eigen::Index index, int k) {
  const Eigen::Index n = features.rows();
  if (index < 0 || index >= n) throw std::out_of_range("knn_distance: index out of range");
  if (k < 1 || k >= n)
    throw std::invalid_argument("knn_distance: need 1 <= k <= N-1 (k=" + std::to_string(k) + ", N=" + std::to_string(n) + ")");
  return kth_neighbor_distance(features, features.row(index), k, index);
}

namespace detail {

inline std::vector<std::vector<Eigen::Index>> group_rows(const std::vector<int>& labels) {
  int n = 0;
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("cluster labels must be non-negative");
    n = std::max(n, l + 1);
  }
  std::vector<std::vector<Eigen::Index>> groups(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < labels.size(); ++i) groups[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  return groups;
}

inline Mat gather_rows(const Mat& m, const std::vector<Eigen::Index>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace detail

/// Per-row novelty computed only among rows sharing its cluster label, with
/// k clipped to cluster size - 1. Singleton clusters score 0.
inline std::vector<double> cluster_entropy_rewards(const Mat& features, const std::vector<int>& labels, int k) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw std::invalid_argument("cluster_entropy_rewards: label count does not match feature rows");
  if (k < 1) throw std::invalid_argument("cluster_entropy_rewards: k must be >= 1");
  std::vector<double> out(labels.size(), 0.0);
  for (const auto& rows : detail::group_rows(labels)) {
    if (rows.size() < 2) continue;
    const Mat sub = detail::gather_rows(features, rows);
    const int k_eff = std::min<int>(k, static_cast<int>(rows.size()) - 1);
    for (std::size_t i = 0; i < rows.size(); ++i)
      out[static_cast<std::size_t>(rows[i])] = knn_distance(sub, static_cast<Eigen::Index>(i), k_eff);
  }
  return out;
}

/// Novelty of query points against per-cluster reference sets. Each query is
/// scored against the references carrying its own label; `self_index[i]`
/// names a reference row to exclude (the query itself) or -1.
inline std::vector<double> cluster_query_rewards(const Mat& refs, const std::vector<int>& ref_labels, const Mat& queries,
                                                 const std::vector<int>& query_labels,
                                                 const std::vector<Eigen::Index>& self_index, int k) {
  const auto groups = detail::group_rows(ref_labels);
  std::vector<Mat> subsets(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) subsets[g] = detail::gather_rows(refs, groups[g]);

  std::vector<double> out(query_labels.size(), 0.0);
  for (std::size_t i = 0; i < query_labels.size(); ++i) {
    const auto g = static_cast<std::size_t>(query_labels[i]);
    if (g >= groups.size()) continue;
    const auto& rows = groups[g];
    Eigen::Index skip = -1;
    if (self_index[i] >= 0) {
      const auto it = std::find(rows.begin(), rows.end(), self_index[i]);
      if (it != rows.end()) skip = static_cast<Eigen::Index>(it - rows.begin());
    }
    const int available = static_cast<int>(rows.size()) - (skip >= 0 ? 1 : 0);
    if (available < 1) continue;
    out[i] = kth_neighbor_distance(subsets[g], queries.row(static_cast<Eigen::Index>(i)), std::min(k, available), skip);
  }
  return out;
}

/// Unnormalised particle entropy: sum_t ln(eps + distance to k-th neighbour).
inline double particle_entropy(const Mat& features, int k) {
  if (features.rows() < 2) throw std::invalid_argument("particle_entropy: need at least two points");
  double h = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) h += std::log(kEntropyFloor + knn_distance(features, i, k));
  return h;
}

/// r_reg[i] = 1 / (c_i + lambda) where c_i counts transitions collected by
/// skill i but clustered elsewhere.
inline std::vector<double> constraint_rewards(const std::vector<int>& z_pe, const std::vector<int>& z_clu, double lambda, int n) {
  if (!(lambda > 0.0)) throw std::invalid_argument("constraint_rewards: lambda must be > 0");
  if (z_pe.size() != z_clu.size()) throw std::invalid_argument("constraint_rewards: label vectors differ in length");
  std::vector<int> mismatch(static_cast<std::size_t>(n), 0);
  for (std::size_t t = 0; t < z_pe.size(); ++t) {
    if (z_pe[t] < 0 || z_pe[t] >= n || z_clu[t] < 0 || z_clu[t] >= n)
      throw std::invalid_argument("constraint_rewards: label out of range");
    if (z_pe[t] != z_clu[t]) ++mismatch[static_cast<std::size_t>(z_pe[t])];
  }
  std::vector<double> r(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] = 1.0 / (mismatch[static_cast<std::size_t>(i)] + lambda);
  return r;
}

inline std::vector<double> constraint_rewards(const std::vector<Transition>& batch, double lambda, int n) {
  std::vector<int> pe, clu;
  pe.reserve(batch.size());
  clu.reserve(batch.size());
  for (const auto& t : batch) {
    pe.push_back(t.z_pe);
    clu.push_back(t.z_clu);
  }
  return constraint_rewards(pe, clu, lambda, n);
}

inline std::vector<double> combine(const std::vector<double>& r_cesd, const std::vector<double>& r_reg, double alpha) {
  if (r_cesd.size() != r_reg.size()) throw std::invalid_argument("combine: reward vectors differ in length");
  std::vector<double> out(r_cesd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = r_cesd[i] + alpha * r_reg[i];
  return out;
}

}  // namespace cesd
