#pragma once

// Numerical audits of the entropy identities behind clustered exploration:
// the partition gap for uniform occupancies, the decomposition of a mixture on
// disjoint supports, and the Fano-type bound on entropy under TV distance.

#include "cesd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cesd {

namespace detail {

// Neumaier-compensated sum.
class Accumulator {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

/// Shannon entropy in nats; zero-mass outcomes contribute nothing.
inline double shannon_entropy(const std::vector<double>& p) {
  detail::Accumulator acc;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("shannon_entropy: negative probability");
    if (v > 0.0) acc.add(-v * std::log(v));
  }
  return acc.value();
}

inline double binary_entropy(double d) {
  if (d <= 0.0 || d >= 1.0) return 0.0;
  return -d * std::log(d) - (1.0 - d) * std::log(1.0 - d);
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("total_variation: distributions differ in size");
  detail::Accumulator acc;
  for (std::size_t i = 0; i < p.size(); ++i) acc.add(std::abs(p[i] - q[i]));
  return 0.5 * acc.value();
}

/// H(uniform over N) minus the mean entropy of the n equal uniform clusters.
inline double check_partition_gap(long n_states, long n_clusters) {
  if (n_states < 1 || n_clusters < 1) throw std::invalid_argument("check_partition_gap: sizes must be positive");
  if (n_states % n_clusters != 0)
    throw std::invalid_argument("check_partition_gap: " + std::to_string(n_clusters) + " does not divide " + std::to_string(n_states));
  const std::vector<double> global(static_cast<std::size_t>(n_states), 1.0 / static_cast<double>(n_states));
  const long per = n_states / n_clusters;
  const std::vector<double> local(static_cast<std::size_t>(per), 1.0 / static_cast<double>(per));
  detail::Accumulator clusters;
  for (long c = 0; c < n_clusters; ++c) clusters.add(shannon_entropy(local) / static_cast<double>(n_clusters));
  return shannon_entropy(global) - clusters.value();
}

/// |H(sum_i w_i d_i) - sum_i w_i H(d_i) - H(w)|. Every d_i is a distribution over
/// the same outcome set and the supports must be disjoint.
inline double check_entropy_decomposition(const std::vector<std::vector<double>>& locals, const std::vector<double>& weights) {
  if (locals.empty() || locals.size() != weights.size())
    throw std::invalid_argument("check_entropy_decomposition: need one weight per local distribution");
  const std::size_t n_out = locals.front().size();
  std::vector<double> composed(n_out, 0.0);
  std::vector<int> owner(n_out, -1);
  detail::Accumulator local_terms;
  for (std::size_t i = 0; i < locals.size(); ++i) {
    if (locals[i].size() != n_out) throw std::invalid_argument("check_entropy_decomposition: outcome sets differ");
    for (std::size_t o = 0; o < n_out; ++o) {
      if (locals[i][o] <= 0.0) continue;
      if (owner[o] >= 0) throw std::invalid_argument("check_entropy_decomposition: supports overlap at outcome " + std::to_string(o));
      owner[o] = static_cast<int>(i);
      composed[o] = weights[i] * locals[i][o];
    }
    local_terms.add(weights[i] * shannon_entropy(locals[i]));
  }
  return std::abs(shannon_entropy(composed) - local_terms.value() - shannon_entropy(weights));
}

struct FanoCheck {
  double delta = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

inline FanoCheck check_fano_bound(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size() || p.size() < 2) throw std::invalid_argument("check_fano_bound: need two distributions over N >= 2 outcomes");
  FanoCheck r;
  r.delta = total_variation(p, q);
  r.lhs = std::abs(shannon_entropy(p) - shannon_entropy(q));
  r.rhs = r.delta * std::log(static_cast<double>(p.size()) - 1.0) + binary_entropy(r.delta);
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

inline std::vector<double> sample_dirichlet(std::size_t n, double concentration, Rng& rng) {
  std::gamma_distribution<double> g(concentration, 1.0);
  std::vector<double> p(n);
  double s = 0.0;
  for (auto& v : p) s += (v = g(rng));
  if (s <= 0.0) {
    p.assign(n, 0.0);
    p[0] = 1.0;
    return p;
  }
  for (auto& v : p) v /= s;
  return p;
}

struct TheoryTrial {
  int index = 0;
  double partition_error = 0.0;  // max |gap - ln n| over the fixed (N, n) cases
  double decomposition_residual = 0.0;
  double fano_worst_slack = 0.0;  // max lhs - rhs over the sampled pairs
  bool passed = false;
};

/// One randomized instance of every audit: the fixed partition cases, one
/// random mixture on disjoint supports and one Dirichlet pair at each N in
/// {2, 8, 32}.
inline TheoryTrial run_theory_trial(int index, Rng& rng) {
  TheoryTrial t;
  t.index = index;
  for (auto [n_states, n] : {std::pair<long, long>{16, 4}, {100, 10}, {1000, 8}})
    t.partition_error = std::max(t.partition_error, std::abs(check_partition_gap(n_states, n) - std::log(static_cast<double>(n))));

  std::uniform_int_distribution<int> clusters(1, 6);
  std::uniform_int_distribution<int> size(1, 8);
  const int k = clusters(rng);
  std::vector<int> sizes(static_cast<std::size_t>(k));
  std::size_t total = 0;
  for (auto& s : sizes) total += static_cast<std::size_t>(s = size(rng));
  std::vector<std::vector<double>> locals;
  std::size_t offset = 0;
  for (int s : sizes) {
    const auto d = sample_dirichlet(static_cast<std::size_t>(s), 1.0, rng);
    std::vector<double> full(total, 0.0);
    for (int j = 0; j < s; ++j) full[offset + static_cast<std::size_t>(j)] = d[static_cast<std::size_t>(j)];
    offset += static_cast<std::size_t>(s);
    locals.push_back(std::move(full));
  }
  t.decomposition_residual = check_entropy_decomposition(locals, sample_dirichlet(static_cast<std::size_t>(k), 1.0, rng));

  t.fano_worst_slack = -1e300;
  bool fano_ok = true;
  for (std::size_t n : {2u, 8u, 32u}) {
    const auto f = check_fano_bound(sample_dirichlet(n, 0.5, rng), sample_dirichlet(n, 0.5, rng));
    t.fano_worst_slack = std::max(t.fano_worst_slack, f.lhs - f.rhs);
    fano_ok = fano_ok && f.holds;
  }
  t.passed = t.partition_error < 1e-12 && t.decomposition_residual < 1e-10 && fano_ok;
  return t;
}

inline std::vector<TheoryTrial> run_theory_suite(int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("theory suite needs trials >= 1");
  Rng rng(seed);
  std::vector<TheoryTrial> out;
  out.reserve(static_cast<std::size_t>(trials));
  for (int i = 0; i < trials; ++i) out.push_back(run_theory_trial(i, rng));
  return out;
}

inline std::string format_trial(const TheoryTrial& t) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "trial %d %s partition_error=%.3e decomposition_residual=%.3e fano_worst_slack=%.3e", t.index,
                t.passed ? "PASS" : "FAIL", t.partition_error, t.decomposition_residual, t.fano_worst_slack);
  return buf;
}

}  // namespace cesd
