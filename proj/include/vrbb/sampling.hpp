#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vrbb/data.hpp"
#include "vrbb/error.hpp"
#include "vrbb/rng.hpp"
#include "vrbb/types.hpp"

namespace vrbb {

/// Categorical distribution Q = {q_1..q_n} over sample ids with a prefix-sum
/// table for inversion sampling and the importance factors 1/(n q_i).
template <typename ScalarT = double>
class SamplingDistribution {
 public:
  using Scalar = ScalarT;

  /// Relative floor given to zero weights before normalising.
  static constexpr Scalar kZeroWeightFloor = Scalar(1e-6);

  static SamplingDistribution uniform(Index n) {
    if (n < 1) throw ContractViolation("distribution needs n >= 1");
    SamplingDistribution q;
    q.uniform_ = true;
    q.probs_.assign(static_cast<std::size_t>(n), Scalar(1) / static_cast<Scalar>(n));
    q.importance_.assign(static_cast<std::size_t>(n), Scalar(1));
    q.build_cumulative();
    return q;
  }

  /// Normalises non-negative weights. With `floor_zeros`, zero weights are
  /// raised to (min positive weight) * 1e-6 first. Equal weights give the
  /// exact uniform distribution.
  static SamplingDistribution from_weights(std::span<const Scalar> weights, bool floor_zeros = true) {
    if (weights.empty()) throw ContractViolation("distribution needs n >= 1");
    Scalar min_pos = std::numeric_limits<Scalar>::infinity();
    for (Scalar w : weights) {
      if (!(w >= Scalar(0)) || !std::isfinite(w))
        throw ContractViolation("distribution weights must be finite and non-negative");
      if (w > Scalar(0)) min_pos = std::min(min_pos, w);
    }
    if (!std::isfinite(min_pos)) throw DegenerateDistribution("every sampling weight is zero");
    if (std::all_of(weights.begin(), weights.end(), [&](Scalar w) { return w == weights[0]; }))
      return uniform(static_cast<Index>(weights.size()));

    std::vector<Scalar> w(weights.begin(), weights.end());
    if (floor_zeros)
      for (Scalar &x : w)
        if (x == Scalar(0)) x = min_pos * kZeroWeightFloor;
    const Scalar total = std::accumulate(w.begin(), w.end(), Scalar(0));

    SamplingDistribution q;
    const auto n = static_cast<Scalar>(w.size());
    q.probs_.resize(w.size());
    q.importance_.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      q.probs_[i] = w[i] / total;
      q.importance_[i] = q.probs_[i] > Scalar(0) ? Scalar(1) / (n * q.probs_[i])
                                                 : std::numeric_limits<Scalar>::infinity();
    }
    q.build_cumulative();
    return q;
  }

  Index size() const { return static_cast<Index>(probs_.size()); }
  bool is_uniform() const { return uniform_; }
  std::span<const Scalar> probs() const { return probs_; }
  Scalar prob(Index i) const { return probs_[static_cast<std::size_t>(i)]; }
  std::span<const Scalar> cumulative() const { return cumulative_; }
  /// 1 / (n q_i); exactly 1 for the uniform distribution, +inf where q_i = 0.
  std::span<const Scalar> importance() const { return importance_; }

  /// Inversion draw on the prefix-sum table; zero-mass ids are never hit.
  Index draw(Rng &rng) const {
    const Scalar u = static_cast<Scalar>(rng.uniform01()) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    auto idx = static_cast<Index>(it - cumulative_.begin());
    while (probs_[static_cast<std::size_t>(idx)] == Scalar(0)) --idx;  // u landed exactly on a boundary
    return idx;
  }

 private:
  void build_cumulative() {
    cumulative_.resize(probs_.size());
    Scalar acc(0);
    for (std::size_t i = 0; i < probs_.size(); ++i) cumulative_[i] = (acc += probs_[i]);
    if (std::abs(acc - Scalar(1)) > Scalar(1e-12))
      throw DegenerateDistribution("probabilities sum to " + std::to_string(static_cast<double>(acc)));
  }

  std::vector<Scalar> probs_;
  std::vector<Scalar> cumulative_;
  std::vector<Scalar> importance_;
  bool uniform_ = false;
};

template <typename Scalar = double>
SamplingDistribution<Scalar> uniform_distribution(Index n) {
  return SamplingDistribution<Scalar>::uniform(n);
}

/// q_i proportional to ||x_i||_inf^tau.
template <typename Scalar>
SamplingDistribution<Scalar> option1_distribution(const SparseDataset<Scalar> &data, Scalar tau,
                                                  bool floor_zeros = true) {
  if (!(tau >= Scalar(0))) throw ContractViolation("tau must be >= 0");
  std::vector<Scalar> w(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) w[static_cast<std::size_t>(i)] = std::pow(row_inf_norm(data, i), tau);
  return SamplingDistribution<Scalar>::from_weights(w, floor_zeros);
}

/// q_i proportional to ||x_i||_0^tau.
template <typename Scalar>
SamplingDistribution<Scalar> option2_distribution(const SparseDataset<Scalar> &data, Scalar tau,
                                                  bool floor_zeros = true) {
  if (!(tau >= Scalar(0))) throw ContractViolation("tau must be >= 0");
  std::vector<Scalar> w(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i)
    w[static_cast<std::size_t>(i)] = std::pow(static_cast<Scalar>(row_nnz(data, i)), tau);
  return SamplingDistribution<Scalar>::from_weights(w, floor_zeros);
}

/// b distinct ids from [0, n), every b-subset equally likely, sorted.
inline std::vector<Index> draw_uniform_subset(Rng &rng, Index n, Index b) {
  if (b < 1 || b > n)
    throw ContractViolation("subset size " + std::to_string(b) + " not in [1, " + std::to_string(n) + "]");
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(b));
  if (b <= 64) {
    // Floyd's algorithm
    for (Index j = n - b; j < n; ++j) {
      const auto t = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(j) + 1));
      auto pos = std::lower_bound(out.begin(), out.end(), t);
      if (pos != out.end() && *pos == t)
        out.insert(std::lower_bound(out.begin(), out.end(), j), j);
      else
        out.insert(pos, t);
    }
    return out;
  }
  // partial Fisher-Yates
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index(0));
  for (Index j = 0; j < b; ++j) {
    const auto r = j + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n - j)));
    std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(r)]);
  }
  out.assign(pool.begin(), pool.begin() + b);
  std::sort(out.begin(), out.end());
  return out;
}

/// b i.i.d. draws from Q (with replacement), in draw order.
template <typename Scalar>
std::vector<Index> draw_weighted_multiset(Rng &rng, const SamplingDistribution<Scalar> &q, Index b) {
  if (b < 1) throw ContractViolation("sample size must be >= 1");
  std::vector<Index> out(static_cast<std::size_t>(b));
  for (auto &i : out) i = q.draw(rng);
  return out;
}

/// Step-size batch under Q: the uniform distribution samples without
/// replacement, any other Q i.i.d. with replacement.
template <typename Scalar>
std::vector<Index> draw_step_batch(Rng &rng, const SamplingDistribution<Scalar> &q, Index b) {
  if (q.is_uniform()) return draw_uniform_subset(rng, q.size(), b);
  return draw_weighted_multiset(rng, q, b);
}

}  // namespace vrbb
