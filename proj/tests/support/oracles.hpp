#pragma once

// Helpers shared by the unit and acceptance tests. Everything here is written
// independently of the library code it checks: dense loops, textbook formulas.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "vrbb/data.hpp"
#include "vrbb/model.hpp"
#include "vrbb/rng.hpp"

namespace vrbb::testing {

/// f(a) = (a - z)^2 / 2: turns LinearModelProblem into a ridge least-squares
/// problem, a strongly convex quadratic with a known Hessian.
struct SquaredLoss {
  static constexpr const char *name = "squared";
  static constexpr double curvature_bound = 1.0;
  template <typename S>
  static S value(S a, S z) {
    return (a - z) * (a - z) / S(2);
  }
  template <typename S>
  static S derivative(S a, S z) {
    return a - z;
  }
  template <typename S>
  static S second_derivative(S, S) {
    return S(1);
  }
  template <typename S>
  static S derivative_difference(S, S, S da, S) {
    return da;
  }
};

using QuadraticProblem = LinearModelProblem<SquaredLoss, double>;

/// Dense n x d matrix with roughly `density` non-zeros, entries in [-scale, scale].
inline Eigen::MatrixXd random_dense(Rng &rng, Index n, Index d, double density = 1.0, double scale = 1.0) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j)
      if (rng.uniform01() < density) x(i, j) = scale * (2.0 * rng.uniform01() - 1.0);
  return x;
}

inline Eigen::VectorXd random_labels(Rng &rng, Index n) {
  Eigen::VectorXd z(n);
  for (Index i = 0; i < n; ++i) z[i] = rng.uniform01() < 0.5 ? -1.0 : 1.0;
  return z;
}

inline Dataset random_dataset(std::uint64_t seed, Index n, Index d, double density = 1.0, double scale = 1.0) {
  Rng rng(seed, 99);
  auto x = random_dense(rng, n, d, density, scale);
  auto z = random_labels(rng, n);
  return Dataset::from_dense(x, z);
}

inline Eigen::VectorXd random_vector(Rng &rng, Index d, double scale = 1.0) {
  Eigen::VectorXd w(d);
  for (Index j = 0; j < d; ++j) w[j] = scale * rng.normal();
  return w;
}

/// Naive logistic objective on a dense copy of the data.
inline double naive_objective(const Eigen::MatrixXd &x, const Eigen::VectorXd &z, double lambda,
                              const Eigen::VectorXd &w) {
  double sum = 0.0;
  for (Index i = 0; i < x.rows(); ++i) sum += std::log(1.0 + std::exp(-z[i] * x.row(i).dot(w)));
  return sum / static_cast<double>(x.rows()) + 0.5 * lambda * w.squaredNorm();
}

/// Central finite-difference gradient of f at w.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd &)> &f,
                                          const Eigen::VectorXd &w, double h = 1e-5) {
  Eigen::VectorXd g(w.size());
  for (Index j = 0; j < w.size(); ++j) {
    Eigen::VectorXd a = w, b = w;
    a[j] += h;
    b[j] -= h;
    g[j] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// ||a - b|| / max(||b||, floor)
inline double rel_error(const Eigen::VectorXd &a, const Eigen::VectorXd &b, double floor = 1e-8) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// Every size-b subset of {0..n-1}, lexicographic.
inline std::vector<std::vector<Index>> all_subsets(Index n, Index b) {
  std::vector<std::vector<Index>> out;
  std::vector<Index> cur;
  std::function<void(Index)> rec = [&](Index start) {
    if (static_cast<Index>(cur.size()) == b) {
      out.push_back(cur);
      return;
    }
    for (Index i = start; i < n; ++i) {
      cur.push_back(i);
      rec(i + 1);
      cur.pop_back();
    }
  };
  rec(0);
  return out;
}

inline Eigen::MatrixXd dense_features(const Dataset &d) { return Eigen::MatrixXd(d.features()); }

}  // namespace vrbb::testing
