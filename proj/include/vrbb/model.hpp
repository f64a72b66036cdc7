#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>

#include "vrbb/data.hpp"
#include "vrbb/error.hpp"
#include "vrbb/sampling.hpp"
#include "vrbb/types.hpp"

namespace vrbb {

/// log(1 + exp(-z a)) as a function of the inner product a = <x, w>.
struct LogisticLoss {
  static constexpr const char *name = "logistic";
  /// sup of the second derivative in a.
  static constexpr double curvature_bound = 0.25;

  template <typename Scalar>
  static Scalar sigmoid(Scalar u) {
    if (u >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-u));
    const Scalar e = std::exp(u);
    return e / (Scalar(1) + e);
  }

  template <typename Scalar>
  static Scalar value(Scalar a, Scalar z) {
    const Scalar t = z * a;
    return std::max(-t, Scalar(0)) + std::log1p(std::exp(-std::abs(t)));
  }

  template <typename Scalar>
  static Scalar derivative(Scalar a, Scalar z) {
    return -z * sigmoid(-z * a);
  }

  template <typename Scalar>
  static Scalar second_derivative(Scalar a, Scalar z) {
    const Scalar p = sigmoid(z * a);
    return p * (Scalar(1) - p);
  }

  /// derivative(a1) - derivative(a0), with da = a1 - a0 supplied separately
  /// so nearby points do not cancel:
  /// sigmoid(u1) - sigmoid(u0) = sinh((u1-u0)/2) / (2 cosh(u1/2) cosh(u0/2)).
  template <typename Scalar>
  static Scalar derivative_difference(Scalar a1, Scalar a0, Scalar da, Scalar z) {
    const Scalar u1 = -z * a1, u0 = -z * a0, du = -z * da;
    if (std::abs(u1) < Scalar(600) && std::abs(u0) < Scalar(600) && std::abs(du) < Scalar(600)) {
      const Scalar ds =
          std::sinh(du / Scalar(2)) / (Scalar(2) * std::cosh(u1 / Scalar(2)) * std::cosh(u0 / Scalar(2)));
      return -z * ds;
    }
    return derivative(a1, z) - derivative(a0, z);
  }
};

/// Finite-sum problem P(w) = (1/n) sum_i f_i(w) with
/// f_i(w) = loss(<x_i, w>, z_i) + (lambda/2) ||w||^2.
/// The regulariser is folded into every component so each f_i is
/// lambda-strongly convex. The dataset is shared read-only.
template <typename Loss, typename ScalarT = double>
class LinearModelProblem {
 public:
  using Scalar = ScalarT;
  using Vector = typename Types<Scalar>::Vector;
  using LossType = Loss;

  LinearModelProblem(std::shared_ptr<const SparseDataset<Scalar>> data, Scalar lambda)
      : data_(std::move(data)), lambda_(lambda) {
    if (!data_) throw ContractViolation("problem needs a dataset");
    if (!(lambda_ > Scalar(0))) throw ContractViolation("lambda must be > 0");
    Scalar max_sq(0);
    for (Index i = 0; i < data_->n(); ++i) max_sq = std::max(max_sq, data_->row_squared_norm(i));
    smoothness_ = max_sq * static_cast<Scalar>(Loss::curvature_bound) + lambda_;
  }

  LinearModelProblem(SparseDataset<Scalar> data, Scalar lambda)
      : LinearModelProblem(std::make_shared<const SparseDataset<Scalar>>(std::move(data)), lambda) {}

  Index n() const { return data_->n(); }
  Index dim() const { return data_->d(); }
  Scalar lambda() const { return lambda_; }
  const SparseDataset<Scalar> &data() const { return *data_; }
  const std::shared_ptr<const SparseDataset<Scalar>> &data_ptr() const { return data_; }
  /// max_i ||x_i||^2 * sup loss'' + lambda
  Scalar smoothness() const { return smoothness_; }

 private:
  std::shared_ptr<const SparseDataset<Scalar>> data_;
  Scalar lambda_;
  Scalar smoothness_;
};

template <typename Scalar = double>
using LogisticL2Problem = LinearModelProblem<LogisticLoss, Scalar>;

namespace detail {

template <typename Loss, typename Scalar, typename Derived>
void check_dim(const LinearModelProblem<Loss, Scalar> &p, const Eigen::MatrixBase<Derived> &w) {
  if (w.size() != p.dim())
    throw ContractViolation("weight vector has length " + std::to_string(w.size()) + ", expected " +
                            std::to_string(p.dim()));
}

template <typename Loss, typename Scalar>
void check_subset(const LinearModelProblem<Loss, Scalar> &p, std::span<const Index> subset) {
  if (subset.empty()) throw ContractViolation("sample set must be non-empty");
  for (Index i : subset) p.data().check_row(i);
}

}  // namespace detail

template <typename Loss, typename Scalar, typename Derived>
Scalar objective(const LinearModelProblem<Loss, Scalar> &p, const Eigen::MatrixBase<Derived> &w) {
  detail::check_dim(p, w);
  const auto &data = p.data();
  const typename Types<Scalar>::Vector margins = data.features() * w;
  Scalar sum(0);
  for (Index i = 0; i < data.n(); ++i) sum += Loss::value(margins[i], data.label(i));
  return sum / static_cast<Scalar>(data.n()) + p.lambda() / Scalar(2) * w.squaredNorm();
}

/// f_i(w)
template <typename Loss, typename Scalar, typename Derived>
Scalar component_objective(const LinearModelProblem<Loss, Scalar> &p, const Eigen::MatrixBase<Derived> &w,
                           Index i) {
  detail::check_dim(p, w);
  p.data().check_row(i);
  return Loss::value(p.data().row_dot(i, w), p.data().label(i)) + p.lambda() / Scalar(2) * w.squaredNorm();
}

template <typename Loss, typename Scalar, typename Derived>
typename Types<Scalar>::Vector component_gradient(const LinearModelProblem<Loss, Scalar> &p,
                                                  const Eigen::MatrixBase<Derived> &w, Index i) {
  detail::check_dim(p, w);
  p.data().check_row(i);
  typename Types<Scalar>::Vector g = p.lambda() * w;
  p.data().add_row(i, Loss::derivative(p.data().row_dot(i, w), p.data().label(i)), g);
  return g;
}

/// grad P(w), one pass over the data.
template <typename Loss, typename Scalar, typename Derived>
typename Types<Scalar>::Vector full_gradient(const LinearModelProblem<Loss, Scalar> &p,
                                             const Eigen::MatrixBase<Derived> &w) {
  detail::check_dim(p, w);
  const auto &data = p.data();
  typename Types<Scalar>::Vector coef = data.features() * w;
  for (Index i = 0; i < data.n(); ++i) coef[i] = Loss::derivative(coef[i], data.label(i));
  typename Types<Scalar>::Vector g = data.features().transpose() * coef;
  g /= static_cast<Scalar>(data.n());
  g += p.lambda() * w;
  return g;
}

/// (1/|S|) sum_{i in S} scale_i * grad f_i(w); `scales` is indexed by sample
/// id (empty means all ones). Duplicate ids count with multiplicity.
template <typename Loss, typename Scalar, typename Derived>
typename Types<Scalar>::Vector scaled_subset_gradient(const LinearModelProblem<Loss, Scalar> &p,
                                                      const Eigen::MatrixBase<Derived> &w,
                                                      std::span<const Index> subset,
                                                      std::span<const Scalar> scales = {}) {
  detail::check_dim(p, w);
  detail::check_subset(p, subset);
  const auto &data = p.data();
  typename Types<Scalar>::Vector g = Types<Scalar>::Vector::Zero(p.dim());
  Scalar scale_sum(0);
  for (Index i : subset) {
    const Scalar s = scales.empty() ? Scalar(1) : scales[static_cast<std::size_t>(i)];
    scale_sum += s;
    data.add_row(i, s * Loss::derivative(data.row_dot(i, w), data.label(i)), g);
  }
  const auto b = static_cast<Scalar>(subset.size());
  g /= b;
  g += (p.lambda() * (scale_sum / b)) * w;
  return g;
}

template <typename Loss, typename Scalar, typename Derived>
typename Types<Scalar>::Vector subset_gradient(const LinearModelProblem<Loss, Scalar> &p,
                                               const Eigen::MatrixBase<Derived> &w,
                                               std::span<const Index> subset) {
  return scaled_subset_gradient(p, w, subset);
}

/// Importance-weighted estimate (1/|S|) sum_{i in S} grad f_i(w) / (n q_i).
template <typename Loss, typename Scalar, typename Derived>
typename Types<Scalar>::Vector weighted_subset_gradient(const LinearModelProblem<Loss, Scalar> &p,
                                                        const Eigen::MatrixBase<Derived> &w,
                                                        std::span<const Index> subset,
                                                        const SamplingDistribution<Scalar> &q) {
  if (q.size() != p.n()) throw ContractViolation("distribution size does not match the dataset");
  for (Index i : subset)
    if (i >= 0 && i < q.size() && q.prob(i) == Scalar(0))
      throw DegenerateDistribution("sample " + std::to_string(i) + " has zero probability");
  return scaled_subset_gradient(p, w, subset, q.importance());
}

/// (1/|S|) sum scale_i (grad f_i(w_new) - grad f_i(w_old)), evaluated through
/// the loss derivative difference so that nearby points do not cancel.
template <typename Loss, typename Scalar, typename D1, typename D2>
typename Types<Scalar>::Vector subset_gradient_difference(const LinearModelProblem<Loss, Scalar> &p,
                                                          const Eigen::MatrixBase<D1> &w_new,
                                                          const Eigen::MatrixBase<D2> &w_old,
                                                          std::span<const Index> subset,
                                                          std::span<const Scalar> scales = {}) {
  detail::check_dim(p, w_new);
  detail::check_dim(p, w_old);
  detail::check_subset(p, subset);
  const auto &data = p.data();
  const typename Types<Scalar>::Vector step = w_new - w_old;
  typename Types<Scalar>::Vector y = Types<Scalar>::Vector::Zero(p.dim());
  Scalar scale_sum(0);
  for (Index i : subset) {
    const Scalar s = scales.empty() ? Scalar(1) : scales[static_cast<std::size_t>(i)];
    scale_sum += s;
    const Scalar a1 = data.row_dot(i, w_new);
    const Scalar a0 = data.row_dot(i, w_old);
    const Scalar da = data.row_dot(i, step);
    data.add_row(i, s * Loss::derivative_difference(a1, a0, da, data.label(i)), y);
  }
  const auto b = static_cast<Scalar>(subset.size());
  y /= b;
  y += (p.lambda() * (scale_sum / b)) * step;
  return y;
}

/// L = max_i ||x_i||^2 / 4 + lambda for the logistic loss.
template <typename Loss, typename Scalar>
Scalar smoothness_constant(const LinearModelProblem<Loss, Scalar> &p) {
  return p.smoothness();
}

template <typename Loss, typename Scalar>
Scalar strong_convexity_constant(const LinearModelProblem<Loss, Scalar> &p) {
  return p.lambda();
}

}  // namespace vrbb
