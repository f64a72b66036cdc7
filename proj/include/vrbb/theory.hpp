#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vrbb/error.hpp"
#include "vrbb/model.hpp"
#include "vrbb/sampling.hpp"
#include "vrbb/stepsize.hpp"
#include "vrbb/types.hpp"

// Closed-form constants, feasibility conditions and rate coefficients for the
// hedged BB schemes. Every evaluator is plain arithmetic in double precision.

namespace vrbb {

struct TheoryConstants {
  double L = 1.0;
  double mu = 1.0;
  double kappa = 1.0;
  /// max_i L / (n q_i)
  double Lq = 1.0;
  /// min_i mu / (n q_i)
  double muq = 1.0;
  double Lr = 1.0;
  double mur = 1.0;
  double kappa_plus = 1.0;
  double alpha_hat = 1.0;
  double alpha_tilde = 1.0;
  double kappa_r = 1.0;
  double kappa_r_plus = 1.0;
};

/// Constants from L, mu, a sampling distribution and the adaptor bounds.
template <typename Scalar>
TheoryConstants compute_constants(double L, double mu, const SamplingDistribution<Scalar> &q, HedgeBounds bounds) {
  if (!(L > 0.0) || !(mu > 0.0)) throw ContractViolation("L and mu must be positive");
  TheoryConstants c;
  c.L = L;
  c.mu = mu;
  c.kappa = L / mu;
  if (q.is_uniform()) {
    c.Lq = L;
    c.muq = mu;
  } else {
    const auto probs = q.probs();
    const double n = static_cast<double>(probs.size());
    const double q_min = static_cast<double>(*std::min_element(probs.begin(), probs.end()));
    const double q_max = static_cast<double>(*std::max_element(probs.begin(), probs.end()));
    c.Lq = q_min > 0.0 ? L / (n * q_min) : std::numeric_limits<double>::infinity();
    c.muq = mu / (n * q_max);
  }
  c.Lr = L / c.Lq;
  c.mur = c.muq / mu;
  c.kappa_plus = c.Lq / c.muq;
  c.alpha_hat = bounds.alpha_hat;
  c.alpha_tilde = bounds.alpha_tilde;
  c.kappa_r = c.alpha_hat * c.kappa + 1.0 - c.alpha_tilde;
  c.kappa_r_plus = c.alpha_hat * c.kappa_plus + 1.0 - c.alpha_tilde;
  return c;
}

template <typename Loss, typename Scalar>
TheoryConstants compute_constants(const LinearModelProblem<Loss, Scalar> &problem,
                                  const SamplingDistribution<Scalar> &q, HedgeBounds bounds) {
  if (q.size() != problem.n()) throw ContractViolation("distribution size does not match the dataset");
  return compute_constants(static_cast<double>(smoothness_constant(problem)),
                           static_cast<double>(strong_convexity_constant(problem)), q, bounds);
}

namespace detail {

inline double hedged_curvature(const TheoryConstants &c, double L, double mu) {
  return c.alpha_hat * L + (1.0 - c.alpha_tilde) * mu;
}

inline void require_positive(double v, const char *name) {
  if (!(v > 0.0)) throw ContractViolation(std::string(name) + " must be positive");
}

inline long long checked_ceil(double v, const char *what) {
  if (!std::isfinite(v) || std::abs(v) > 9.0e18) throw InfeasibleConfiguration(std::string(what) + " is not finite", v);
  return static_cast<long long>(std::ceil(v));
}

}  // namespace detail

// ---- MB-SARAH, per-epoch condition ----------------------------------------

/// Left-hand side of the MB-SARAH parameter condition (feasible when <= 1).
inline double sarah_condition_lhs(Index b, double gamma, Index m, Index n, double b_bar, const TheoryConstants &c) {
  const double bd = static_cast<double>(b), nd = static_cast<double>(n);
  const double sampling = n > 1 ? static_cast<double>(m) * (nd - bd) / (bd * (nd - 1.0)) : 0.0;
  const double h = gamma * detail::hedged_curvature(c, c.L, c.mu);
  const double ratio = h * c.L / (c.mu * c.L * b_bar);
  return sampling * ratio * ratio + h / (c.mu * b_bar);
}

inline bool check_sarah_condition(Index b, double gamma, Index m, Index n, double b_bar, const TheoryConstants &c) {
  return sarah_condition_lhs(b, gamma, m, n, b_bar, c) <= 1.0;
}

/// Importance-sampling variant: Lq, muq in place of L, mu, weighted by Lr.
inline double sarah_plus_condition_lhs(Index b, double gamma, Index m, Index n, double b_bar,
                                          const TheoryConstants &c) {
  const double bd = static_cast<double>(b), nd = static_cast<double>(n);
  const double sampling = n > 1 ? static_cast<double>(m) * (nd - bd) / (bd * (nd - 1.0)) : 0.0;
  const double ratio = gamma * detail::hedged_curvature(c, c.Lq, c.muq) / (c.muq * b_bar);
  return sampling * c.Lr * c.Lr * ratio * ratio + c.Lr * ratio;
}

inline bool check_sarah_plus_condition(Index b, double gamma, Index m, Index n, double b_bar,
                                          const TheoryConstants &c) {
  return sarah_plus_condition_lhs(b, gamma, m, n, b_bar, c) <= 1.0;
}

// ---- MB-SARAH rates ---------------------------------------------------------

/// Coefficient of [P(w0) - P(w*)] in the inner-loop gradient bound.
inline double sarah_inner_rate(Index m, const TheoryConstants &c, double gamma, double b_bar) {
  if (m < 1) throw ContractViolation("m must be >= 1");
  return 2.0 * b_bar * c.mu * c.L / (gamma * static_cast<double>(m + 1) * detail::hedged_curvature(c, c.L, c.mu));
}

inline double sarah_inner_rate_plus(Index m, const TheoryConstants &c, double gamma, double b_bar) {
  if (m < 1) throw ContractViolation("m must be >= 1");
  return 2.0 * b_bar * c.muq * c.Lq /
         (gamma * static_cast<double>(m + 1) * detail::hedged_curvature(c, c.Lq, c.muq));
}

/// Per-epoch contraction factor of E||grad P(w~_s)||^2.
inline double sarah_outer_rate(Index m, const TheoryConstants &c, double gamma, double b_bar) {
  if (m < 1) throw ContractViolation("m must be >= 1");
  return c.kappa * b_bar / (gamma * static_cast<double>(m + 1) * c.kappa_r);
}

inline double sarah_outer_rate_plus(Index m, const TheoryConstants &c, double gamma, double b_bar) {
  if (m < 1) throw ContractViolation("m must be >= 1");
  return c.mur * c.kappa_plus * b_bar / (gamma * static_cast<double>(m + 1) * c.kappa_r_plus);
}

/// Inner length for an eps-accurate gradient after one epoch; sigma0 is an
/// estimate of P(w0) - P(w*).
inline long long sarah_m_required(double eps, double sigma0, const TheoryConstants &c, double gamma, double b_bar) {
  detail::require_positive(eps, "eps");
  const double denom = eps * gamma * c.kappa_r;
  if (!(denom > 0.0)) throw InfeasibleConfiguration("non-positive denominator in m_RH", denom);
  return detail::checked_ceil(2.0 * b_bar * c.mu * sigma0 * c.kappa / denom - 1.0, "m_RH");
}

inline long long sarah_m_required_plus(double eps, double sigma0, const TheoryConstants &c, double gamma,
                                       double b_bar) {
  detail::require_positive(eps, "eps");
  const double denom = eps * gamma * c.kappa_r_plus;
  if (!(denom > 0.0)) throw InfeasibleConfiguration("non-positive denominator in m_RH+", denom);
  return detail::checked_ceil(2.0 * b_bar * c.muq * sigma0 * c.kappa_plus / denom - 1.0, "m_RH+");
}

/// Outer epochs for E||grad P(w~_s)||^2 <= eps from zeta = ||grad P(w~_0)||^2.
inline long long sarah_s_required(double eps, double zeta, Index m, const TheoryConstants &c, double gamma,
                                  double b_bar) {
  detail::require_positive(eps, "eps");
  detail::require_positive(zeta, "zeta");
  const double denom = std::log(c.kappa_r) - std::log(c.kappa) + std::log(gamma * static_cast<double>(m + 1)) -
                       std::log(b_bar);
  if (!(denom > 0.0)) throw InfeasibleConfiguration("per-epoch factor is not below 1", denom);
  return detail::checked_ceil((std::log(zeta) - std::log(eps)) / denom, "s_RH");
}

inline long long sarah_s_required_plus(double eps, double zeta, Index m, const TheoryConstants &c, double gamma,
                                       double b_bar) {
  detail::require_positive(eps, "eps");
  detail::require_positive(zeta, "zeta");
  const double denom = std::log(c.kappa_r_plus) - std::log(c.kappa_plus) - std::log(c.mur) +
                       std::log(gamma * static_cast<double>(m + 1)) - std::log(b_bar);
  if (!(denom > 0.0)) throw InfeasibleConfiguration("per-epoch factor is not below 1", denom);
  return detail::checked_ceil((std::log(zeta) - std::log(eps)) / denom, "s_RH+");
}

// RBB references for comparison.

inline long long rbb_m_required(double eps, double sigma0, double mu, double gamma, double b_bar) {
  detail::require_positive(eps, "eps");
  return detail::checked_ceil(2.0 * b_bar * mu * sigma0 / (eps * gamma) - 1.0, "m_R");
}

inline long long rbb_s_required(double eps, double zeta, Index m, double gamma, double b_bar) {
  detail::require_positive(eps, "eps");
  detail::require_positive(zeta, "zeta");
  const double denom = std::log(gamma * static_cast<double>(m + 1)) - std::log(b_bar);
  if (!(denom > 0.0)) throw InfeasibleConfiguration("per-epoch factor is not below 1", denom);
  return detail::checked_ceil((std::log(zeta) - std::log(eps)) / denom, "s_R");
}

inline double rbb_outer_rate(Index m, double gamma, double b_bar) {
  return b_bar / (gamma * static_cast<double>(m + 1));
}

// ---- mS2GD rates ------------------------------------------------------------

struct RateResult {
  double value = 0.0;
  bool feasible = false;  // value < 1
};

inline RateResult ms2gd_rate(Index m, Index b, double b_bar, double gamma2, const TheoryConstants &c) {
  const double bb = static_cast<double>(b) * b_bar;
  const double margin = bb - 4.0 * gamma2 * c.kappa_r;
  if (!(margin > 0.0)) throw InfeasibleConfiguration("b * b_bar must exceed 4 kappa_r gamma2", margin);
  const double v = c.kappa * static_cast<double>(b) * b_bar * b_bar /
                       (static_cast<double>(m) * gamma2 * c.kappa_r * margin) +
                   2.0 * gamma2 * c.kappa_r / margin;
  return {v, v < 1.0};
}

inline RateResult ms2gd_plus_rate(Index m, Index b, double b_bar, double gamma2, const TheoryConstants &c) {
  const double bb = static_cast<double>(b) * b_bar;
  const double margin = bb - 4.0 * gamma2 * c.kappa_r_plus * c.Lr;
  if (!(margin > 0.0)) throw InfeasibleConfiguration("b * b_bar must exceed 4 kappa_r+ gamma2 Lr", margin);
  const double v = c.mur * c.kappa_plus * static_cast<double>(b) * b_bar * b_bar /
                       (static_cast<double>(m) * gamma2 * c.kappa_r_plus * margin) +
                   2.0 * gamma2 * c.kappa_r_plus * c.Lr / margin;
  return {v, v < 1.0};
}

/// mS2GD-RBB rate (mu b b_bar^2 + 2 m L) / (mu b b_bar m - 4 m L).
inline RateResult rbb_ms2gd_rate(Index m, Index b, double b_bar, double L, double mu) {
  const double md = static_cast<double>(m), bd = static_cast<double>(b);
  const double denom = mu * bd * b_bar * md - 4.0 * md * L;
  if (!(denom > 0.0)) throw InfeasibleConfiguration("b * b_bar must exceed 4 kappa", denom);
  const double v = (mu * bd * b_bar * b_bar + 2.0 * md * L) / denom;
  return {v, v < 1.0};
}

/// Threshold on b_bar under which the hedged mS2GD rate is below half the
/// RBB rate c. The underlying inequality is A * b_bar < c * B * m; dividing
/// by A gives a lower bound when A < 0 and an upper bound when A > 0.
struct HalvingCondition {
  double A = 0.0;
  double B = 0.0;
  double threshold = 0.0;
  /// true: b_bar > threshold is required; false: b_bar < threshold.
  bool lower_bound = true;

  bool satisfied(double b_bar, double c, Index m) const { return A * b_bar < c * B * static_cast<double>(m); }
};

inline HalvingCondition ms2gd_halving_condition(double c, const TheoryConstants &k, double gamma2, Index m) {
  if (!(c > 0.0 && c < 1.0)) throw ContractViolation("c must lie in (0, 1)");
  const double r = k.kappa / (k.kappa_r * gamma2);
  HalvingCondition h;
  h.A = (1.0 + 2.0 * c) * r * r - 1.0 - c;
  h.B = (1.0 + 2.0 * c) * r / 2.0 - 1.0 - c;
  if (h.A == 0.0) throw InfeasibleConfiguration("halving condition is degenerate (A = 0)", 0.0);
  h.threshold = c * h.B / h.A * static_cast<double>(m);
  h.lower_bound = h.A < 0.0;
  return h;
}

// ---- gradient-dominated case ------------------------------------------------

struct GradientDominatedRates {
  double rho;
  double rho_plus;
};

inline GradientDominatedRates gradient_dominated_rates(double delta, const TheoryConstants &c, double gamma, Index m,
                                                       double b_bar) {
  if (!(delta > 0.0 && delta < 1.0 / (2.0 * c.mu)))
    throw ContractViolation("delta must lie in (0, 1 / (2 mu))");
  return {delta * sarah_inner_rate(m, c, gamma, b_bar), delta * sarah_inner_rate_plus(m, c, gamma, b_bar)};
}

// ---- step bound -------------------------------------------------------------

/// Largest step the hedged rule can produce: (gamma / b_bar) (a^ L + (1 - a~) mu) / (mu L).
/// `gamma` is gamma for MB-SARAH and gamma2 for mS2GD.
inline double rhbb_step_upper_bound(const TheoryConstants &c, double gamma, double b_bar) {
  return gamma / b_bar * detail::hedged_curvature(c, c.L, c.mu) / (c.mu * c.L);
}

inline double rhbb_plus_step_upper_bound(const TheoryConstants &c, double gamma, double b_bar) {
  return gamma / b_bar * detail::hedged_curvature(c, c.Lq, c.muq) / (c.muq * c.Lq);
}

}  // namespace vrbb
