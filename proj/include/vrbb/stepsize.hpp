#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "vrbb/error.hpp"
#include "vrbb/types.hpp"

namespace vrbb {

enum class AdaptorKind { ConstantOne, InverseLinear, Table };

/// Which engine a hedged step is computed for: the prefactor is gamma for
/// MB-SARAH and the balance parameter gamma2 for mS2GD.
enum class StepMode { MbSarah, Ms2gd };

/// Piecewise-constant adaptor: h(a) is the value of the last entry whose
/// threshold is <= a (the first entry below the first threshold).
struct AdaptorTable {
  std::vector<std::pair<double, double>> entries;  // (threshold on sigma1*s + sigma2*k, h)
};

struct HedgeConfig {
  double alpha = 3.0;
  AdaptorKind adaptor = AdaptorKind::ConstantOne;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  AdaptorTable table;
  double gamma = 1.0;
  double gamma2 = 1.0;
  Index b1 = 40;
  Index b2 = 40;
  /// Cold-start value used before any step has been accepted; the epoch's
  /// eta0 when unset.
  std::optional<double> fallback_c;

  Index b_bar() const { return std::max(b1, b2); }

  void validate() const {
    if (!(alpha >= 1.0) || !std::isfinite(alpha)) throw ConfigError("hedge.alpha must be >= 1");
    if (!(gamma > 0.0)) throw ConfigError("hedge.gamma must be > 0");
    if (!(gamma2 > 0.0)) throw ConfigError("hedge.gamma2 must be > 0");
    if (b1 < 1 || b2 < 1) throw ConfigError("hedge.b1 and hedge.b2 must be >= 1");
    if (sigma1 < 0.0 || sigma2 < 0.0) throw ConfigError("hedge.sigma1/sigma2 must be >= 0");
    if (fallback_c && !(*fallback_c > 0.0)) throw ConfigError("hedge.fallback_c must be > 0");
    if (adaptor == AdaptorKind::Table) {
      if (table.entries.empty()) throw ConfigError("hedge.table needs at least one entry");
      for (std::size_t i = 0; i < table.entries.size(); ++i) {
        if (!(table.entries[i].second > 0.0)) throw ConfigError("hedge.table values must be > 0");
        if (i > 0 && !(table.entries[i].first > table.entries[i - 1].first))
          throw ConfigError("hedge.table thresholds must be strictly increasing");
      }
    }
  }
};

/// Smallest argument fed to the inverse-linear adaptor.
inline constexpr double kAdaptorArgFloor = 1e-3;
/// Relative tolerance below which a curvature quotient is rejected.
inline constexpr double kCurvatureTol = 1e-12;

/// h(sigma1 * s + sigma2 * k) for epoch s >= 1 and inner step k >= 1.
inline double adaptor_value(AdaptorKind kind, double sigma1, double sigma2, Index s, Index k,
                            const AdaptorTable &table = {}) {
  const double arg = sigma1 * static_cast<double>(s) + sigma2 * static_cast<double>(k);
  switch (kind) {
    case AdaptorKind::ConstantOne:
      return 1.0;
    case AdaptorKind::InverseLinear: {
      const double a = std::max(arg, kAdaptorArgFloor);
      return (1.0 + a) / a;
    }
    case AdaptorKind::Table: {
      if (table.entries.empty()) throw ContractViolation("empty adaptor table");
      double h = table.entries.front().second;
      for (const auto &[threshold, value] : table.entries)
        if (threshold <= arg) h = value;
      return h;
    }
  }
  return 1.0;
}

inline double adaptor_value(const HedgeConfig &cfg, Index s, Index k) {
  return adaptor_value(cfg.adaptor, cfg.sigma1, cfg.sigma2, s, k, cfg.table);
}

/// Hedge coefficient c = alpha^h.
inline double hedge_coefficient(const HedgeConfig &cfg, Index s, Index k) {
  return std::pow(cfg.alpha, adaptor_value(cfg, s, k));
}

/// Range of alpha^h over the iteration grid; alpha_hat >= alpha_tilde.
struct HedgeBounds {
  double alpha_hat = 1.0;
  double alpha_tilde = 1.0;
};

/// Extremes of alpha^h(sigma1 s + sigma2 k) over s in [1, s_max], k in [1, m].
inline HedgeBounds hedge_bounds(AdaptorKind kind, double alpha, double sigma1, double sigma2, Index s_max, Index m,
                                const AdaptorTable &table = {}) {
  if (!(alpha >= 1.0)) throw ContractViolation("hedge_bounds: alpha must be >= 1");
  if (s_max < 1 || m < 1) throw ContractViolation("hedge_bounds: s_max and m must be >= 1");
  double h_max, h_min;
  switch (kind) {
    case AdaptorKind::ConstantOne:
      h_max = h_min = 1.0;
      break;
    case AdaptorKind::InverseLinear:
      // non-increasing in the argument, which is non-decreasing in (s, k)
      h_max = adaptor_value(kind, sigma1, sigma2, 1, 1);
      h_min = adaptor_value(kind, sigma1, sigma2, s_max, m);
      break;
    default: {
      h_max = -std::numeric_limits<double>::infinity();
      h_min = std::numeric_limits<double>::infinity();
      for (Index s = 1; s <= s_max; ++s)
        for (Index k = 1; k <= m; ++k) {
          const double h = adaptor_value(kind, sigma1, sigma2, s, k, table);
          h_max = std::max(h_max, h);
          h_min = std::min(h_min, h);
        }
    }
  }
  return {std::pow(alpha, h_max), std::pow(alpha, h_min)};
}

inline HedgeBounds hedge_bounds(const HedgeConfig &cfg, Index s_max, Index m) {
  return hedge_bounds(cfg.adaptor, cfg.alpha, cfg.sigma1, cfg.sigma2, s_max, m, cfg.table);
}

/// A BB quotient together with its validity flag.
template <typename Scalar>
struct Quotient {
  Scalar value = Scalar(0);
  bool valid = false;
};

/// ||s||^2 / s^T y; invalid when s^T y <= tol * ||s|| ||y||.
template <typename D1, typename D2>
Quotient<typename D1::Scalar> bb1_raw(const Eigen::MatrixBase<D1> &s, const Eigen::MatrixBase<D2> &y) {
  using Scalar = typename D1::Scalar;
  if (s.size() != y.size()) throw ContractViolation("bb1_raw: vector lengths differ");
  const Scalar sy = s.dot(y);
  const Scalar ss = s.squaredNorm();
  const Scalar scale = std::sqrt(ss) * y.norm();
  if (!(sy > Scalar(kCurvatureTol) * scale) || !(ss > Scalar(0))) return {Scalar(0), false};
  return {ss / sy, true};
}

/// s^T y / ||y||^2; invalid when y vanishes relative to s or s^T y <= tol.
template <typename D1, typename D2>
Quotient<typename D1::Scalar> bb2_raw(const Eigen::MatrixBase<D1> &s, const Eigen::MatrixBase<D2> &y) {
  using Scalar = typename D1::Scalar;
  if (s.size() != y.size()) throw ContractViolation("bb2_raw: vector lengths differ");
  const Scalar sy = s.dot(y);
  const Scalar yy = y.squaredNorm();
  const Scalar scale = s.norm() * std::sqrt(yy);
  if (!(yy > Scalar(kCurvatureTol) * scale) || !(sy > Scalar(kCurvatureTol) * scale)) return {Scalar(0), false};
  return {sy / yy, true};
}

/// candidate if present and > 0, else the last accepted step, else eta0.
template <typename Scalar>
Scalar safeguard(std::optional<Scalar> candidate, std::optional<Scalar> last_good, Scalar eta0) {
  if (!(eta0 > Scalar(0))) throw ContractViolation("safeguard: eta0 must be > 0");
  if (candidate && std::isfinite(*candidate) && *candidate > Scalar(0)) return *candidate;
  if (last_good) return *last_good;
  return eta0;
}

/// The per-run "last accepted step" cell.
template <typename Scalar>
class StepGuard {
 public:
  explicit StepGuard(Scalar cold_start) : cold_start_(cold_start) {}

  void set_cold_start(Scalar eta0) { cold_start_ = eta0; }

  /// Returns the step to use and whether the safeguard replaced the candidate.
  std::pair<Scalar, bool> apply(std::optional<Scalar> candidate) {
    const Scalar eta = safeguard(candidate, last_good_, cold_start_);
    const bool replaced = !(candidate && eta == *candidate);
    if (!replaced) last_good_ = eta;
    return {eta, replaced};
  }

  std::optional<Scalar> last_good() const { return last_good_; }

 private:
  Scalar cold_start_;
  std::optional<Scalar> last_good_;
};

/// Iterate change and the two batch gradient differences of one inner step.
/// y2 may be left empty when the BB2 term carries zero weight.
template <typename Scalar>
struct CurvatureSnapshot {
  typename Types<Scalar>::Vector s_vec;
  typename Types<Scalar>::Vector y1;
  typename Types<Scalar>::Vector y2;
};

template <typename Scalar>
struct StepOutcome {
  Scalar eta = Scalar(0);
  /// Unsafeguarded value; meaningful only when `candidate_valid`.
  Scalar candidate = Scalar(0);
  bool candidate_valid = false;
  bool safeguarded = false;
  double hedge = 1.0;
  Quotient<Scalar> bb1;
  Quotient<Scalar> bb2;
};

/// Hedged candidate (gamma or gamma2)/b_bar * (c bb1(s, y1) + (1 - c) bb2(s, y2)).
template <typename Scalar>
StepOutcome<Scalar> hedged_candidate(const CurvatureSnapshot<Scalar> &snap, const HedgeConfig &cfg, Index s,
                                     Index k, StepMode mode) {
  StepOutcome<Scalar> out;
  out.hedge = hedge_coefficient(cfg, s, k);
  const auto c = static_cast<Scalar>(out.hedge);
  const Scalar prefactor =
      static_cast<Scalar>(mode == StepMode::MbSarah ? cfg.gamma : cfg.gamma2) / static_cast<Scalar>(cfg.b_bar());
  out.bb1 = bb1_raw(snap.s_vec, snap.y1);
  bool valid = out.bb1.valid;
  Scalar combo = c * out.bb1.value;
  if (c != Scalar(1)) {
    out.bb2 = bb2_raw(snap.s_vec, snap.y2);
    valid = valid && out.bb2.valid;
    combo += (Scalar(1) - c) * out.bb2.value;
  }
  out.candidate = prefactor * combo;
  out.candidate_valid = valid && std::isfinite(out.candidate) && out.candidate > Scalar(0);
  return out;
}

/// RHBB step for plain batch gradients on S1, S2 (safeguarded).
template <typename Scalar>
StepOutcome<Scalar> rhbb_step(const CurvatureSnapshot<Scalar> &snap, const HedgeConfig &cfg, Index s, Index k,
                              StepMode mode, StepGuard<Scalar> &guard) {
  auto out = hedged_candidate(snap, cfg, s, k, mode);
  std::tie(out.eta, out.safeguarded) =
      guard.apply(out.candidate_valid ? std::optional<Scalar>(out.candidate) : std::nullopt);
  return out;
}

/// RHBB+ step: identical rule, the snapshot holds importance-weighted
/// differences.
template <typename Scalar>
StepOutcome<Scalar> rhbb_plus_step(const CurvatureSnapshot<Scalar> &snap, const HedgeConfig &cfg, Index s, Index k,
                                   StepMode mode, StepGuard<Scalar> &guard) {
  return rhbb_step(snap, cfg, s, k, mode, guard);
}

/// Random BB1 baseline: (gamma or gamma2)/b1 * bb1(s, y1).
template <typename Scalar>
StepOutcome<Scalar> rbb_step(const CurvatureSnapshot<Scalar> &snap, const HedgeConfig &cfg, StepMode mode,
                             StepGuard<Scalar> &guard) {
  StepOutcome<Scalar> out;
  const Scalar prefactor =
      static_cast<Scalar>(mode == StepMode::MbSarah ? cfg.gamma : cfg.gamma2) / static_cast<Scalar>(cfg.b1);
  out.bb1 = bb1_raw(snap.s_vec, snap.y1);
  out.candidate = prefactor * out.bb1.value;
  out.candidate_valid = out.bb1.valid && std::isfinite(out.candidate) && out.candidate > Scalar(0);
  std::tie(out.eta, out.safeguarded) =
      guard.apply(out.candidate_valid ? std::optional<Scalar>(out.candidate) : std::nullopt);
  return out;
}

}  // namespace vrbb
