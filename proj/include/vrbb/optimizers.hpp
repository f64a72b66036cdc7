#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vrbb/error.hpp"
#include "vrbb/model.hpp"
#include "vrbb/rng.hpp"
#include "vrbb/sampling.hpp"
#include "vrbb/stepsize.hpp"
#include "vrbb/types.hpp"

namespace vrbb {

enum class Algorithm { MbSarah, Ms2gd, Svrg, SvrgBb };

/// Inner step-size rule of the MB-SARAH / mS2GD engines.
enum class StepRule { Rhbb, RhbbPlus, Rbb, RbbPlus, Constant };

enum class DistributionKind { Uniform, Option1, Option2 };

struct DistributionChoice {
  DistributionKind kind = DistributionKind::Uniform;
  double tau = 2.0;
};

struct RunConfig {
  std::string label;
  Algorithm algorithm = Algorithm::MbSarah;
  StepRule rule = StepRule::Rhbb;
  Index epochs = 15;
  /// Inner loop length; ceil(n / b) when unset.
  std::optional<Index> m;
  Index b = 4;
  HedgeConfig hedge;
  /// Step of each epoch's deterministic first update, cycled over epochs.
  std::vector<double> eta0{0.1};
  /// Fixed step for StepRule::Constant and plain SVRG.
  double eta = 0.01;
  DistributionChoice distribution;
  std::uint64_t seed = 1;
  /// Extra trace records every `eval_every` inner steps (0 = epoch ends only).
  Index eval_every = 0;
  /// Count the S1/S2 step-size batches in the effective passes.
  bool count_stepsize_passes = true;
  /// Keep a per-step log in the trace.
  bool record_steps = false;
  /// Harness hint: run a single epoch through run_inner_only.
  bool inner_only = false;

  Index inner_length(Index n) const { return m ? *m : (n + b - 1) / b; }

  bool uses_importance_weights() const { return rule == StepRule::RhbbPlus || rule == StepRule::RbbPlus; }

  void validate(Index n) const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (m && *m < 1) throw ConfigError("m must be >= 1");
    if (b < 1) throw ConfigError("b must be >= 1");
    if (b > n) throw ConfigError("b exceeds the number of examples");
    if (eta0.empty()) throw ConfigError("eta0 schedule must not be empty");
    for (double e : eta0)
      if (!(e > 0.0)) throw ConfigError("eta0 entries must be > 0");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
    if (distribution.tau < 0.0) throw ConfigError("distribution.tau must be >= 0");
    if (eval_every < 0) throw ConfigError("eval_every must be >= 0");
    hedge.validate();
    const bool hedged = algorithm == Algorithm::MbSarah || algorithm == Algorithm::Ms2gd;
    if (hedged && rule != StepRule::Constant) {
      if (hedge.b1 > n || (hedge.b2 > n && (rule == StepRule::Rhbb || rule == StepRule::RhbbPlus)))
        throw ConfigError("step-size batch exceeds the number of examples");
      if (!uses_importance_weights() && distribution.kind != DistributionKind::Uniform)
        throw ConfigError("a non-uniform distribution needs the rhbb+ or rbb+ rule");
    }
  }
};

struct TraceRecord {
  Index epoch = 0;
  Index inner_step = 0;
  double effective_passes = 0.0;
  double grad_norm = 0.0;
  double objective = 0.0;
  double step_min = 0.0;
  double step_mean = 0.0;
  double step_max = 0.0;
  Index safeguards = 0;

  friend bool operator==(const TraceRecord &, const TraceRecord &) = default;
};

struct StepRecord {
  Index epoch = 0;
  Index k = 0;
  double eta = 0.0;
  double candidate = 0.0;
  bool candidate_valid = false;
  bool safeguarded = false;
  double hedge = 1.0;
  double bb1 = 0.0;
  double bb2 = 0.0;
};

struct RunTrace {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<TraceRecord> records;
  std::vector<StepRecord> steps;
  std::uint64_t component_evaluations = 0;
  Index inner_steps = 0;
  Index safeguarded_steps = 0;
};

/// A non-finite iterate; carries the trace up to the last finite record.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string &what, RunTrace trace) : Error(what), trace_(std::move(trace)) {}
  const RunTrace &trace() const noexcept { return trace_; }

 private:
  RunTrace trace_;
};

/// Snapshot handed to an inner-loop observer before each update.
template <typename Scalar>
struct InnerState {
  Index epoch;
  Index k;
  const typename Types<Scalar>::Vector &w;
  const typename Types<Scalar>::Vector &estimate;
};

template <typename Scalar>
using InnerObserver = std::function<void(const InnerState<Scalar> &)>;

/// What the engines need from a finite-sum problem.
template <typename P>
concept FiniteSumProblem = requires(const P &p, const typename P::Vector &w, std::span<const Index> subset,
                                    std::span<const typename P::Scalar> scales) {
  { p.n() } -> std::convertible_to<Index>;
  { p.dim() } -> std::convertible_to<Index>;
  p.data();
  { objective(p, w) } -> std::convertible_to<typename P::Scalar>;
  { full_gradient(p, w) } -> std::convertible_to<typename P::Vector>;
  { subset_gradient_difference(p, w, w, subset, scales) } -> std::convertible_to<typename P::Vector>;
};

/// passes = component-gradient evaluations / n
inline double effective_passes(std::uint64_t evaluations, Index n) {
  return static_cast<double>(evaluations) / static_cast<double>(n);
}

template <typename Scalar>
SamplingDistribution<Scalar> make_distribution(const SparseDataset<Scalar> &data, const DistributionChoice &choice) {
  switch (choice.kind) {
    case DistributionKind::Option1:
      return option1_distribution(data, static_cast<Scalar>(choice.tau));
    case DistributionKind::Option2:
      return option2_distribution(data, static_cast<Scalar>(choice.tau));
    default:
      return uniform_distribution<Scalar>(data.n());
  }
}

namespace detail {

/// Stream ids for the independent sample sequences of one run.
enum : std::uint64_t { kStreamEstimator = 1, kStreamBatch1 = 2, kStreamBatch2 = 3 };

template <typename P>
class RunState {
 public:
  using Scalar = typename P::Scalar;
  using Vector = typename P::Vector;

  RunState(const P &problem, const RunConfig &cfg) : problem_(problem), cfg_(cfg) {
    trace_.label = cfg.label;
    trace_.seed = cfg.seed;
  }

  void count(std::uint64_t evaluations) { trace_.component_evaluations += evaluations; }

  void note_step(Index epoch, Index k, double eta, bool safeguarded, const StepOutcome<Scalar> *outcome = nullptr) {
    step_min_ = std::min(step_min_, eta);
    step_max_ = std::max(step_max_, eta);
    step_sum_ += eta;
    ++step_count_;
    if (safeguarded) {
      ++safeguards_;
      ++trace_.safeguarded_steps;
    }
    if (k > 0) ++trace_.inner_steps;
    if (cfg_.record_steps) {
      StepRecord r{epoch, k, eta, eta, true, safeguarded, 1.0, 0.0, 0.0};
      if (outcome) {
        r.candidate = static_cast<double>(outcome->candidate);
        r.candidate_valid = outcome->candidate_valid;
        r.hedge = outcome->hedge;
        r.bb1 = static_cast<double>(outcome->bb1.value);
        r.bb2 = static_cast<double>(outcome->bb2.value);
      }
      trace_.steps.push_back(r);
    }
  }

  void check_finite(const Vector &w, Index epoch, Index k) {
    if (!w.allFinite())
      throw DivergenceError("non-finite iterate at epoch " + std::to_string(epoch) + ", inner step " +
                                std::to_string(k),
                            trace_);
  }

  void record(const Vector &w, Index epoch, Index inner_step) {
    TraceRecord r;
    r.epoch = epoch;
    r.inner_step = inner_step;
    r.effective_passes = effective_passes(trace_.component_evaluations, problem_.n());
    r.grad_norm = static_cast<double>(full_gradient(problem_, w).norm());
    r.objective = static_cast<double>(objective(problem_, w));
    if (step_count_ > 0) {
      r.step_min = step_min_;
      r.step_max = step_max_;
      r.step_mean = step_sum_ / static_cast<double>(step_count_);
    }
    r.safeguards = safeguards_;
    if (!std::isfinite(r.grad_norm) || !std::isfinite(r.objective))
      throw DivergenceError("non-finite objective or gradient at epoch " + std::to_string(epoch), trace_);
    trace_.records.push_back(r);
    step_min_ = std::numeric_limits<double>::infinity();
    step_max_ = -std::numeric_limits<double>::infinity();
    step_sum_ = 0.0;
    step_count_ = 0;
    safeguards_ = 0;
  }

  RunTrace take() { return std::move(trace_); }

 private:
  const P &problem_;
  const RunConfig &cfg_;
  RunTrace trace_;
  double step_min_ = std::numeric_limits<double>::infinity();
  double step_max_ = -std::numeric_limits<double>::infinity();
  double step_sum_ = 0.0;
  Index step_count_ = 0;
  Index safeguards_ = 0;
};

/// Shared MB-SARAH / mS2GD loop; the two differ only in the estimator.
template <FiniteSumProblem P>
RunTrace run_hedged_engine(const P &problem, const RunConfig &cfg, const Rng &rng, bool recursive,
                           const InnerObserver<typename P::Scalar> &observer) {
  using Scalar = typename P::Scalar;
  using Vector = typename P::Vector;
  const Index n = problem.n();
  cfg.validate(n);
  const Index m = cfg.inner_length(n);
  const auto mode = recursive ? StepMode::MbSarah : StepMode::Ms2gd;
  const auto &hedge = cfg.hedge;

  const auto q = make_distribution(problem.data(), cfg.distribution);
  const std::span<const Scalar> scales = cfg.uses_importance_weights() ? q.importance() : std::span<const Scalar>{};
  const bool hedged_rule = cfg.rule == StepRule::Rhbb || cfg.rule == StepRule::RhbbPlus;
  const bool stepsize_counted = cfg.count_stepsize_passes;

  Rng rng_s = rng.split(kStreamEstimator);
  Rng rng_1 = rng.split(kStreamBatch1);
  Rng rng_2 = rng.split(kStreamBatch2);

  RunState<P> state(problem, cfg);
  Vector w_tilde = Vector::Zero(problem.dim());
  state.record(w_tilde, 0, 0);
  StepGuard<Scalar> guard(static_cast<Scalar>(cfg.eta0.front()));

  for (Index s = 1; s <= cfg.epochs; ++s) {
    const auto eta0 = static_cast<Scalar>(cfg.eta0[static_cast<std::size_t>((s - 1)) % cfg.eta0.size()]);
    guard.set_cold_start(static_cast<Scalar>(hedge.fallback_c.value_or(static_cast<double>(eta0))));

    const Vector anchor = w_tilde;
    const Vector anchor_grad = full_gradient(problem, anchor);
    state.count(static_cast<std::uint64_t>(n));
    Vector v = anchor_grad;
    if (observer) observer({s, 0, anchor, v});
    Vector w_prev = anchor;
    Vector w = anchor - eta0 * v;
    state.note_step(s, 0, static_cast<double>(eta0), false);
    state.check_finite(w, s, 0);

    for (Index k = 1; k < m; ++k) {
      const auto batch = draw_uniform_subset(rng_s, n, cfg.b);
      if (recursive)
        v += subset_gradient_difference(problem, w, w_prev, batch);
      else
        v = subset_gradient_difference(problem, w, anchor, batch) + anchor_grad;
      state.count(2 * static_cast<std::uint64_t>(cfg.b));
      if (observer) observer({s, k, w, v});

      Scalar eta;
      if (cfg.rule == StepRule::Constant) {
        eta = static_cast<Scalar>(cfg.eta);
        state.note_step(s, k, static_cast<double>(eta), false);
      } else {
        CurvatureSnapshot<Scalar> snap;
        snap.s_vec = w - w_prev;
        const auto s1 = draw_step_batch(rng_1, q, hedge.b1);
        snap.y1 = subset_gradient_difference(problem, w, w_prev, s1, scales);
        if (stepsize_counted) state.count(2 * static_cast<std::uint64_t>(hedge.b1));
        StepOutcome<Scalar> out;
        if (hedged_rule) {
          if (hedge_coefficient(hedge, s, k) != 1.0) {
            const auto s2 = draw_step_batch(rng_2, q, hedge.b2);
            snap.y2 = subset_gradient_difference(problem, w, w_prev, s2, scales);
            if (stepsize_counted) state.count(2 * static_cast<std::uint64_t>(hedge.b2));
          }
          out = rhbb_step(snap, hedge, s, k, mode, guard);
        } else {
          out = rbb_step(snap, hedge, mode, guard);
        }
        eta = out.eta;
        state.note_step(s, k, static_cast<double>(eta), out.safeguarded, &out);
      }

      w_prev = w;
      w -= eta * v;
      state.check_finite(w, s, k);
      if (cfg.eval_every > 0 && k % cfg.eval_every == 0 && k + 1 < m) state.record(w, s, k);
    }
    w_tilde = w;
    state.record(w_tilde, s, m);
  }
  return state.take();
}

template <FiniteSumProblem P>
RunTrace run_svrg_engine(const P &problem, const RunConfig &cfg, const Rng &rng, bool bb_step) {
  using Scalar = typename P::Scalar;
  using Vector = typename P::Vector;
  const Index n = problem.n();
  cfg.validate(n);
  const Index m = cfg.inner_length(n);
  Rng rng_s = rng.split(kStreamEstimator);

  RunState<P> state(problem, cfg);
  Vector w_tilde = Vector::Zero(problem.dim());
  state.record(w_tilde, 0, 0);
  StepGuard<Scalar> guard(static_cast<Scalar>(cfg.eta0.front()));
  Vector prev_snapshot, prev_grad;

  for (Index s = 1; s <= cfg.epochs; ++s) {
    const Vector anchor = w_tilde;
    const Vector anchor_grad = full_gradient(problem, anchor);
    state.count(static_cast<std::uint64_t>(n));

    Scalar eta = static_cast<Scalar>(cfg.eta);
    bool replaced = false;
    StepOutcome<Scalar> out;
    if (bb_step) {
      const auto eta0 = static_cast<Scalar>(cfg.eta0[static_cast<std::size_t>(s - 1) % cfg.eta0.size()]);
      if (s == 1) {
        eta = eta0;
      } else {
        guard.set_cold_start(eta0);
        const Vector ds = anchor - prev_snapshot;
        const Vector dg = anchor_grad - prev_grad;
        out.bb1 = bb1_raw(ds, dg);
        out.candidate = out.bb1.value / static_cast<Scalar>(m);
        out.candidate_valid = out.bb1.valid && out.candidate > Scalar(0);
        std::tie(eta, replaced) = guard.apply(out.candidate_valid ? std::optional<Scalar>(out.candidate)
                                                                  : std::nullopt);
        out.eta = eta;
      }
      prev_snapshot = anchor;
      prev_grad = anchor_grad;
    }

    Vector w = anchor;
    for (Index t = 0; t < m; ++t) {
      const auto batch = draw_uniform_subset(rng_s, n, cfg.b);
      const Vector g = subset_gradient_difference(problem, w, anchor, batch) + anchor_grad;
      state.count(2 * static_cast<std::uint64_t>(cfg.b));
      w -= eta * g;
      state.check_finite(w, s, t + 1);
      if (cfg.eval_every > 0 && (t + 1) % cfg.eval_every == 0 && t + 1 < m) state.record(w, s, t + 1);
    }
    state.note_step(s, 0, static_cast<double>(eta), replaced, bb_step && s > 1 ? &out : nullptr);
    w_tilde = w;
    state.record(w_tilde, s, m);
  }
  return state.take();
}

}  // namespace detail

/// MB-SARAH with the configured inner rule (RHBB, RHBB+, RBB, RBB+ or a
/// constant step).
template <FiniteSumProblem P>
RunTrace run_mb_sarah(const P &problem, const RunConfig &cfg, const Rng &rng,
                      const InnerObserver<typename P::Scalar> &observer = {}) {
  return detail::run_hedged_engine(problem, cfg, rng, true, observer);
}

/// mS2GD with the configured inner rule.
template <FiniteSumProblem P>
RunTrace run_ms2gd(const P &problem, const RunConfig &cfg, const Rng &rng,
                   const InnerObserver<typename P::Scalar> &observer = {}) {
  return detail::run_hedged_engine(problem, cfg, rng, false, observer);
}

/// SVRG with the constant step `cfg.eta`; the snapshot is the last iterate.
template <FiniteSumProblem P>
RunTrace run_svrg(const P &problem, const RunConfig &cfg, const Rng &rng) {
  return detail::run_svrg_engine(problem, cfg, rng, false);
}

/// SVRG-BB: eta0 in the first epoch, then BB1 on successive snapshots / m.
template <FiniteSumProblem P>
RunTrace run_svrg_bb(const P &problem, const RunConfig &cfg, const Rng &rng) {
  return detail::run_svrg_engine(problem, cfg, rng, true);
}

template <FiniteSumProblem P>
RunTrace run(const P &problem, const RunConfig &cfg, const Rng &rng) {
  switch (cfg.algorithm) {
    case Algorithm::MbSarah:
      return run_mb_sarah(problem, cfg, rng);
    case Algorithm::Ms2gd:
      return run_ms2gd(problem, cfg, rng);
    case Algorithm::Svrg:
      return run_svrg(problem, cfg, rng);
    case Algorithm::SvrgBb:
      return run_svrg_bb(problem, cfg, rng);
  }
  throw ContractViolation("unknown algorithm");
}

/// Single epoch of the configured engine with a record every `eval_every`
/// inner steps (default m / 20).
template <FiniteSumProblem P>
RunTrace run_inner_only(const P &problem, RunConfig cfg, const Rng &rng) {
  cfg.epochs = 1;
  if (cfg.eval_every == 0) cfg.eval_every = std::max<Index>(1, cfg.inner_length(problem.n()) / 20);
  return run(problem, cfg, rng);
}

}  // namespace vrbb
