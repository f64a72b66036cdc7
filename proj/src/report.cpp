#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "vrbb/harness.hpp"
#include "vrbb/theory.hpp"

namespace vrbb {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, const char *spec = "%.6g") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

double passes_to_tolerance(std::span<const TraceRecord> records, double tol) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto &r = records[i];
    if (!(r.grad_norm <= tol)) continue;
    if (i == 0) return r.effective_passes;
    const auto &p = records[i - 1];
    const double drop = p.grad_norm - r.grad_norm;
    if (!(drop > 0.0)) return r.effective_passes;
    const double t = (p.grad_norm - tol) / drop;
    return p.effective_passes + t * (r.effective_passes - p.effective_passes);
  }
  return std::numeric_limits<double>::infinity();
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  if (values.size() % 2 == 1) return values[h];
  const double a = values[h - 1], b = values[h];
  if (std::isinf(a) || std::isinf(b)) return b;
  return 0.5 * (a + b);
}

SummaryReport summarize(const std::vector<TraceTable> &traces, double tol) {
  if (traces.empty()) throw ContractViolation("summarize needs at least one trace");
  SummaryReport rep;
  rep.tolerance = tol;
  std::map<std::string, std::size_t> index;
  for (const auto &t : traces) {
    auto [it, fresh] = index.try_emplace(t.label, rep.algorithms.size());
    if (fresh) rep.algorithms.push_back({t.label, {}, {}, {}});
    auto &a = rep.algorithms[it->second];
    a.seeds.push_back(t.seed);
    a.passes.push_back(passes_to_tolerance(t.records, tol));
    a.final_grad_norms.push_back(t.records.empty() ? std::numeric_limits<double>::infinity()
                                                   : t.records.back().grad_norm);
    if (t.status != "ok") rep.warnings.push_back(t.label + " seed " + std::to_string(t.seed) + ": " + t.status);
  }
  for (auto &a : rep.algorithms) {
    a.median_passes = median(a.passes);
    a.median_final_grad_norm = median(a.final_grad_norms);
  }

  std::vector<const AlgorithmSummary *> finite;
  for (const auto &a : rep.algorithms)
    if (std::isfinite(a.median_passes)) finite.push_back(&a);
  std::stable_sort(finite.begin(), finite.end(),
                   [](auto *x, auto *y) { return x->median_passes < y->median_passes; });
  for (auto *a : finite) rep.ranking.push_back(a->label);
  if (rep.ranking.empty()) rep.warnings.push_back("no algorithm reached the tolerance " + fmt(tol));

  const std::size_t k = rep.algorithms.size();
  rep.wins.assign(k, std::vector<int>(k, 0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      const auto &a = rep.algorithms[i], &b = rep.algorithms[j];
      for (std::size_t si = 0; si < a.seeds.size(); ++si)
        for (std::size_t sj = 0; sj < b.seeds.size(); ++sj)
          if (a.seeds[si] == b.seeds[sj] && a.passes[si] < b.passes[sj]) ++rep.wins[i][j];
    }
  return rep;
}

std::string format_report(const SummaryReport &rep) {
  std::ostringstream out;
  out << "tolerance " << fmt(rep.tolerance) << "\n\n";
  out << "algorithm, runs, median passes to tolerance, median final grad_norm\n";
  for (const auto &a : rep.algorithms)
    out << a.label << ", " << a.passes.size() << ", " << fmt(a.median_passes) << ", "
        << fmt(a.median_final_grad_norm) << "\n";
  out << "\nranking:";
  if (rep.ranking.empty()) out << " (empty)";
  for (std::size_t i = 0; i < rep.ranking.size(); ++i) out << (i ? " < " : " ") << rep.ranking[i];
  out << "\n\nwins (row beat column on matched seeds):\n";
  for (std::size_t i = 0; i < rep.algorithms.size(); ++i) {
    out << "  [" << i << "] " << rep.algorithms[i].label << ":";
    for (int w : rep.wins[i]) out << ' ' << w;
    out << "\n";
  }
  for (const auto &w : rep.warnings) out << "warning: " << w << "\n";
  return out.str();
}

PlotEmission emit_plot_data(const std::vector<TraceTable> &traces, const fs::path &dir) {
  fs::create_directories(dir);
  PlotEmission em;
  em.manifest = dir / "manifest.txt";
  std::ofstream manifest(em.manifest, std::ios::trunc);
  manifest << "# file\tcaption\n";
  for (const auto &t : traces) {
    auto name = trace_file_name(t.label, t.seed);
    name.replace(name.size() - 4, 4, ".dat");
    const auto path = dir / name;
    std::ofstream f(path, std::ios::trunc);
    f << "# effective_passes grad_norm\n";
    for (const auto &r : t.records) {
      double g = r.grad_norm;
      if (!(g > 0.0)) {
        g = std::numeric_limits<double>::min();
        ++em.clamped_rows;
      }
      char buf[96];
      std::snprintf(buf, sizeof buf, "%.17g %.17g\n", r.effective_passes, g);
      f << buf;
    }
    manifest << name << '\t' << t.label << " (seed " << t.seed << ")\n";
    em.files.push_back(path);
  }
  if (em.clamped_rows > 0)
    manifest << "# " << em.clamped_rows << " non-positive grad_norm values clamped to " << fmt(std::numeric_limits<double>::min()) << "\n";
  return em;
}

std::vector<TheoryRow> theory_report(const ExperimentSuite &suite, const Dataset &data) {
  const LogisticL2Problem<double> problem(data, suite.lambda);
  const double L = smoothness_constant(problem), mu = strong_convexity_constant(problem);
  std::vector<TheoryRow> rows;
  for (const auto &cfg : suite.runs) {
    TheoryRow row;
    row.label = cfg.label;
    row.m = cfg.inner_length(problem.n());
    row.b = cfg.b;
    const bool hedged_engine = cfg.algorithm == Algorithm::MbSarah || cfg.algorithm == Algorithm::Ms2gd;
    if (!hedged_engine || cfg.rule == StepRule::Constant) {
      row.kappa = L / mu;
      row.kappa_plus = row.kappa;
      row.note = "no hedged-BB theory for this configuration";
      rows.push_back(row);
      continue;
    }
    const bool hedged = cfg.rule == StepRule::Rhbb || cfg.rule == StepRule::RhbbPlus;
    const bool plus = cfg.uses_importance_weights();
    const HedgeBounds bounds = hedged ? hedge_bounds(cfg.hedge, cfg.epochs, row.m) : HedgeBounds{1.0, 1.0};
    const auto q = make_distribution(data, cfg.distribution);
    const auto k = compute_constants(L, mu, q, bounds);
    row.b_bar = static_cast<double>(hedged ? cfg.hedge.b_bar() : cfg.hedge.b1);
    row.alpha_hat = k.alpha_hat;
    row.alpha_tilde = k.alpha_tilde;
    row.kappa = k.kappa;
    row.kappa_plus = k.kappa_plus;
    const bool sarah = cfg.algorithm == Algorithm::MbSarah;
    const double prefactor = sarah ? cfg.hedge.gamma : cfg.hedge.gamma2;
    row.step_bound = plus ? rhbb_plus_step_upper_bound(k, prefactor, row.b_bar)
                          : rhbb_step_upper_bound(k, prefactor, row.b_bar);
    try {
      if (sarah) {
        const double g = cfg.hedge.gamma;
        row.condition_lhs = plus ? sarah_plus_condition_lhs(cfg.b, g, row.m, problem.n(), row.b_bar, k)
                                 : sarah_condition_lhs(cfg.b, g, row.m, problem.n(), row.b_bar, k);
        row.inner_rate = plus ? sarah_inner_rate_plus(row.m, k, g, row.b_bar) : sarah_inner_rate(row.m, k, g, row.b_bar);
        row.outer_rate = plus ? sarah_outer_rate_plus(row.m, k, g, row.b_bar) : sarah_outer_rate(row.m, k, g, row.b_bar);
        row.feasible = row.condition_lhs <= 1.0 && row.outer_rate < 1.0;
        if (suite.theory_eps && suite.theory_sigma0)
          row.m_required = plus ? sarah_m_required_plus(*suite.theory_eps, *suite.theory_sigma0, k, g, row.b_bar)
                                : sarah_m_required(*suite.theory_eps, *suite.theory_sigma0, k, g, row.b_bar);
        if (suite.theory_eps && suite.theory_zeta)
          row.s_required = plus ? sarah_s_required_plus(*suite.theory_eps, *suite.theory_zeta, row.m, k, g, row.b_bar)
                                : sarah_s_required(*suite.theory_eps, *suite.theory_zeta, row.m, k, g, row.b_bar);
        if (suite.theory_delta) {
          const auto gd = gradient_dominated_rates(*suite.theory_delta, k, g, row.m, row.b_bar);
          row.gradient_dominated_rate = plus ? gd.rho_plus : gd.rho;
        }
      } else {
        const auto r = plus ? ms2gd_plus_rate(row.m, cfg.b, row.b_bar, cfg.hedge.gamma2, k)
                            : ms2gd_rate(row.m, cfg.b, row.b_bar, cfg.hedge.gamma2, k);
        row.ms2gd_rate = r.value;
        row.feasible = r.feasible;
      }
    } catch (const InfeasibleConfiguration &e) {
      row.feasible = false;
      row.note = std::string(e.what()) + " (margin " + fmt(e.margin()) + ")";
    } catch (const ContractViolation &e) {
      row.feasible = false;
      row.note = e.what();
    }
    if (row.note.empty() && !row.feasible) row.note = "theoretical condition not met";
    rows.push_back(row);
  }
  return rows;
}

std::string format_theory(const std::vector<TheoryRow> &rows) {
  std::ostringstream out;
  auto opt = [](const auto &o) { return o ? fmt(static_cast<double>(*o)) : std::string("-"); };
  for (const auto &r : rows) {
    out << r.label << ": " << (r.feasible ? "feasible" : "not feasible") << "\n"
        << "  m=" << r.m << " b=" << r.b << " b_bar=" << fmt(r.b_bar) << " alpha_hat=" << fmt(r.alpha_hat)
        << " alpha_tilde=" << fmt(r.alpha_tilde) << " kappa=" << fmt(r.kappa) << " kappa+=" << fmt(r.kappa_plus)
        << "\n";
    if (!std::isnan(r.condition_lhs))
      out << "  condition lhs=" << fmt(r.condition_lhs) << " (<= 1 needed), inner rate=" << fmt(r.inner_rate)
          << ", per-epoch factor=" << fmt(r.outer_rate) << "\n";
    if (!std::isnan(r.ms2gd_rate)) out << "  linear rate=" << fmt(r.ms2gd_rate) << " (< 1 needed)\n";
    if (!std::isnan(r.step_bound)) out << "  step upper bound=" << fmt(r.step_bound) << "\n";
    if (r.m_required || r.s_required || r.gradient_dominated_rate)
      out << "  m required=" << opt(r.m_required) << " s required=" << opt(r.s_required)
          << " gradient-dominated rate=" << opt(r.gradient_dominated_rate) << "\n";
    if (!r.note.empty()) out << "  note: " << r.note << "\n";
  }
  out << "\nlabel,m,b,b_bar,alpha_hat,alpha_tilde,kappa,kappa_plus,condition_lhs,inner_rate,outer_rate,ms2gd_rate,"
         "step_bound,m_required,s_required,gradient_dominated_rate,feasible\n";
  for (const auto &r : rows) {
    const auto g = [](double v) { return fmt(v, "%.17g"); };
    out << r.label << ',' << r.m << ',' << r.b << ',' << g(r.b_bar) << ',' << g(r.alpha_hat) << ','
        << g(r.alpha_tilde) << ',' << g(r.kappa) << ',' << g(r.kappa_plus) << ',' << g(r.condition_lhs) << ','
        << g(r.inner_rate) << ',' << g(r.outer_rate) << ',' << g(r.ms2gd_rate) << ',' << g(r.step_bound) << ','
        << (r.m_required ? std::to_string(*r.m_required) : "") << ','
        << (r.s_required ? std::to_string(*r.s_required) : "") << ','
        << (r.gradient_dominated_rate ? g(*r.gradient_dominated_rate) : "") << ',' << (r.feasible ? 1 : 0)
        << "\n";
  }
  return out.str();
}

}  // namespace vrbb
