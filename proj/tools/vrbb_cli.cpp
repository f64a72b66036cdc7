#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "vrbb/harness.hpp"
#include "vrbb/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;

int cmd_run(const std::string &config, const vrbb::SuiteOverrides &overrides, unsigned threads) {
  auto suite = vrbb::load_config(config);
  vrbb::apply_overrides(suite, overrides);
  const auto result = vrbb::run_suite(suite, threads);
  std::cout << "suite " << suite.name << " on " << result.data_source << "\n";
  for (const auto &r : result.runs) {
    std::cout << "  " << r.label << " seed " << r.seed << ": " << vrbb::to_string(r.status);
    if (!r.trace.records.empty()) {
      const auto &last = r.trace.records.back();
      std::printf(" (passes %.4g, grad_norm %.4g)", last.effective_passes, last.grad_norm);
      std::cout.flush();
    }
    if (!r.message.empty()) std::cout << " - " << r.message;
    std::cout << "\n";
  }
  std::cout << "traces written to " << suite.output_dir.string() << "\n";
  return result.any_diverged() ? kExitDiverged : kExitOk;
}

int cmd_theory(const std::string &config) {
  const auto suite = vrbb::load_config(config);
  const auto data = vrbb::load_dataset(suite.dataset, suite.dataset_seed, suite.dataset_rows);
  std::cout << "dataset: " << data.source << "\n\n" << vrbb::format_theory(vrbb::theory_report(suite, data.data));
  return kExitOk;
}

int cmd_summarize(const std::string &dir, double tol, const std::string &plot_dir) {
  const auto traces = vrbb::read_trace_dir(dir);
  if (traces.empty()) throw vrbb::ConfigError("no trace files in " + dir);
  std::cout << vrbb::format_report(vrbb::summarize(traces, tol));
  if (!plot_dir.empty()) {
    const auto em = vrbb::emit_plot_data(traces, plot_dir);
    std::cout << "plot data: " << em.files.size() << " files, manifest " << em.manifest.string() << "\n";
    if (em.clamped_rows > 0) std::cout << "notice: " << em.clamped_rows << " non-positive grad_norm rows clamped\n";
  }
  return kExitOk;
}

int cmd_parse_check(const std::string &path) {
  const auto loaded = vrbb::load_dataset(path);
  const auto &d = loaded.data;
  std::size_t positives = 0;
  for (vrbb::Index i = 0; i < d.n(); ++i) positives += d.label(i) > 0 ? 1 : 0;
  std::cout << loaded.source << ": n=" << d.n() << " d=" << d.d() << " nnz=" << d.features().nonZeros()
            << " positives=" << positives << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Variance-reduced stochastic optimisation with hedged Barzilai-Borwein steps"};
  app.require_subcommand(1);

  std::string config, dir, dataset, plot_dir;
  vrbb::SuiteOverrides overrides;
  std::uint64_t seed = 0;
  std::string out_dir;
  unsigned threads = 0;
  double tol = 1e-3;

  auto *run = app.add_subcommand("run", "run every (config, seed) pair of a suite");
  run->add_option("config", config, "suite config (JSON)")->required();
  auto *seed_opt = run->add_option("--seed", seed, "run a single seed instead of the configured list");
  auto *out_opt = run->add_option("--out", out_dir, "output directory");
  run->add_flag("--exclude-stepsize-passes", overrides.exclude_stepsize_passes,
                "do not count step-size batches in effective passes");
  run->add_option("--threads", threads, "concurrent runs (0 = all cores)");

  auto *theory = app.add_subcommand("theory", "feasibility report for each run config");
  theory->add_option("config", config, "suite config (JSON)")->required();

  auto *summarize = app.add_subcommand("summarize", "passes-to-tolerance summary of a trace directory");
  summarize->add_option("dir", dir, "directory of trace CSV files")->required();
  summarize->add_option("--tol", tol, "gradient-norm tolerance")->default_val(1e-3);
  summarize->add_option("--plot-dir", plot_dir, "also write gnuplot data files here");

  auto *parse_check = app.add_subcommand("parse-check", "load a LIBSVM file (or surrogate name) and report its shape");
  parse_check->add_option("dataset", dataset, "path or dataset name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      if (*seed_opt) overrides.seed = seed;
      if (*out_opt) overrides.output_dir = out_dir;
      return cmd_run(config, overrides, threads);
    }
    if (*theory) return cmd_theory(config);
    if (*summarize) return cmd_summarize(dir, tol, plot_dir);
    if (*parse_check) return cmd_parse_check(dataset);
  } catch (const vrbb::Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
