#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vrbb/data.hpp"
#include "vrbb/optimizers.hpp"

namespace vrbb {

/// Everything one `run` invocation executes: every run config against every
/// seed on a single dataset.
struct ExperimentSuite {
  std::string name = "suite";
  std::string description;
  std::string dataset;
  std::uint64_t dataset_seed = 2024;
  /// Row cap applied to surrogate datasets only.
  std::optional<Index> dataset_rows;
  double lambda = 1e-2;
  std::vector<RunConfig> runs;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "out";

  // Optional inputs for the theory report.
  std::optional<double> theory_eps;
  std::optional<double> theory_sigma0;
  std::optional<double> theory_zeta;
  std::optional<double> theory_delta;

  void validate() const;
};

/// Run-level keys accepted in `defaults`, in each `runs[i]` and at top level.
const std::vector<std::string> &run_config_keys();

/// Builds a suite from a parsed JSON document; `origin` prefixes error messages.
ExperimentSuite parse_suite(std::string_view json_text, const std::string &origin = "config");
ExperimentSuite load_config(const std::filesystem::path &path);

struct SuiteOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
  bool exclude_stepsize_passes = false;
};
void apply_overrides(ExperimentSuite &suite, const SuiteOverrides &overrides);

/// Default label such as "mb-sarah-rhbb(3)".
std::string default_label(const RunConfig &cfg);
std::string to_string(Algorithm a);
std::string to_string(StepRule r);

enum class RunStatus { Ok, Diverged, Failed };
std::string to_string(RunStatus s);

struct RunOutcome {
  std::string label;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::Ok;
  std::string message;
  std::filesystem::path file;
  RunTrace trace;
};

struct SuiteResult {
  std::string data_source;
  std::vector<RunOutcome> runs;
  bool any_diverged() const;
};

/// Runs every (config, seed) pair on `data`, `threads` at a time (0 = all
/// cores), writing one CSV per pair when `write_files` is set. Output does not
/// depend on `threads`.
SuiteResult run_suite(const ExperimentSuite &suite, const Dataset &data, unsigned threads = 0,
                      bool write_files = true);
SuiteResult run_suite(const ExperimentSuite &suite, unsigned threads = 0, bool write_files = true);

/// Runs one configuration (honouring `inner_only`) and never throws on divergence.
RunOutcome execute_run(const LogisticL2Problem<double> &problem, const RunConfig &cfg, std::uint64_t seed);

// ---- trace files ------------------------------------------------------------

inline constexpr std::string_view kTraceHeader =
    "algo,seed,epoch,effective_passes,grad_norm,objective,step_min,step_mean,step_max,safeguards,status";

std::string trace_file_name(std::string_view label, std::uint64_t seed);
void write_trace_csv(std::ostream &out, const RunTrace &trace, RunStatus status);

struct TraceTable {
  std::string label;
  std::uint64_t seed = 0;
  std::string status = "ok";
  std::vector<TraceRecord> records;
};

TraceTable read_trace_csv(std::istream &in, const std::string &origin = "trace");
/// Every *.csv in `dir`, sorted by file name.
std::vector<TraceTable> read_trace_dir(const std::filesystem::path &dir);
TraceTable to_table(const RunOutcome &run);

// ---- summaries --------------------------------------------------------------

/// First effective pass count at which grad_norm <= tol, linearly
/// interpolated between the two bracketing records; +inf if never reached.
double passes_to_tolerance(std::span<const TraceRecord> records, double tol);

struct AlgorithmSummary {
  std::string label;
  std::vector<std::uint64_t> seeds;
  std::vector<double> passes;
  std::vector<double> final_grad_norms;
  double median_passes = std::numeric_limits<double>::infinity();
  double median_final_grad_norm = std::numeric_limits<double>::infinity();
};

struct SummaryReport {
  double tolerance = 0.0;
  std::vector<AlgorithmSummary> algorithms;
  /// Labels with a finite median, fastest first.
  std::vector<std::string> ranking;
  /// wins[i][j]: seeds on which algorithm i reached the tolerance in strictly
  /// fewer passes than algorithm j.
  std::vector<std::vector<int>> wins;
  std::vector<std::string> warnings;
};

double median(std::vector<double> values);
SummaryReport summarize(const std::vector<TraceTable> &traces, double tol);
std::string format_report(const SummaryReport &report);

// ---- plot data --------------------------------------------------------------

struct PlotEmission {
  std::vector<std::filesystem::path> files;
  std::filesystem::path manifest;
  std::size_t clamped_rows = 0;
};

/// One two-column (passes, grad_norm) file per trace plus `manifest.txt`.
/// Non-positive grad norms are clamped to the smallest positive double so
/// log-scale plots stay valid.
PlotEmission emit_plot_data(const std::vector<TraceTable> &traces, const std::filesystem::path &dir);

// ---- theory report ----------------------------------------------------------

struct TheoryRow {
  std::string label;
  Index m = 0;
  Index b = 0;
  double b_bar = 0.0;
  double alpha_hat = 1.0;
  double alpha_tilde = 1.0;
  double kappa = 0.0;
  double kappa_plus = 0.0;
  double condition_lhs = std::numeric_limits<double>::quiet_NaN();
  double inner_rate = std::numeric_limits<double>::quiet_NaN();
  double outer_rate = std::numeric_limits<double>::quiet_NaN();
  double ms2gd_rate = std::numeric_limits<double>::quiet_NaN();
  double step_bound = std::numeric_limits<double>::quiet_NaN();
  std::optional<long long> m_required;
  std::optional<long long> s_required;
  std::optional<double> gradient_dominated_rate;
  bool feasible = false;
  std::string note;
};

std::vector<TheoryRow> theory_report(const ExperimentSuite &suite, const Dataset &data);
/// Human-readable lines followed by a CSV block.
std::string format_theory(const std::vector<TheoryRow> &rows);

}  // namespace vrbb
