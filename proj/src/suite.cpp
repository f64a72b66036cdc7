#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "vrbb/harness.hpp"
#include "vrbb/synthetic.hpp"

namespace vrbb {

namespace fs = std::filesystem;

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::Failed: return "failed";
  }
  return "?";
}

bool SuiteResult::any_diverged() const {
  for (const auto &r : runs)
    if (r.status != RunStatus::Ok) return true;
  return false;
}

RunOutcome execute_run(const LogisticL2Problem<double> &problem, const RunConfig &cfg, std::uint64_t seed) {
  RunOutcome out;
  out.label = cfg.label;
  out.seed = seed;
  RunConfig c = cfg;
  c.seed = seed;
  const Rng rng(seed);
  try {
    out.trace = c.inner_only ? run_inner_only(problem, c, rng) : run(problem, c, rng);
  } catch (const DivergenceError &e) {
    out.status = RunStatus::Diverged;
    out.message = e.what();
    out.trace = e.trace();
  } catch (const Error &e) {
    // Configuration problems that only show up against the data (b > n, ...).
    out.status = RunStatus::Failed;
    out.message = e.what();
    out.trace.label = c.label;
    out.trace.seed = seed;
  }
  out.trace.label = c.label;
  out.trace.seed = seed;
  return out;
}

std::string trace_file_name(std::string_view label, std::uint64_t seed) {
  std::string name;
  for (char ch : label) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) || ch == '-' || ch == '.')
      name += ch;
    else if (ch == '+')
      name += "plus";
    else if (!name.empty() && name.back() != '_')
      name += '_';
  }
  while (!name.empty() && name.back() == '_') name.pop_back();
  return name + "_seed" + std::to_string(seed) + ".csv";
}

namespace {

void put_real(std::ostream &out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  return fields;
}

}  // namespace

void write_trace_csv(std::ostream &out, const RunTrace &trace, RunStatus status) {
  out << kTraceHeader << '\n';
  const auto algo = csv_field(trace.label);
  const auto st = to_string(status);
  for (const auto &r : trace.records) {
    out << algo << ',' << trace.seed << ',' << r.epoch << ',';
    put_real(out, r.effective_passes);
    out << ',';
    put_real(out, r.grad_norm);
    out << ',';
    put_real(out, r.objective);
    out << ',';
    put_real(out, r.step_min);
    out << ',';
    put_real(out, r.step_mean);
    out << ',';
    put_real(out, r.step_max);
    out << ',' << r.safeguards << ',' << st << '\n';
  }
}

TraceTable read_trace_csv(std::istream &in, const std::string &origin) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, origin + ": empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // The status column is optional so traces from other tools still load.
  const bool has_status = line == kTraceHeader;
  if (!has_status && line != kTraceHeader.substr(0, kTraceHeader.rfind(',')))
    throw ParseError(1, origin + ": unexpected header");
  TraceTable t;
  std::size_t lineno = 1;
  const std::size_t expected = has_status ? 11 : 10;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != expected) throw ParseError(lineno, origin + ": expected " + std::to_string(expected) + " fields");
    try {
      t.label = f[0];
      t.seed = std::stoull(f[1]);
      TraceRecord r;
      r.epoch = std::stoll(f[2]);
      r.effective_passes = std::stod(f[3]);
      r.grad_norm = std::stod(f[4]);
      r.objective = std::stod(f[5]);
      r.step_min = std::stod(f[6]);
      r.step_mean = std::stod(f[7]);
      r.step_max = std::stod(f[8]);
      r.safeguards = std::stoll(f[9]);
      if (has_status) t.status = f[10];
      t.records.push_back(r);
    } catch (const std::logic_error &) {
      throw ParseError(lineno, origin + ": malformed number");
    }
  }
  return t;
}

std::vector<TraceTable> read_trace_dir(const fs::path &dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<TraceTable> out;
  for (const auto &p : files) {
    std::ifstream in(p);
    auto t = read_trace_csv(in, p.filename().string());
    if (!t.records.empty()) out.push_back(std::move(t));
  }
  return out;
}

TraceTable to_table(const RunOutcome &run) {
  return {run.label, run.seed, to_string(run.status), run.trace.records};
}

SuiteResult run_suite(const ExperimentSuite &suite, const Dataset &data, unsigned threads, bool write_files) {
  suite.validate();
  const LogisticL2Problem<double> problem(data, suite.lambda);
  struct Job {
    const RunConfig *cfg;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto &cfg : suite.runs)
    for (auto seed : suite.seeds) jobs.push_back({&cfg, seed});

  SuiteResult result;
  result.runs.resize(jobs.size());
  if (write_files) fs::create_directories(suite.output_dir);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      auto out = execute_run(problem, *jobs[i].cfg, jobs[i].seed);
      if (write_files) {
        out.file = suite.output_dir / trace_file_name(out.label, out.seed);
        std::ofstream f(out.file, std::ios::binary | std::ios::trunc);
        write_trace_csv(f, out.trace, out.status);
      }
      result.runs[i] = std::move(out);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return result;
}

SuiteResult run_suite(const ExperimentSuite &suite, unsigned threads, bool write_files) {
  auto loaded = load_dataset(suite.dataset, suite.dataset_seed, suite.dataset_rows);
  auto result = run_suite(suite, loaded.data, threads, write_files);
  result.data_source = loaded.source;
  return result;
}

}  // namespace vrbb
