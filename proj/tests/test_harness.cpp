#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <unistd.h>

#include "support/oracles.hpp"
#include "vrbb/harness.hpp"
#include "vrbb/synthetic.hpp"

using namespace vrbb;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = fs::path(VRBB_SOURCE_DIR) / "configs";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &tag) {
    path = fs::temp_directory_path() / ("vrbb_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Dataset small_data() { return testing::random_dataset(11, 60, 8, 0.6, 1.0); }

TraceRecord rec(Index epoch, double passes, double g) {
  TraceRecord r;
  r.epoch = epoch;
  r.effective_passes = passes;
  r.grad_norm = g;
  r.objective = 0.5;
  return r;
}

}  // namespace

TEST_CASE("minimal config") {
  const auto s = parse_suite(R"({"dataset": "australian"})");
  REQUIRE(s.runs.size() == 1);
  CHECK(s.runs[0].label == "mb-sarah-rhbb(3)");
  CHECK(s.seeds == std::vector<std::uint64_t>{1});
  CHECK(s.lambda == 1e-2);
  CHECK(s.runs[0].hedge.b_bar() == 40);
}

TEST_CASE("unknown keys are named in the error") {
  try {
    parse_suite(R"({"dataset": "australian", "runs": [{"rule": "rhbb", "alpha_": 3}]})", "cfg.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    const std::string msg = e.what();
    CHECK(msg.find("alpha_") != std::string::npos);
    CHECK(msg.find("cfg.json.runs[0]") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_suite(R"({"dataset": "australian", "colour": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_suite(R"({"dataset": "australian", "theory": {"epsilon": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_suite(R"({"dataset": "australian", "b": "four"})"), ConfigError);
  CHECK_THROWS_AS(parse_suite(R"({"dataset": "australian", "rule": "bb"})"), ConfigError);
  CHECK_THROWS_AS(parse_suite(R"({"dataset": "australian", "alpha": 0.5})"), ConfigError);
  CHECK_THROWS_AS(parse_suite(R"({"dataset": "australian", "runs": [{"rule": "rbb"}, {"rule": "rbb"}]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_suite("{not json"), ConfigError);
}

TEST_CASE("hedge-alpha preset expands to RBB plus four hedge bases") {
  const auto s = load_config(kConfigDir / "hedge_alpha_mb_sarah.json");
  REQUIRE(s.runs.size() == 5);
  CHECK(s.runs[0].rule == StepRule::Rbb);
  const double alphas[] = {2, 3, 4, 5};
  for (int i = 0; i < 4; ++i) {
    const auto &r = s.runs[static_cast<std::size_t>(i + 1)];
    CHECK(r.rule == StepRule::Rhbb);
    CHECK(r.hedge.alpha == alphas[i]);
  }
  for (const auto &r : s.runs) {
    CHECK(r.algorithm == Algorithm::MbSarah);
    CHECK(r.b == 4);
    CHECK(r.hedge.b1 == 40);
    CHECK(r.hedge.b2 == 40);
    CHECK(r.hedge.gamma == 1.0);
    CHECK(r.eta0 == std::vector<double>{0.1});
    CHECK(r.epochs == 15);
    CHECK_FALSE(r.m.has_value());
  }
  CHECK(s.seeds.size() == 5);
  CHECK(s.dataset == "mushrooms");
}

TEST_CASE("every preset parses") {
  int count = 0;
  for (const auto &entry : fs::directory_iterator(kConfigDir)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
    ++count;
  }
  CHECK(count >= 8);
}

TEST_CASE("every run key reaches the run config") {
  // One non-default value per key and a probe that sees it.
  using Probe = bool (*)(const RunConfig &);
  const std::map<std::string, std::pair<std::string, Probe>> cases = {
      {"label", {R"("x")", [](const RunConfig &c) { return c.label == "x"; }}},
      {"algorithm", {R"("ms2gd")", [](const RunConfig &c) { return c.algorithm == Algorithm::Ms2gd; }}},
      {"rule", {R"("rbb")", [](const RunConfig &c) { return c.rule == StepRule::Rbb; }}},
      {"epochs", {"7", [](const RunConfig &c) { return c.epochs == 7; }}},
      {"m", {"9", [](const RunConfig &c) { return c.m == 9; }}},
      {"b", {"2", [](const RunConfig &c) { return c.b == 2; }}},
      {"alpha", {"4.5", [](const RunConfig &c) { return c.hedge.alpha == 4.5; }}},
      {"adaptor", {R"("inverse-linear")",
                   [](const RunConfig &c) { return c.hedge.adaptor == AdaptorKind::InverseLinear; }}},
      {"sigma1", {"0.3", [](const RunConfig &c) { return c.hedge.sigma1 == 0.3; }}},
      {"sigma2", {"0.7", [](const RunConfig &c) { return c.hedge.sigma2 == 0.7; }}},
      {"adaptor_table", {"[[0, 2], [5, 1]]", [](const RunConfig &c) { return c.hedge.table.entries.size() == 2; }}},
      {"gamma", {"0.8", [](const RunConfig &c) { return c.hedge.gamma == 0.8; }}},
      {"gamma2", {"0.6", [](const RunConfig &c) { return c.hedge.gamma2 == 0.6; }}},
      {"b1", {"12", [](const RunConfig &c) { return c.hedge.b1 == 12 && c.hedge.b2 == 40; }}},
      {"b2", {"13", [](const RunConfig &c) { return c.hedge.b2 == 13 && c.hedge.b1 == 40; }}},
      {"b_h", {"20", [](const RunConfig &c) { return c.hedge.b1 == 20 && c.hedge.b2 == 20; }}},
      {"fallback_c", {"0.05", [](const RunConfig &c) { return c.hedge.fallback_c == 0.05; }}},
      {"eta0", {"[0.5, 1]", [](const RunConfig &c) { return c.eta0 == std::vector<double>{0.5, 1}; }}},
      {"eta", {"0.3", [](const RunConfig &c) { return c.eta == 0.3; }}},
      {"distribution", {R"("option2")",
                        [](const RunConfig &c) { return c.distribution.kind == DistributionKind::Option2; }}},
      {"tau", {"1.5", [](const RunConfig &c) { return c.distribution.tau == 1.5; }}},
      {"eval_every", {"5", [](const RunConfig &c) { return c.eval_every == 5; }}},
      {"count_stepsize_passes", {"false", [](const RunConfig &c) { return !c.count_stepsize_passes; }}},
      {"record_steps", {"true", [](const RunConfig &c) { return c.record_steps; }}},
      {"inner_only", {"true", [](const RunConfig &c) { return c.inner_only; }}},
  };
  for (const auto &key : run_config_keys()) {
    CAPTURE(key);
    const auto it = cases.find(key);
    REQUIRE_MESSAGE(it != cases.end(), "run key without a reflection case");
    std::string extra;
    if (key == "distribution") extra = R"(, "rule": "rhbb+")";
    const auto s = parse_suite(R"({"dataset": "australian", ")" + key + R"(": )" + it->second.first + extra + "}");
    REQUIRE(s.runs.size() == 1);
    CHECK(it->second.second(s.runs[0]));
    CHECK_FALSE(it->second.second(RunConfig{}));
  }
  CHECK(cases.size() == run_config_keys().size());
}

TEST_CASE("overrides") {
  auto s = parse_suite(R"({"dataset": "australian", "seeds": [1, 2, 3]})");
  apply_overrides(s, {9, fs::path("elsewhere"), true});
  CHECK(s.seeds == std::vector<std::uint64_t>{9});
  CHECK(s.output_dir == fs::path("elsewhere"));
  CHECK_FALSE(s.runs[0].count_stepsize_passes);
}

TEST_CASE("suite writes one trace per config and seed, byte-identically") {
  TempDir a("suite_a"), b("suite_b");
  auto s = parse_suite(R"({"dataset": "x", "epochs": 3, "b": 2, "b_h": 8, "seeds": [1, 2, 3],
                           "runs": [{"rule": "rbb"}, {"rule": "rhbb", "alpha": 2}]})");
  const auto data = small_data();
  s.output_dir = a.path;
  const auto ra = run_suite(s, data, 2);
  s.output_dir = b.path;
  const auto rb = run_suite(s, data, 1);
  REQUIRE(ra.runs.size() == 6);
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(a.path)) files.push_back(e.path());
  CHECK(files.size() == 6);
  for (const auto &f : files) {
    CAPTURE(f.string());
    REQUIRE(fs::exists(b.path / f.filename()));
    CHECK(slurp(f) == slurp(b.path / f.filename()));
  }
  CHECK(fs::exists(a.path / "mb-sarah-rhbb_2_seed3.csv"));
  CHECK_FALSE(ra.any_diverged());
}

TEST_CASE("a diverging run is recorded without stopping the suite") {
  TempDir dir("diverge");
  auto s = parse_suite(R"({"dataset": "x", "epochs": 4, "b": 2, "seeds": [1],
                           "runs": [{"label": "blowup", "rule": "constant", "eta": 1e306},
                                    {"label": "fine", "rule": "rbb", "b_h": 8}]})");
  s.output_dir = dir.path;
  const auto r = run_suite(s, small_data(), 2);
  REQUIRE(r.runs.size() == 2);
  CHECK(r.runs[0].status == RunStatus::Diverged);
  CHECK(r.runs[1].status == RunStatus::Ok);
  CHECK(r.any_diverged());
  std::ifstream in(dir.path / trace_file_name("blowup", 1));
  const auto t = read_trace_csv(in);
  CHECK(t.status == "diverged");
  CHECK_FALSE(t.records.empty());
  for (const auto &rec : t.records) CHECK(std::isfinite(rec.grad_norm));
}

TEST_CASE("trace CSV round trip") {
  const auto data = small_data();
  const LogisticL2Problem<> p(data, 1e-2);
  RunConfig c;
  c.label = "round, \"trip\"";
  c.epochs = 3;
  c.b = 2;
  c.hedge.b1 = c.hedge.b2 = 8;
  const auto out = execute_run(p, c, 4);
  std::stringstream buf;
  write_trace_csv(buf, out.trace, out.status);
  CHECK(buf.str().rfind(std::string(kTraceHeader) + "\n", 0) == 0);
  const auto t = read_trace_csv(buf);
  CHECK(t.label == c.label);
  CHECK(t.seed == 4);
  CHECK(t.status == "ok");
  REQUIRE(t.records.size() == out.trace.records.size());
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    auto expected = out.trace.records[i];
    expected.inner_step = t.records[i].inner_step;  // not a CSV column
    CHECK(t.records[i] == expected);
  }

  std::stringstream old_format("algo,seed,epoch,effective_passes,grad_norm,objective,step_min,step_mean,step_max,"
                               "safeguards\nx,1,0,0,0.5,0.69,0,0,0,0\n");
  CHECK(read_trace_csv(old_format).records.size() == 1);
  std::stringstream bad("algo,seed\nx,1\n");
  CHECK_THROWS_AS(read_trace_csv(bad), ParseError);
}

TEST_CASE("passes to tolerance interpolates between records") {
  const std::vector<TraceRecord> r = {rec(0, 0, 1.0), rec(1, 10, 0.1), rec(2, 20, 0.01), rec(3, 30, 1e-3),
                                      rec(4, 40, 1e-4)};
  CHECK(passes_to_tolerance(r, 1.0) == 0.0);
  CHECK(passes_to_tolerance(r, 1e-3) == 30.0);
  // 5e-3 lies between epochs 2 and 3; linear in grad_norm
  CHECK(passes_to_tolerance(r, 5e-3) == doctest::Approx(20 + 10 * (0.01 - 5e-3) / (0.01 - 1e-3)));
  CHECK(std::isinf(passes_to_tolerance(r, 1e-9)));
}

TEST_CASE("summary ranking, wins and the unreachable case") {
  auto table = [](std::string label, std::uint64_t seed, double g_end) {
    TraceTable t;
    t.label = std::move(label);
    t.seed = seed;
    t.records = {rec(0, 0, 1.0), rec(1, 10, g_end)};
    return t;
  };
  const std::vector<TraceTable> traces = {table("fast", 1, 1e-5), table("fast", 2, 1e-5), table("slow", 1, 1e-2),
                                          table("slow", 2, 1e-4)};
  const auto rep = summarize(traces, 1e-3);
  REQUIRE(rep.algorithms.size() == 2);
  // "slow" misses the tolerance on one of two seeds, so its median is infinite
  CHECK(rep.ranking == std::vector<std::string>{"fast"});
  CHECK(rep.wins[0][1] == 2);
  CHECK(rep.wins[1][0] == 0);
  CHECK(std::isinf(rep.algorithms[1].passes[0]));
  CHECK(format_report(rep).find("fast") != std::string::npos);

  const auto none = summarize({table("a", 1, 0.5), table("b", 1, 0.6)}, 1e-3);
  CHECK(none.ranking.empty());
  CHECK_FALSE(none.warnings.empty());
  CHECK(median({1.0, std::numeric_limits<double>::infinity(), 3.0}) == 3.0);
  CHECK(median({1.0, 2.0}) == 1.5);
}

TEST_CASE("plot data: one file per trace plus a manifest") {
  TempDir dir("plot");
  TraceTable a, b;
  a.label = "a";
  a.seed = 1;
  a.records = {rec(0, 0, 1.0), rec(1, 5, 0.0), rec(2, 10, 1e-3)};
  b.label = "b+";
  b.seed = 2;
  b.records = {rec(0, 0, 1.0)};
  const auto e = emit_plot_data({a, b}, dir.path);
  CHECK(e.files.size() == 2);
  CHECK(fs::exists(e.manifest));
  CHECK(e.clamped_rows == 1);
  for (const auto &f : e.files) {
    std::ifstream in(f);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      double x, y;
      std::string rest;
      REQUIRE(static_cast<bool>(ls >> x >> y));
      CHECK_FALSE(static_cast<bool>(ls >> rest));
      CHECK(y > 0.0);
    }
  }
}

TEST_CASE("theory report rows") {
  const auto data = small_data();
  auto s = parse_suite(R"({"dataset": "x", "b": 2, "b_h": 8, "theory": {"eps": 1e-3},
                           "runs": [{"rule": "rbb"}, {"rule": "rhbb", "alpha": 3},
                                    {"algorithm": "ms2gd", "rule": "rhbb", "alpha": 2},
                                    {"algorithm": "svrg", "b": 1}]})");
  const auto rows = theory_report(s, data);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].alpha_hat == 1.0);
  CHECK(rows[0].b_bar == 8.0);
  CHECK(rows[1].alpha_hat == 3.0);
  CHECK(rows[1].step_bound > rows[0].step_bound);
  CHECK(std::isfinite(rows[1].inner_rate));
  CHECK(rows[3].note.find("no hedged") != std::string::npos);
  const auto text = format_theory(rows);
  CHECK(text.find("label,m,b") != std::string::npos);
}

TEST_CASE("surrogates stand in for missing files") {
  const auto d = load_dataset("australian", 5);
  CHECK(d.data.n() == 690);
  CHECK(d.data.d() == 14);
  CHECK(d.source.rfind("surrogate:australian", 0) == 0);
  const auto again = load_dataset("australian", 5);
  CHECK(d.data == again.data);
  const auto capped = load_dataset("mushrooms", 5, Index{500});
  CHECK(capped.data.n() == 500);
  for (Index i = 0; i < capped.data.n(); ++i) CHECK(capped.data.row_squared_norm(i) == 22.0);
  CHECK_THROWS_AS(load_dataset("no-such-set"), ConfigError);
}
