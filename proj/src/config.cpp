#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vrbb/harness.hpp"

namespace vrbb {

using nlohmann::json;

namespace {

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

[[noreturn]] void fail(const std::string &path, const std::string &what) {
  throw ConfigError(path + ": " + what);
}

template <typename T>
T get_as(const json &v, const std::string &path) {
  try {
    return v.get<T>();
  } catch (const json::exception &) {
    fail(path, "has the wrong type (" + std::string(v.type_name()) + ")");
  }
}

double get_number(const json &v, const std::string &path) {
  if (!v.is_number()) fail(path, "must be a number");
  return v.get<double>();
}

Index get_index(const json &v, const std::string &path) {
  if (!v.is_number_integer()) fail(path, "must be an integer");
  return v.get<Index>();
}

bool get_bool(const json &v, const std::string &path) {
  if (!v.is_boolean()) fail(path, "must be true or false");
  return v.get<bool>();
}

template <typename E>
E get_enum(const json &v, const std::string &path, std::initializer_list<std::pair<const char *, E>> names) {
  const auto s = v.is_string() ? v.get<std::string>() : std::string();
  for (const auto &[name, value] : names)
    if (s == name) return value;
  std::string allowed;
  for (const auto &n : names) allowed += std::string(allowed.empty() ? "" : ", ") + n.first;
  fail(path, "must be one of " + allowed);
}

const std::vector<std::string> kRunKeys = {
    "label",  "algorithm", "rule",  "epochs", "m",       "b",          "alpha", "adaptor",
    "sigma1", "sigma2",    "adaptor_table", "gamma",  "gamma2",  "b1",  "b2",    "b_h",
    "fallback_c", "eta0",  "eta",   "distribution", "tau", "eval_every", "count_stepsize_passes",
    "record_steps", "inner_only"};

const std::set<std::string> kSuiteKeys = {"name",   "description", "dataset", "dataset_seed", "dataset_rows",
                                          "lambda", "seed",        "seeds",   "output",       "defaults",
                                          "runs",   "theory"};

bool is_run_key(const std::string &k) { return std::find(kRunKeys.begin(), kRunKeys.end(), k) != kRunKeys.end(); }

// Applies one run-level key; `path` names the key for error messages.
void apply_run_key(RunConfig &cfg, const std::string &key, const json &v, const std::string &path) {
  auto &h = cfg.hedge;
  if (key == "label") {
    cfg.label = get_as<std::string>(v, path);
  } else if (key == "algorithm") {
    cfg.algorithm = get_enum<Algorithm>(v, path,
                                        {{"mb-sarah", Algorithm::MbSarah},
                                         {"ms2gd", Algorithm::Ms2gd},
                                         {"svrg", Algorithm::Svrg},
                                         {"svrg-bb", Algorithm::SvrgBb}});
  } else if (key == "rule") {
    cfg.rule = get_enum<StepRule>(v, path,
                                  {{"rhbb", StepRule::Rhbb},
                                   {"rhbb+", StepRule::RhbbPlus},
                                   {"rbb", StepRule::Rbb},
                                   {"rbb+", StepRule::RbbPlus},
                                   {"constant", StepRule::Constant}});
  } else if (key == "epochs") {
    cfg.epochs = get_index(v, path);
  } else if (key == "m") {
    if (v.is_null())
      cfg.m.reset();
    else
      cfg.m = get_index(v, path);
  } else if (key == "b") {
    cfg.b = get_index(v, path);
  } else if (key == "alpha") {
    h.alpha = get_number(v, path);
  } else if (key == "adaptor") {
    h.adaptor = get_enum<AdaptorKind>(v, path,
                                      {{"constant", AdaptorKind::ConstantOne},
                                       {"inverse-linear", AdaptorKind::InverseLinear},
                                       {"table", AdaptorKind::Table}});
  } else if (key == "sigma1") {
    h.sigma1 = get_number(v, path);
  } else if (key == "sigma2") {
    h.sigma2 = get_number(v, path);
  } else if (key == "adaptor_table") {
    if (!v.is_array()) fail(path, "must be a list of [threshold, h] pairs");
    h.table.entries.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto p = path + "[" + std::to_string(i) + "]";
      if (!v[i].is_array() || v[i].size() != 2) fail(p, "must be a [threshold, h] pair");
      h.table.entries.emplace_back(get_number(v[i][0], p), get_number(v[i][1], p));
    }
  } else if (key == "gamma") {
    h.gamma = get_number(v, path);
  } else if (key == "gamma2") {
    h.gamma2 = get_number(v, path);
  } else if (key == "b1") {
    h.b1 = get_index(v, path);
  } else if (key == "b2") {
    h.b2 = get_index(v, path);
  } else if (key == "b_h") {
    h.b1 = h.b2 = get_index(v, path);
  } else if (key == "fallback_c") {
    if (v.is_null())
      h.fallback_c.reset();
    else
      h.fallback_c = get_number(v, path);
  } else if (key == "eta0") {
    cfg.eta0.clear();
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) cfg.eta0.push_back(get_number(v[i], path + "[" + std::to_string(i) + "]"));
    } else {
      cfg.eta0.push_back(get_number(v, path));
    }
  } else if (key == "eta") {
    cfg.eta = get_number(v, path);
  } else if (key == "distribution") {
    cfg.distribution.kind = get_enum<DistributionKind>(v, path,
                                                       {{"uniform", DistributionKind::Uniform},
                                                        {"option1", DistributionKind::Option1},
                                                        {"option2", DistributionKind::Option2}});
  } else if (key == "tau") {
    cfg.distribution.tau = get_number(v, path);
  } else if (key == "eval_every") {
    cfg.eval_every = get_index(v, path);
  } else if (key == "count_stepsize_passes") {
    cfg.count_stepsize_passes = get_bool(v, path);
  } else if (key == "record_steps") {
    cfg.record_steps = get_bool(v, path);
  } else if (key == "inner_only") {
    cfg.inner_only = get_bool(v, path);
  } else {
    fail(path, "unknown key '" + key + "'");
  }
}

void apply_run_object(RunConfig &cfg, const json &obj, const std::string &path) {
  if (!obj.is_object()) fail(path, "must be an object");
  for (const auto &[key, v] : obj.items()) {
    if (!is_run_key(key)) fail(path, "unknown key '" + key + "'");
    if (key == "alpha" && v.is_array()) continue;  // expanded by the caller
    apply_run_key(cfg, key, v, path + "." + key);
  }
}

// A run entry whose `alpha` is a list expands into one run per value.
std::vector<RunConfig> expand_run(const RunConfig &base, const json &obj, const std::string &path) {
  RunConfig cfg = base;
  apply_run_object(cfg, obj, path);
  const auto it = obj.find("alpha");
  if (it == obj.end() || !it->is_array()) return {cfg};
  if (obj.contains("label")) fail(path, "a label cannot be combined with a list of alpha values");
  if (it->empty()) fail(path + ".alpha", "must not be empty");
  std::vector<RunConfig> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    RunConfig c = cfg;
    c.hedge.alpha = get_number((*it)[i], path + ".alpha[" + std::to_string(i) + "]");
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

const std::vector<std::string> &run_config_keys() { return kRunKeys; }

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::MbSarah: return "mb-sarah";
    case Algorithm::Ms2gd: return "ms2gd";
    case Algorithm::Svrg: return "svrg";
    case Algorithm::SvrgBb: return "svrg-bb";
  }
  return "?";
}

std::string to_string(StepRule r) {
  switch (r) {
    case StepRule::Rhbb: return "rhbb";
    case StepRule::RhbbPlus: return "rhbb+";
    case StepRule::Rbb: return "rbb";
    case StepRule::RbbPlus: return "rbb+";
    case StepRule::Constant: return "constant";
  }
  return "?";
}

std::string default_label(const RunConfig &cfg) {
  std::string label = to_string(cfg.algorithm);
  if (cfg.algorithm == Algorithm::Svrg || cfg.algorithm == Algorithm::SvrgBb) return label;
  label += "-" + to_string(cfg.rule);
  if (cfg.rule == StepRule::Rhbb || cfg.rule == StepRule::RhbbPlus) {
    label += "(" + fmt_g(cfg.hedge.alpha) + ")";
    if (cfg.hedge.adaptor == AdaptorKind::InverseLinear)
      label += "-adaptive(" + fmt_g(cfg.hedge.sigma1) + "," + fmt_g(cfg.hedge.sigma2) + ")";
    else if (cfg.hedge.adaptor == AdaptorKind::Table)
      label += "-table";
  }
  if (cfg.distribution.kind == DistributionKind::Option1) label += "-opt1";
  if (cfg.distribution.kind == DistributionKind::Option2) label += "-opt2";
  return label;
}

void ExperimentSuite::validate() const {
  if (dataset.empty()) throw ConfigError("dataset: missing");
  if (runs.empty()) throw ConfigError("runs: at least one run is required");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (!(lambda > 0.0)) throw ConfigError("lambda: must be > 0");
  if (dataset_rows && *dataset_rows < 1) throw ConfigError("dataset_rows: must be >= 1");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!labels.insert(runs[i].label).second)
      throw ConfigError("runs[" + std::to_string(i) + "]: duplicate label '" + runs[i].label + "'");
    try {
      runs[i].hedge.validate();
      if (runs[i].eta0.empty()) throw ConfigError("eta0 schedule must not be empty");
    } catch (const ConfigError &e) {
      throw ConfigError("runs[" + std::to_string(i) + "] (" + runs[i].label + "): " + e.what());
    }
  }
}

ExperimentSuite parse_suite(std::string_view json_text, const std::string &origin) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error &e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(origin + ": top level must be an object");

  ExperimentSuite suite;
  RunConfig defaults;
  json top_run = json::object();
  for (const auto &[key, v] : doc.items()) {
    const auto path = origin + "." + key;
    if (kSuiteKeys.count(key) == 0) {
      if (!is_run_key(key)) fail(origin, "unknown key '" + key + "'");
      top_run[key] = v;
      continue;
    }
    if (key == "name") {
      suite.name = get_as<std::string>(v, path);
    } else if (key == "description") {
      suite.description = get_as<std::string>(v, path);
    } else if (key == "dataset") {
      suite.dataset = get_as<std::string>(v, path);
    } else if (key == "dataset_seed") {
      suite.dataset_seed = get_as<std::uint64_t>(v, path);
    } else if (key == "dataset_rows") {
      suite.dataset_rows = get_index(v, path);
    } else if (key == "lambda") {
      suite.lambda = get_number(v, path);
    } else if (key == "seed") {
      suite.seeds.push_back(get_as<std::uint64_t>(v, path));
    } else if (key == "seeds") {
      if (!v.is_array()) fail(path, "must be a list of integers");
      for (std::size_t i = 0; i < v.size(); ++i)
        suite.seeds.push_back(get_as<std::uint64_t>(v[i], path + "[" + std::to_string(i) + "]"));
    } else if (key == "output") {
      suite.output_dir = get_as<std::string>(v, path);
    } else if (key == "theory") {
      if (!v.is_object()) fail(path, "must be an object");
      for (const auto &[tk, tv] : v.items()) {
        const auto tp = path + "." + tk;
        if (tk == "eps") suite.theory_eps = get_number(tv, tp);
        else if (tk == "sigma0") suite.theory_sigma0 = get_number(tv, tp);
        else if (tk == "zeta") suite.theory_zeta = get_number(tv, tp);
        else if (tk == "delta") suite.theory_delta = get_number(tv, tp);
        else fail(path, "unknown key '" + tk + "'");
      }
    }
  }
  if (doc.contains("defaults")) apply_run_object(defaults, doc["defaults"], origin + ".defaults");
  if (top_run.contains("alpha") && top_run["alpha"].is_array() && doc.contains("runs"))
    fail(origin + ".alpha", "a list of alpha values belongs inside a run entry");
  if (!top_run.empty()) apply_run_object(defaults, top_run, origin);

  if (doc.contains("runs")) {
    const auto &runs = doc["runs"];
    if (!runs.is_array()) fail(origin + ".runs", "must be a list of run objects");
    for (std::size_t i = 0; i < runs.size(); ++i) {
      auto expanded = expand_run(defaults, runs[i], origin + ".runs[" + std::to_string(i) + "]");
      suite.runs.insert(suite.runs.end(), expanded.begin(), expanded.end());
    }
  } else {
    suite.runs = expand_run(RunConfig{}, [&] {
      json merged = doc.contains("defaults") ? doc["defaults"] : json::object();
      for (const auto &[k, v] : top_run.items()) merged[k] = v;
      return merged;
    }(), origin);
  }
  for (auto &r : suite.runs)
    if (r.label.empty()) r.label = default_label(r);
  if (suite.seeds.empty()) suite.seeds.push_back(1);
  suite.validate();
  return suite;
}

ExperimentSuite load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_suite(buf.str(), path.filename().string());
}

void apply_overrides(ExperimentSuite &suite, const SuiteOverrides &o) {
  if (o.seed) suite.seeds = {*o.seed};
  if (o.output_dir) suite.output_dir = *o.output_dir;
  if (o.exclude_stepsize_passes)
    for (auto &r : suite.runs) r.count_stepsize_passes = false;
}

}  // namespace vrbb
