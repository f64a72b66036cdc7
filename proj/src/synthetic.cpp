#include "vrbb/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "vrbb/rng.hpp"

namespace vrbb {

const std::vector<SurrogateShape> &surrogate_shapes() {
  static const std::vector<SurrogateShape> shapes = {
      {"a8a", 22696, 123, 14, 0.01, 1.0},
      {"w8a", 49749, 300, 0, 0.0, 0.04},
      {"ijcnn1", 49990, 22, 0, 0.0, 0.6},
      {"covtype", 581012, 54, 0, 0.0, 0.22},
      {"phishing", 11055, 68, 30, 0.0, 1.0},
      {"mushrooms", 8124, 112, 22, 0.0, 1.0},
      {"australian", 690, 14, 0, 0.0, 1.0},
      {"madelon", 2000, 600, 0, 0.0, 1.0},
      {"german.numer", 1000, 24, 0, 0.0, 1.0},
  };
  return shapes;
}

std::optional<SurrogateShape> find_surrogate_shape(const std::string &name) {
  for (const auto &s : surrogate_shapes())
    if (s.name == name) return s;
  return std::nullopt;
}

namespace {

// Column ranges of each categorical attribute; every attribute gets >= 2 levels.
std::vector<std::pair<Index, Index>> attribute_blocks(Index d, Index attributes) {
  if (attributes * 2 > d) throw ContractViolation("surrogate needs at least two columns per attribute");
  std::vector<std::pair<Index, Index>> blocks;
  const Index base = d / attributes, extra = d % attributes;
  Index start = 0;
  for (Index a = 0; a < attributes; ++a) {
    const Index width = base + (a < extra ? 1 : 0);
    blocks.emplace_back(start, width);
    start += width;
  }
  return blocks;
}

}  // namespace

Dataset make_surrogate(const SurrogateShape &shape, std::uint64_t seed) {
  if (shape.n < 1 || shape.d < 1) throw ContractViolation("surrogate shape needs n, d >= 1");
  Rng rng(seed, 0x5eed);
  Rng row_rng = rng.split(1);
  Rng label_rng = rng.split(2);

  std::vector<SparseExample<double>> rows(static_cast<std::size_t>(shape.n));
  if (shape.attributes > 0) {
    const auto blocks = attribute_blocks(shape.d, shape.attributes);
    // Skewed level frequencies per attribute, as in real categorical data.
    std::vector<std::vector<double>> cumulative;
    for (const auto &[start, width] : blocks) {
      std::vector<double> w(static_cast<std::size_t>(width));
      for (auto &x : w) x = std::exp(1.2 * rng.normal());
      std::partial_sum(w.begin(), w.end(), w.begin());
      for (auto &x : w) x /= w.back();
      cumulative.push_back(std::move(w));
    }
    for (auto &row : rows) {
      for (std::size_t a = 0; a < blocks.size(); ++a) {
        if (shape.missing > 0.0 && row_rng.uniform01() < shape.missing) continue;
        const auto &cum = cumulative[a];
        const auto level = std::upper_bound(cum.begin(), cum.end(), row_rng.uniform01()) - cum.begin();
        const Index col = blocks[a].first + std::min<Index>(static_cast<Index>(level), blocks[a].second - 1);
        row.features.emplace_back(col, 1.0);
      }
    }
  } else {
    // Per-column scale so that some features dominate the row norms.
    std::vector<double> scale(static_cast<std::size_t>(shape.d));
    for (auto &s : scale) s = std::min(1.0, 0.15 + 0.5 * std::abs(rng.normal()));
    for (auto &row : rows) {
      for (Index j = 0; j < shape.d; ++j) {
        if (shape.density < 1.0 && row_rng.uniform01() >= shape.density) continue;
        const double v = std::clamp(scale[static_cast<std::size_t>(j)] * row_rng.normal(), -1.0, 1.0);
        if (v != 0.0) row.features.emplace_back(j, v);
      }
    }
  }

  // Planted model; the bias is centred on the median margin to balance classes.
  std::vector<double> w_star(static_cast<std::size_t>(shape.d));
  for (auto &w : w_star) w = rng.normal();

  std::vector<double> margins(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double a = 0.0;
    for (const auto &[j, v] : rows[i].features) a += v * w_star[static_cast<std::size_t>(j)];
    margins[i] = a;
  }
  std::vector<double> sorted = margins;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  double var = 0.0;
  for (double a : margins) var += (a - median) * (a - median);
  const double spread = std::sqrt(var / static_cast<double>(margins.size()));
  const double sharpness = spread > 0.0 ? 3.0 / spread : 1.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-sharpness * (margins[i] - median)));
    rows[i].label = label_rng.uniform01() < p ? 1.0 : -1.0;
  }
  return Dataset::from_examples(rows, shape.d);
}

LoadedDataset load_dataset(const std::string &name_or_path, std::uint64_t surrogate_seed,
                           std::optional<Index> size_cap) {
  namespace fs = std::filesystem;
  auto parse_file = [](const fs::path &p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open dataset " + p.string());
    return LoadedDataset{parse_libsvm<double>(in), p.string()};
  };
  if (fs::is_regular_file(name_or_path)) return parse_file(name_or_path);
  if (const char *dir = std::getenv("VRBB_DATA_DIR"); dir && *dir) {
    const fs::path p = fs::path(dir) / name_or_path;
    if (fs::is_regular_file(p)) return parse_file(p);
  }
  auto shape = find_surrogate_shape(name_or_path);
  if (!shape) throw ConfigError("dataset '" + name_or_path + "' is neither a file nor a known surrogate name");
  if (size_cap && *size_cap < shape->n) shape->n = *size_cap;
  return {make_surrogate(*shape, surrogate_seed),
          "surrogate:" + shape->name + " (n=" + std::to_string(shape->n) + ", d=" + std::to_string(shape->d) +
              ", seed=" + std::to_string(surrogate_seed) + ")"};
}

}  // namespace vrbb
