#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vrbb/data.hpp"

namespace vrbb {

/// Shape of a seeded stand-in for one of the benchmark LIBSVM sets.
struct SurrogateShape {
  std::string name;
  Index n = 0;
  Index d = 0;
  /// > 0: one-hot categorical rows with this many attributes spread over d
  /// columns. 0: real-valued features scaled into [-1, 1].
  Index attributes = 0;
  /// Probability that a categorical attribute is absent from a row.
  double missing = 0.0;
  /// Fraction of non-zero entries for real-valued rows.
  double density = 1.0;
};

/// Shapes of the nine benchmark sets, in table order.
const std::vector<SurrogateShape> &surrogate_shapes();
std::optional<SurrogateShape> find_surrogate_shape(const std::string &name);

/// Rows from `shape`, labels from a planted logistic model with label noise.
Dataset make_surrogate(const SurrogateShape &shape, std::uint64_t seed);

/// Where a dataset came from, for reports.
struct LoadedDataset {
  Dataset data;
  std::string source;
};

/// Resolves `name_or_path`: an existing file, then `$VRBB_DATA_DIR/<name>`,
/// then a surrogate of the same name. `size_cap` (if set) makes surrogates
/// keep only the first rows; it never truncates a real file.
LoadedDataset load_dataset(const std::string &name_or_path, std::uint64_t surrogate_seed = 2024,
                           std::optional<Index> size_cap = std::nullopt);

}  // namespace vrbb
