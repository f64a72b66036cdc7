#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vrbb/error.hpp"
#include "vrbb/types.hpp"

namespace vrbb {

/// One labelled row: 0-based strictly increasing feature indices.
template <typename Scalar>
struct SparseExample {
  std::vector<std::pair<Index, Scalar>> features;
  Scalar label = Scalar(1);
};

/// Immutable n x d sparse design matrix with labels in {-1, +1}.
template <typename ScalarT>
class SparseDataset {
 public:
  using Scalar = ScalarT;
  using Vector = typename Types<Scalar>::Vector;
  using SparseMatrix = typename Types<Scalar>::SparseMatrix;

  SparseDataset(SparseMatrix features, Vector labels)
      : x_(std::move(features)), z_(std::move(labels)) {
    x_.makeCompressed();
    if (x_.rows() < 1 || x_.cols() < 1)
      throw ContractViolation("dataset needs n >= 1 and d >= 1");
    if (z_.size() != x_.rows())
      throw ContractViolation("label count does not match row count");
    for (Index i = 0; i < z_.size(); ++i)
      if (z_[i] != Scalar(1) && z_[i] != Scalar(-1))
        throw ContractViolation("labels must be exactly -1 or +1");
  }

  /// Builds from rows; `dim` must cover every feature index.
  static SparseDataset from_examples(const std::vector<SparseExample<Scalar>> &rows, Index dim) {
    std::vector<Eigen::Triplet<Scalar, Index>> triplets;
    Vector labels(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Index prev = -1;
      for (const auto &[j, v] : rows[i].features) {
        if (j <= prev) throw ContractViolation("feature indices must be strictly increasing");
        if (j >= dim) throw ContractViolation("feature index exceeds dimension");
        prev = j;
        triplets.emplace_back(static_cast<Index>(i), j, v);
      }
      labels[static_cast<Index>(i)] = rows[i].label;
    }
    SparseMatrix x(static_cast<Index>(rows.size()), dim);
    x.setFromTriplets(triplets.begin(), triplets.end());
    return SparseDataset(std::move(x), std::move(labels));
  }

  /// Dense convenience constructor; exact zeros are not stored.
  template <typename Derived>
  static SparseDataset from_dense(const Eigen::MatrixBase<Derived> &dense, Vector labels) {
    SparseMatrix x = dense.template cast<Scalar>().sparseView();
    return SparseDataset(std::move(x), std::move(labels));
  }

  Index n() const { return x_.rows(); }
  Index d() const { return x_.cols(); }
  const SparseMatrix &features() const { return x_; }
  const Vector &labels() const { return z_; }
  Scalar label(Index i) const { return z_[i]; }

  SparseExample<Scalar> example(Index i) const {
    check_row(i);
    SparseExample<Scalar> ex;
    for (typename SparseMatrix::InnerIterator it(x_, i); it; ++it)
      ex.features.emplace_back(it.col(), it.value());
    ex.label = z_[i];
    return ex;
  }

  /// <x_i, w>
  template <typename Derived>
  Scalar row_dot(Index i, const Eigen::MatrixBase<Derived> &w) const {
    Scalar acc(0);
    for (typename SparseMatrix::InnerIterator it(x_, i); it; ++it) acc += it.value() * w[it.col()];
    return acc;
  }

  /// out += a * x_i
  template <typename Derived>
  void add_row(Index i, Scalar a, Eigen::MatrixBase<Derived> &out) const {
    for (typename SparseMatrix::InnerIterator it(x_, i); it; ++it) out[it.col()] += a * it.value();
  }

  Scalar row_squared_norm(Index i) const {
    Scalar acc(0);
    for (typename SparseMatrix::InnerIterator it(x_, i); it; ++it) acc += it.value() * it.value();
    return acc;
  }

  void check_row(Index i) const {
    if (i < 0 || i >= n()) throw ContractViolation("row index " + std::to_string(i) + " out of range");
  }

  friend bool operator==(const SparseDataset &a, const SparseDataset &b) {
    if (a.n() != b.n() || a.d() != b.d() || a.z_ != b.z_) return false;
    if (a.x_.nonZeros() != b.x_.nonZeros()) return false;
    for (Index i = 0; i < a.n(); ++i) {
      typename SparseMatrix::InnerIterator ia(a.x_, i), ib(b.x_, i);
      for (; ia && ib; ++ia, ++ib)
        if (ia.col() != ib.col() || ia.value() != ib.value()) return false;
      if (ia || ib) return false;
    }
    return true;
  }

 private:
  SparseMatrix x_;
  Vector z_;
};

using Dataset = SparseDataset<double>;

/// max |x_ij| over row i (0 for an empty row).
template <typename Scalar>
Scalar row_inf_norm(const SparseDataset<Scalar> &data, Index i) {
  data.check_row(i);
  Scalar m(0);
  for (typename SparseDataset<Scalar>::SparseMatrix::InnerIterator it(data.features(), i); it; ++it)
    m = std::max(m, std::abs(it.value()));
  return m;
}

template <typename Scalar>
Index row_nnz(const SparseDataset<Scalar> &data, Index i) {
  data.check_row(i);
  const auto &x = data.features();
  return x.outerIndexPtr()[i + 1] - x.outerIndexPtr()[i];
}

/// Maps a two-class label column onto {-1, +1}: the larger raw value becomes
/// +1. A single class keeps its sign.
template <typename Scalar>
std::vector<Scalar> remap_labels(const std::vector<Scalar> &raw) {
  std::vector<Scalar> distinct;
  for (Scalar v : raw) {
    if (std::find(distinct.begin(), distinct.end(), v) == distinct.end()) distinct.push_back(v);
    if (distinct.size() > 2)
      throw UnsupportedLabels("more than two distinct label values; only binary problems are supported");
  }
  std::vector<Scalar> out(raw.size());
  if (distinct.size() == 1) {
    const Scalar s = distinct[0] > Scalar(0) ? Scalar(1) : Scalar(-1);
    std::fill(out.begin(), out.end(), s);
    return out;
  }
  const Scalar hi = std::max(distinct[0], distinct[1]);
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] == hi ? Scalar(1) : Scalar(-1);
  return out;
}

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

template <typename Scalar>
bool parse_real(std::string_view tok, Scalar &out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  if (tok.empty()) return false;
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) return false;
  out = static_cast<Scalar>(v);
  return true;
}

}  // namespace detail

/// Reads LIBSVM text (`label idx:val ...`, 1-based indices). Blank lines and
/// `#` comments are ignored; explicit zero values are not stored. `dim`
/// overrides the inferred dimension and must cover every index seen.
template <typename Scalar = double>
SparseDataset<Scalar> parse_libsvm(std::istream &in, std::optional<Index> dim = std::nullopt) {
  std::vector<SparseExample<Scalar>> rows;
  std::vector<Scalar> raw_labels;
  Index max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < view.size()) {
      while (pos < view.size() && detail::is_space(view[pos])) ++pos;
      std::size_t end = pos;
      while (end < view.size() && !detail::is_space(view[end])) ++end;
      if (end > pos) tokens.push_back(view.substr(pos, end - pos));
      pos = end;
    }
    if (tokens.empty()) continue;

    SparseExample<Scalar> ex;
    Scalar label{};
    if (!detail::parse_real(tokens[0], label))
      throw ParseError(line_no, "invalid label '" + std::string(tokens[0]) + "'");
    Index prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line_no, "expected index:value, got '" + std::string(tok) + "'");
      long long idx = 0;
      const auto itok = tok.substr(0, colon);
      auto [p, ec] = std::from_chars(itok.data(), itok.data() + itok.size(), idx);
      if (ec != std::errc() || p != itok.data() + itok.size() || idx < 1)
        throw ParseError(line_no, "invalid feature index '" + std::string(itok) + "'");
      if (idx <= prev)
        throw ParseError(line_no, "feature indices must be strictly increasing (" + std::to_string(idx) +
                                      " after " + std::to_string(prev) + ")");
      prev = static_cast<Index>(idx);
      Scalar value{};
      if (!detail::parse_real(tok.substr(colon + 1), value))
        throw ParseError(line_no, "non-numeric value in '" + std::string(tok) + "'");
      max_index = std::max<Index>(max_index, static_cast<Index>(idx));
      if (value != Scalar(0)) ex.features.emplace_back(static_cast<Index>(idx - 1), value);
    }
    raw_labels.push_back(label);
    rows.push_back(std::move(ex));
  }
  if (rows.empty()) throw ParseError(line_no, "no examples found");

  const auto labels = remap_labels(raw_labels);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].label = labels[i];

  Index d = std::max<Index>(max_index, 1);
  if (dim) {
    if (*dim < max_index)
      throw ContractViolation("dimension override " + std::to_string(*dim) + " is below the largest index " +
                              std::to_string(max_index));
    d = *dim;
  }
  return SparseDataset<Scalar>::from_examples(rows, d);
}

/// Writes LIBSVM text with 17 significant digits and labels as -1/+1.
template <typename Scalar>
void write_libsvm(const SparseDataset<Scalar> &data, std::ostream &out) {
  char buf[64];
  for (Index i = 0; i < data.n(); ++i) {
    out << (data.label(i) > 0 ? "+1" : "-1");
    for (typename SparseDataset<Scalar>::SparseMatrix::InnerIterator it(data.features(), i); it; ++it) {
      std::snprintf(buf, sizeof buf, " %lld:%.17g", static_cast<long long>(it.col() + 1),
                    static_cast<double>(it.value()));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace vrbb
