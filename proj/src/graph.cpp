#include "regnn/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "regnn/numeric.hpp"

namespace regnn::graph {

namespace {

void require_same_dim(std::size_t h_dim, std::size_t z_dim, const char* what) {
  if (h_dim != z_dim)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch, channel matrix is " +
                                std::to_string(h_dim) + "x" + std::to_string(h_dim) + " but signal has " +
                                std::to_string(z_dim) + " nodes");
}

}  // namespace

ChannelMatrix::ChannelMatrix(std::size_t dim) : dim_(dim), entries_(dim * dim, 0.0) {
  if (dim == 0) throw std::invalid_argument("ChannelMatrix: dimension must be at least 1");
}

ChannelMatrix::ChannelMatrix(std::size_t dim, std::vector<double> entries)
    : dim_(dim), entries_(std::move(entries)) {
  if (dim == 0) throw std::invalid_argument("ChannelMatrix: dimension must be at least 1");
  if (entries_.size() != dim * dim)
    throw std::invalid_argument("ChannelMatrix: expected " + std::to_string(dim * dim) + " entries, got " +
                                std::to_string(entries_.size()));
  for (double v : entries_)
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("ChannelMatrix: entries must be finite and nonnegative");
}

ChannelMatrix ChannelMatrix::identity(std::size_t dim) {
  ChannelMatrix H(dim);
  for (std::size_t i = 0; i < dim; ++i) H.entries_[i * dim + i] = 1.0;
  return H;
}

void ChannelMatrix::set(std::size_t i, std::size_t j, double value) {
  if (i >= dim_ || j >= dim_) throw std::out_of_range("ChannelMatrix::set: index out of range");
  if (!std::isfinite(value) || value < 0.0)
    throw std::invalid_argument("ChannelMatrix::set: entries must be finite and nonnegative");
  entries_[i * dim_ + j] = value;
}

GraphSignal::GraphSignal(std::size_t dim, std::size_t features)
    : dim_(dim), features_(features), values_(dim * features, 0.0) {}

GraphSignal::GraphSignal(std::vector<double> values)
    : dim_(values.size()), features_(1), values_(std::move(values)) {}

GraphSignal::GraphSignal(std::size_t dim, std::size_t features, std::vector<double> values)
    : dim_(dim), features_(features), values_(std::move(values)) {
  if (values_.size() != dim * features)
    throw std::invalid_argument("GraphSignal: value count does not match dim * features");
}

Permutation::Permutation(std::vector<std::size_t> mapping) : mapping_(std::move(mapping)) {
  std::vector<bool> seen(mapping_.size(), false);
  for (std::size_t target : mapping_) {
    if (target >= mapping_.size() || seen[target])
      throw std::invalid_argument("Permutation: mapping is not a bijection");
    seen[target] = true;
  }
}

Permutation Permutation::identity(std::size_t dim) {
  std::vector<std::size_t> mapping(dim);
  for (std::size_t i = 0; i < dim; ++i) mapping[i] = i;
  return Permutation(std::move(mapping));
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> inv(mapping_.size());
  for (std::size_t i = 0; i < mapping_.size(); ++i) inv[mapping_[i]] = i;
  return Permutation(std::move(inv));
}

void multiply(const ChannelMatrix& H, std::span<const double> in, std::span<double> out) {
  const std::size_t m = H.dim();
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = H.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += row[j] * in[j];
    out[i] = acc;
  }
}

void multiply_transposed(const ChannelMatrix& H, std::span<const double> in, std::span<double> out) {
  const std::size_t m = H.dim();
  for (std::size_t j = 0; j < m; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = H.row(i);
    const double w = in[i];
    for (std::size_t j = 0; j < m; ++j) out[j] += row[j] * w;
  }
}

GraphSignal shift(const ChannelMatrix& H, const GraphSignal& Z) {
  require_same_dim(H.dim(), Z.dim(), "shift");
  GraphSignal out(Z.dim(), Z.features());
  for (std::size_t f = 0; f < Z.features(); ++f) multiply(H, Z.feature(f), out.feature(f));
  return out;
}

std::vector<std::vector<double>> shifted_powers(const ChannelMatrix& H, std::span<const double> z,
                                                std::size_t count) {
  require_same_dim(H.dim(), z.size(), "shifted_powers");
  std::vector<std::vector<double>> powers;
  powers.reserve(count);
  if (count == 0) return powers;
  powers.emplace_back(z.begin(), z.end());
  for (std::size_t k = 1; k < count; ++k) {
    std::vector<double> next(z.size());
    multiply(H, powers.back(), next);
    powers.push_back(std::move(next));
  }
  return powers;
}

GraphSignal apply_filter(const ChannelMatrix& H, const GraphSignal& Z, std::span<const double> taps) {
  if (taps.empty()) throw std::invalid_argument("apply_filter: filter needs at least one tap");
  require_same_dim(H.dim(), Z.dim(), "apply_filter");
  const std::size_t m = Z.dim();
  GraphSignal out(m, Z.features());
  std::vector<double> current(m), next(m);
  for (std::size_t f = 0; f < Z.features(); ++f) {
    auto acc = out.feature(f);
    const auto z = Z.feature(f);
    current.assign(z.begin(), z.end());
    for (std::size_t i = 0; i < m; ++i) acc[i] = taps[0] * current[i];
    for (std::size_t k = 1; k < taps.size(); ++k) {
      multiply(H, current, next);
      std::swap(current, next);
      for (std::size_t i = 0; i < m; ++i) acc[i] += taps[k] * current[i];
    }
  }
  return out;
}

ChannelMatrix permute(const ChannelMatrix& H, const Permutation& perm) {
  if (H.dim() != perm.dim())
    throw std::invalid_argument("permute: permutation has " + std::to_string(perm.dim()) +
                                " entries but matrix is " + std::to_string(H.dim()) + "x" +
                                std::to_string(H.dim()));
  const std::size_t m = H.dim();
  const Permutation inv = perm.inverse();
  std::vector<double> entries(m * m);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < m; ++b) entries[a * m + b] = H(inv[a], inv[b]);
  return ChannelMatrix(m, std::move(entries));
}

GraphSignal permute(const GraphSignal& x, const Permutation& perm) {
  if (x.dim() != perm.dim())
    throw std::invalid_argument("permute: permutation has " + std::to_string(perm.dim()) +
                                " entries but signal has " + std::to_string(x.dim()) + " nodes");
  GraphSignal out(x.dim(), x.features());
  for (std::size_t f = 0; f < x.features(); ++f)
    for (std::size_t i = 0; i < x.dim(); ++i) out(perm[i], f) = x(i, f);
  return out;
}

std::vector<double> permute(std::span<const double> x, const Permutation& perm) {
  if (x.size() != perm.dim()) throw std::invalid_argument("permute: vector length does not match permutation");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[perm[i]] = x[i];
  return out;
}

std::pair<ChannelMatrix, GraphSignal> permute(const ChannelMatrix& H, const GraphSignal& x,
                                              const Permutation& perm) {
  require_same_dim(H.dim(), x.dim(), "permute");
  return {permute(H, perm), permute(x, perm)};
}

}  // namespace regnn::graph
