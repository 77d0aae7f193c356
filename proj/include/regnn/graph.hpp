#pragma once

// Dense graph-signal algebra: the channel matrix doubles as the graph shift operator.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace regnn::graph {

/// Square nonnegative matrix, row-major. Entry (i, j) is the gain from
/// transmitter i to the receiver paired with node j.
class ChannelMatrix {
 public:
  ChannelMatrix() = default;
  explicit ChannelMatrix(std::size_t dim);  // zero matrix
  ChannelMatrix(std::size_t dim, std::vector<double> entries);

  static ChannelMatrix identity(std::size_t dim);

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * dim_ + j]; }
  std::span<const double> row(std::size_t i) const { return {entries_.data() + i * dim_, dim_}; }
  std::span<const double> entries() const { return entries_; }

  /// Checked write; rejects negative or non-finite gains.
  void set(std::size_t i, std::size_t j, double value);

  bool operator==(const ChannelMatrix&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> entries_;
};

/// m nodes by F features, stored feature-major so each feature is contiguous.
class GraphSignal {
 public:
  GraphSignal() = default;
  GraphSignal(std::size_t dim, std::size_t features);
  /// Single-feature signal.
  explicit GraphSignal(std::vector<double> values);
  GraphSignal(std::size_t dim, std::size_t features, std::vector<double> values);

  std::size_t dim() const { return dim_; }
  std::size_t features() const { return features_; }

  double operator()(std::size_t node, std::size_t feature) const { return values_[feature * dim_ + node]; }
  double& operator()(std::size_t node, std::size_t feature) { return values_[feature * dim_ + node]; }

  std::span<const double> feature(std::size_t f) const { return {values_.data() + f * dim_, dim_}; }
  std::span<double> feature(std::size_t f) { return {values_.data() + f * dim_, dim_}; }
  std::span<const double> values() const { return values_; }

  bool operator==(const GraphSignal&) const = default;

 private:
  std::size_t dim_ = 0;
  std::size_t features_ = 0;
  std::vector<double> values_;
};

/// Node relabeling. Node i is moved to position mapping[i], so that
/// (P^T H P)(mapping[i], mapping[j]) == H(i, j).
class Permutation {
 public:
  explicit Permutation(std::vector<std::size_t> mapping);
  static Permutation identity(std::size_t dim);

  std::size_t dim() const { return mapping_.size(); }
  std::size_t operator[](std::size_t i) const { return mapping_[i]; }
  std::span<const std::size_t> mapping() const { return mapping_; }

  Permutation inverse() const;

 private:
  std::vector<std::size_t> mapping_;
};

/// out = H * in for one feature column.
void multiply(const ChannelMatrix& H, std::span<const double> in, std::span<double> out);
/// out = H^T * in for one feature column.
void multiply_transposed(const ChannelMatrix& H, std::span<const double> in, std::span<double> out);

GraphSignal shift(const ChannelMatrix& H, const GraphSignal& Z);

/// H^k z for k = 0..count-1, by iterated shifts.
std::vector<std::vector<double>> shifted_powers(const ChannelMatrix& H, std::span<const double> z,
                                                std::size_t count);

/// sum_k taps[k] H^k Z, evaluated by iterated shifts with a running accumulator.
GraphSignal apply_filter(const ChannelMatrix& H, const GraphSignal& Z, std::span<const double> taps);

/// Returns (P^T H P, P^T x) by index gather.
std::pair<ChannelMatrix, GraphSignal> permute(const ChannelMatrix& H, const GraphSignal& x,
                                              const Permutation& perm);
ChannelMatrix permute(const ChannelMatrix& H, const Permutation& perm);
GraphSignal permute(const GraphSignal& x, const Permutation& perm);
std::vector<double> permute(std::span<const double> x, const Permutation& perm);

}  // namespace regnn::graph
