#pragma once

// Random-edge graph neural network: stacked graph-filter banks over the
// channel matrix with pointwise nonlinearities, and its reverse-mode gradient.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "regnn/graph.hpp"
#include "regnn/rng.hpp"

namespace regnn::gnn {

enum class Nonlinearity { relu, abs, sigmoid };

std::string_view to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(std::string_view name);

double activate(Nonlinearity n, double y);
/// Derivative at y; subgradient 0 at the kinks of relu and abs.
double activate_derivative(Nonlinearity n, double y);

struct RegnnConfig {
  /// F_0..F_L; the first and last entries must be 1.
  std::vector<std::size_t> features;
  /// K_1..K_L.
  std::vector<std::size_t> taps;
  /// Used by layers 1..L-1. Layer L always applies the output sigmoid.
  Nonlinearity hidden = Nonlinearity::relu;

  std::size_t layers() const { return taps.size(); }
  void validate() const;

  /// L layers, F features in every hidden layer, filters of length K.
  static RegnnConfig uniform(std::size_t layers, std::size_t features, std::size_t taps,
                             Nonlinearity hidden = Nonlinearity::relu);

  bool operator==(const RegnnConfig&) const = default;
};

std::size_t num_params(const RegnnConfig& config);

/// All filter taps, flattened in (layer, in-feature, out-feature, tap) order.
class FilterTensor {
 public:
  explicit FilterTensor(RegnnConfig config);  // zero taps
  FilterTensor(RegnnConfig config, std::vector<double> flat);

  /// Taps i.i.d. uniform on [-range, range].
  static FilterTensor random_uniform(RegnnConfig config, double range, Rng& rng);

  const RegnnConfig& config() const { return config_; }
  std::size_t size() const { return flat_.size(); }

  /// Layer index is zero-based here (layer 0 is the first filter bank).
  std::size_t offset(std::size_t layer, std::size_t in_feature, std::size_t out_feature) const;
  std::span<const double> taps(std::size_t layer, std::size_t in_feature, std::size_t out_feature) const;
  std::span<double> taps(std::size_t layer, std::size_t in_feature, std::size_t out_feature);

  std::span<const double> flat() const { return flat_; }
  std::span<double> flat() { return flat_; }

  bool operator==(const FilterTensor&) const = default;

 private:
  RegnnConfig config_;
  std::vector<std::size_t> layer_offsets_;
  std::vector<double> flat_;
};

/// Raised when an activation overflows; names the offending layer (1-based).
class NumericError : public std::runtime_error {
 public:
  NumericError(std::size_t layer, const std::string& what)
      : std::runtime_error(what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

struct LayerTape {
  graph::GraphSignal input;                             // z_{l-1}
  std::vector<std::vector<std::vector<double>>> powers;  // [f][k] = H^k z_{l-1}^f
  graph::GraphSignal preactivation;                     // y_l
  graph::GraphSignal output;                            // z_l
};

struct ForwardTape {
  std::size_t dim = 0;
  std::vector<LayerTape> layers;

  /// Output probabilities, one per node.
  std::span<const double> probs() const { return layers.back().output.feature(0); }
};

ForwardTape forward(const FilterTensor& A, const graph::ChannelMatrix& H, const graph::GraphSignal& x);

/// Gradient of <grad_out, output> with respect to every tap, flattened like FilterTensor.
std::vector<double> backward(const ForwardTape& tape, const FilterTensor& A, const graph::ChannelMatrix& H,
                             std::span<const double> grad_out);

/// Versioned text checkpoint; taps written with 17 significant digits.
std::string to_checkpoint(const FilterTensor& A);
FilterTensor from_checkpoint(std::string_view text);
void save_checkpoint(const FilterTensor& A, const std::string& path);
FilterTensor load_checkpoint(const std::string& path);

}  // namespace regnn::gnn
