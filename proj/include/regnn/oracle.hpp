#pragma once

// Independent reference computations and the oracle-check suite. The
// references are written the slow, obvious way (explicit matrix powers,
// scalar loops, finite differences) so they share no code path with the
// library routines they check.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "regnn/graph.hpp"
#include "regnn/network.hpp"
#include "regnn/policy.hpp"
#include "regnn/rng.hpp"

namespace regnn::oracle {

using Dense = std::vector<std::vector<double>>;

Dense to_dense(const graph::ChannelMatrix& H);
Dense matrix_power(const graph::ChannelMatrix& H, std::size_t k);

/// sum_k taps[k] H^k z with every power formed explicitly.
std::vector<double> reference_filter(const graph::ChannelMatrix& H, std::span<const double> z,
                                     std::span<const double> taps);

/// Straight-line REGNN forward pass on explicit powers; returns the output probabilities.
std::vector<double> reference_forward(const gnn::FilterTensor& A, const graph::ChannelMatrix& H,
                                      std::span<const double> x);

/// Per-user rate computed term by term.
std::vector<double> reference_capacity(std::span<const double> p, const graph::ChannelMatrix& H, double sigma2);

/// Central differences of fn at params, one coordinate at a time.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& fn,
                                       std::span<const double> params, double step);

// Random instances.
graph::ChannelMatrix random_channel(std::size_t m, Rng& rng);
std::vector<double> random_vector(std::size_t m, double lo, double hi, Rng& rng);
graph::Permutation random_permutation(std::size_t m, Rng& rng);
/// L in [1, max_layers], K_l in [1, max_taps], hidden widths in [1, max_features], random nonlinearity.
gnn::RegnnConfig random_config(Rng& rng, std::size_t max_layers, std::size_t max_taps, std::size_t max_features);

/// max |Phi(P^T H P, P^T x) - P^T Phi(H, x)|.
double equivariance_residual(const gnn::FilterTensor& A, const graph::ChannelMatrix& H, std::span<const double> x,
                             const graph::Permutation& perm);

/// max |c(P^T p, P^T H P) - P^T c(p, H)|.
double reward_equivariance_residual(std::span<const double> p, const graph::ChannelMatrix& H, double sigma2,
                                    const graph::Permutation& perm);

using BackwardFn = std::function<std::vector<double>(const gnn::ForwardTape&, const gnn::FilterTensor&,
                                                     const graph::ChannelMatrix&, std::span<const double>)>;

/// Largest per-tap relative error between the chained score gradient
/// backward(tape, grad_log_prob(draws)) and central differences of log Psi.
/// Relative error uses max(|reference|, floor * max(1, |log Psi|)) as
/// denominator, which sits above the O(eps |log Psi| / step) round-off of the
/// difference quotient.
double score_gradient_error(const gnn::FilterTensor& A, const graph::ChannelMatrix& H, std::span<const double> x,
                            std::span<const std::uint8_t> draws, const BackwardFn& backward_fn,
                            double step, double floor = 1e-4);

struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  std::vector<std::uint64_t> failing_seeds;  // per-instance seeds of the breaches

  bool passed() const { return failing_seeds.empty(); }
};

struct OracleOptions {
  std::size_t m = 4;
  std::size_t instances = 100;
  std::uint64_t seed = 1;
  BackwardFn backward = gnn::backward;  // replaceable for mutation testing
};

struct OracleReport {
  std::vector<CheckResult> checks;
  bool passed() const;
};

/// Capacity, filter-power, gradient, equivariance and brute-force checks on
/// random instances of size m (m <= 10).
OracleReport run_oracle_checks(const OracleOptions& options);

}  // namespace regnn::oracle
