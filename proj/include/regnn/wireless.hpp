#pragma once

// Interference-channel model: topologies, fading, per-user capacity, and the
// classical allocators the learned policy is benchmarked against.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "regnn/graph.hpp"
#include "regnn/policy.hpp"
#include "regnn/rng.hpp"

namespace regnn::wireless {

inline constexpr double kPathLossExponent = 2.2;
inline constexpr double kUnitPowerRayleighScale = 0.70710678118654752440;  // 1/sqrt(2)

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

enum class Topology { adhoc, multicell };

std::string_view to_string(Topology t);
Topology parse_topology(std::string_view name);

struct NetworkModel {
  Topology kind = Topology::adhoc;
  std::size_t m = 0;  // transmitters
  std::size_t n = 0;  // receivers
  std::vector<Point> tx;
  std::vector<Point> rx;
  std::vector<std::size_t> pairing;  // transmitter -> receiver index
  graph::ChannelMatrix pathloss;     // (i, j): ||tx_i - rx_{r(j)}||^-2.2

  /// Rebuilds the path-loss matrix from positions and pairing.
  void compute_pathloss();
  void validate() const;
};

/// Transmitters uniform in [-s, s]^2 with s = size_ref * sqrt(m / size_ref) / density;
/// each receiver uniform in a box of half-width size_ref / 4 around its transmitter.
/// size_ref = 0 means size_ref = m.
NetworkModel generate_adhoc(std::size_t m, Rng& rng, double density = 1.0, std::size_t size_ref = 0);

/// n base stations on a grid over [-s, s]^2 (s as in generate_adhoc), m / n users
/// uniform in each station's cell, each user served by its own cell's station.
NetworkModel generate_multicell(std::size_t m, std::size_t n, Rng& rng, double density = 1.0,
                                std::size_t size_ref = 0);

double adhoc_half_width(std::size_t m, double density, std::size_t size_ref);

struct FadingSample {
  graph::ChannelMatrix H;
  std::size_t draw_id = 0;
};

/// H = pathloss (elementwise) Rayleigh fading.
FadingSample sample_fading(const NetworkModel& model, Rng& rng, double rayleigh_scale = kUnitPowerRayleighScale,
                           std::size_t draw_id = 0);

double sample_rayleigh(Rng& rng, double scale);
double sample_exponential(Rng& rng, double mean);

/// r_i = ln(1 + h_ii^2 p_i / (sigma2 + sum_{j != i} h_ji^2 p_j)), in nats.
std::vector<double> capacity(std::span<const double> p, const graph::ChannelMatrix& H, double sigma2);
double sum_rate(std::span<const double> p, const graph::ChannelMatrix& H, double sigma2);

struct WmmseResult {
  std::vector<double> power;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Weighted-MMSE block-coordinate ascent for the scalar interference channel,
/// started from full power. Returns powers in [0, p0].
WmmseResult wmmse(const graph::ChannelMatrix& H, double sigma2, double p0, std::size_t max_iters = 100,
                  double tol = 1e-6);

std::vector<double> equal_power(std::size_t m, double p_max);
/// p0 on a uniformly random subset of floor(p_max / p0) users.
std::vector<double> random_selection(std::size_t m, double p_max, double p0, Rng& rng);

struct BruteForceResult {
  std::vector<double> allocation;
  double sum_rate = 0.0;
};

/// Exhaustive instantaneous sum-rate maximizer over {0, p0}^m, m <= 16.
BruteForceResult brute_force_binary(const graph::ChannelMatrix& H, double sigma2, double p0);

/// i.i.d. exponential node demands.
std::vector<double> sample_demand(std::size_t m, double mean, Rng& rng);

enum class Variant { sum_rate_budget, demand_constrained };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct ProblemSpec {
  double sigma2 = 1.0;
  double p_max = 1.0;
  policy::AllocationSpec spec;
  Variant variant = Variant::sum_rate_budget;
  double demand_mean = 0.05;
  double rayleigh_scale = kUnitPowerRayleighScale;

  void validate() const;
};

std::string to_text(const NetworkModel& model);
NetworkModel network_from_text(std::string_view text);
void save_network(const NetworkModel& model, const std::string& path);
NetworkModel load_network(const std::string& path);

}  // namespace regnn::wireless
