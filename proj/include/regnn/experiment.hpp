#pragma once

// Experiment configuration and the work behind each CLI subcommand. Every
// command is a plain function so it can be driven from tests as well as
// from the command line.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "regnn/network.hpp"
#include "regnn/trainer.hpp"
#include "regnn/wireless.hpp"

namespace regnn::experiment {

/// Invalid or unreadable configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NetworkSection {
  wireless::Topology topology = wireless::Topology::adhoc;
  std::size_t m = 20;
  std::size_t n = 0;  // receivers; 0 means m for ad-hoc networks
  double density_factor = 1.0;
  std::size_t size_ref = 0;  // 0 means m
  std::optional<std::uint64_t> seed;  // topology seed; defaults to the master seed
};

struct ProblemSection {
  wireless::Variant variant = wireless::Variant::sum_rate_budget;
  double sigma2 = 1.0;
  std::optional<double> p_max;  // defaults to m * p0 / 2
  double p0 = 1.0;
  double demand_mean = 0.05;
  double rayleigh_scale = wireless::kUnitPowerRayleighScale;
};

struct OutputSection {
  std::string directory = "out";
  std::size_t eval_every = 500;
  std::size_t eval_samples = 256;
};

struct ExperimentConfig {
  NetworkSection network;
  ProblemSection problem;
  gnn::RegnnConfig regnn = gnn::RegnnConfig::uniform(8, 1, 5);
  train::TrainConfig train;
  OutputSection output;

  void validate() const;

  std::uint64_t seed() const { return train.seed; }
  std::uint64_t topology_seed() const { return network.seed.value_or(train.seed); }
  std::size_t receivers() const;

  /// Problem for a network of m users. An explicit p_max is per training
  /// size and scales linearly with m; the default is m * p0 / 2.
  wireless::ProblemSpec problem_spec(std::size_t m) const;

  /// Training settings with the output section's evaluation cadence folded in.
  train::TrainConfig train_config() const;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Fully resolved configuration as JSON with sorted keys.
std::string to_json(const ExperimentConfig& config);
/// FNV-1a of the resolved config without output.directory.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string hash_hex(std::uint64_t hash);

/// First line of every CSV: "# seed=<seed> config_hash=<hex>".
std::string csv_comment(std::uint64_t seed, std::uint64_t hash);

wireless::NetworkModel make_network(const ExperimentConfig& config);

/// Generates a network of m users with the config's topology kind, scaled
/// to constant density against size_ref.
wireless::NetworkModel make_network(const ExperimentConfig& config, std::size_t m, double density_factor,
                                    std::size_t size_ref, Rng& rng);

// ---- train ----

struct TrainArtifacts {
  std::string checkpoint;
  std::string metrics_csv;
  std::string run_header;
  std::string network;
  train::TrainResult result;
};

std::string train_csv(const train::TrainReport& report, std::uint64_t seed, std::uint64_t hash);

/// Trains on the given network (or one generated from the config) and
/// writes checkpoint.json, train.csv, run.json and network.json into dir.
TrainArtifacts run_train(const ExperimentConfig& config, const std::string& dir,
                         const std::optional<wireless::NetworkModel>& network = std::nullopt);

// ---- eval ----

/// Per-draw sum-rates (nats) of every policy on one shared fading draw.
struct PairedDraw {
  std::size_t draw = 0;
  double regnn_sampled = 0.0;
  double regnn_threshold = 0.0;
  double wmmse = 0.0;
  double equal = 0.0;
  double random = 0.0;
};

struct PairedMeans {
  double regnn_sampled = 0.0;
  double regnn_threshold = 0.0;
  double wmmse = 0.0;
  double equal = 0.0;
  double random = 0.0;
};

/// Draws come from the fading-eval / demand-eval / policy-eval streams of
/// seed, in the same order as the trainer's held-out evaluation; the random
/// baseline uses the baseline stream.
std::vector<PairedDraw> paired_evaluation(const gnn::FilterTensor& A, const wireless::NetworkModel& network,
                                          const wireless::ProblemSpec& problem, std::size_t samples,
                                          std::uint64_t seed);
PairedMeans means(std::span<const PairedDraw> draws);
std::string eval_csv(std::span<const PairedDraw> draws, std::uint64_t seed, std::uint64_t hash);

// ---- baseline ----

struct BaselineDraw {
  std::size_t draw = 0;
  double wmmse = 0.0;
  double equal = 0.0;
  double random = 0.0;
  std::size_t wmmse_iterations = 0;
  bool wmmse_converged = false;
};

std::vector<BaselineDraw> baseline_evaluation(const wireless::NetworkModel& network,
                                              const wireless::ProblemSpec& problem, std::size_t samples,
                                              std::uint64_t seed);
std::string baseline_csv(std::span<const BaselineDraw> draws, std::uint64_t seed, std::uint64_t hash);

// ---- transfer ----

struct TransferOptions {
  std::vector<std::size_t> sizes;
  std::size_t networks = 20;
  std::size_t samples = 100;
  double density_factor = 1.0;
};

struct TransferRow {
  std::size_t m = 0;
  std::string policy;  // regnn_sampled, regnn_threshold, wmmse, equal, random
  std::size_t networks = 0;
  std::size_t samples = 0;  // per network
  double mean = 0.0;
  double std_error = 0.0;
  double p10 = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
};

/// Evaluates A on fresh networks of each size at constant density against
/// the training size (config.network.m).
std::vector<TransferRow> run_transfer(const gnn::FilterTensor& A, const ExperimentConfig& config,
                                      const TransferOptions& options);
std::string transfer_csv(std::span<const TransferRow> rows, std::uint64_t seed, std::uint64_t hash);

}  // namespace regnn::experiment
