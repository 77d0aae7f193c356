#pragma once

// Model-free primal-dual training of the REGNN allocation policy.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "regnn/network.hpp"
#include "regnn/policy.hpp"
#include "regnn/wireless.hpp"

namespace regnn::train {

struct TrainConfig {
  std::size_t iters = 20000;
  double primal_step = 5e-3;
  double dual_step0 = 1e-2;
  double dual_decay = 0.9999;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch = 32;
  std::uint64_t seed = 1;
  std::size_t eval_every = 500;
  std::size_t eval_samples = 256;
  /// Subtract a moving average of the score weight (variance reduction).
  bool reward_baseline = true;
  double baseline_decay = 0.99;
  /// Initialize r to the first probed reward and lambda to its stationary value.
  bool warm_start = true;
  /// Damping rho: adds rho * (f - r) to the r update. 0 gives the undamped update.
  double reward_damping = 1.0;
  /// Constant step for the (r, lambda) pair; 0 makes them follow the dual schedule.
  double reward_step = 0.2;
  /// Initial taps are uniform on [-init_range, init_range].
  double init_range = 0.1;
  /// Added to the zero-order tap of every diagonal feature pair (f == g) of the hidden layers.
  double init_identity = 1.0;

  void validate() const;

  /// Dual step at iteration k: dual_step0 * dual_decay^k.
  double dual_step(std::size_t k) const;
};

class Adam {
 public:
  Adam(std::size_t size, double step, double beta1, double beta2, double eps);

  /// Moves params along the bias-corrected ADAM direction of grad (ascent).
  void ascend(std::span<double> params, std::span<const double> grad);
  std::size_t steps() const { return t_; }

 private:
  double step_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

struct DualState {
  std::vector<double> r;       // reward estimate, extended-reward dimension
  std::vector<double> lambda;  // paired with r
  std::vector<double> mu;      // one per constraint, kept >= 0
  std::vector<double> demand_estimate;  // running mean of node states (demand variant)
  double baseline = 0.0;
  std::size_t iteration = 0;
};

using RewardProbe =
    std::function<std::vector<double>(std::span<const double> allocation, const graph::ChannelMatrix& H,
                                      std::span<const double> node_state)>;

/// The constrained problem in the generic template: extended reward vector,
/// utility u0(r) and constraints u(r) >= 0. The reward is only available
/// through the black-box probe. For the budget variant the last reward
/// component is 1^T p / P_max and the constraint is 1 - r_{m+1} >= 0.
struct ExtendedProblem {
  wireless::Variant variant = wireless::Variant::sum_rate_budget;
  std::size_t nodes = 0;
  std::size_t reward_dim = 0;
  std::size_t constraint_dim = 0;

  RewardProbe probe;
  std::function<double(std::span<const double> r)> utility;
  std::function<std::vector<double>(std::span<const double> r)> utility_gradient;
  /// u(r); the demand estimate is ignored by the budget variant.
  std::function<std::vector<double>(std::span<const double> r, std::span<const double> demand_estimate)> constraints;
  /// (grad u(r)) mu, in reward coordinates.
  std::function<std::vector<double>(std::span<const double> r, std::span<const double> mu)> constraint_adjoint;
};

ExtendedProblem extend_problem(const wireless::ProblemSpec& problem, std::size_t m);

DualState initial_state(const ExtendedProblem& problem);

struct StateSample {
  graph::ChannelMatrix H;
  std::vector<double> x;  // node state fed to the REGNN
};

/// One fading draw plus node state: all-ones for the sum-rate problem (it has no
/// node state), exponential demands for the demand-constrained problem.
StateSample sample_state(const wireless::NetworkModel& network, const wireless::ProblemSpec& problem,
                         Rng& fading_rng, Rng& demand_rng, std::size_t draw_id = 0);

struct StepStats {
  std::vector<double> mean_reward;  // batch mean of the probed extended reward
  double sum_rate = 0.0;            // batch mean
};

/// One iteration of the primal-dual updates over a batch of sampled states.
StepStats primal_dual_step(DualState& state, gnn::FilterTensor& A, Adam& adam, std::span<const StateSample> batch,
                           const ExtendedProblem& problem, const wireless::ProblemSpec& spec,
                           const TrainConfig& config, Rng& policy_rng);

struct EvalSummary {
  std::vector<double> mean_rate;    // per node, sampled policy
  std::vector<double> mean_demand;  // per node
  double sum_rate = 0.0;            // sampled execution
  double threshold_sum_rate = 0.0;  // deterministic execution
  double mean_power = 0.0;          // average of 1^T p under sampled execution
  std::size_t samples = 0;
};

/// Held-out evaluation on draws from the fading-eval, policy-eval and demand-eval streams of seed.
EvalSummary evaluate(const gnn::FilterTensor& A, const wireless::NetworkModel& network,
                     const wireless::ProblemSpec& problem, std::size_t samples, std::uint64_t seed);

struct EvalRecord {
  std::size_t iteration = 0;
  double objective = 0.0;
  std::vector<double> slack;  // u(r) on the held-out estimate; the budget slack is a fraction of P_max
  double lambda_norm = 0.0;
  double mu_norm = 0.0;
  double sum_rate = 0.0;
  double threshold_sum_rate = 0.0;
  double mean_power = 0.0;
};

struct TrainReport {
  std::vector<EvalRecord> records;
  double min_mu = 0.0;  // smallest multiplier entry seen over all iterations
  std::vector<double> train_sum_rate;  // per-iteration batch mean
};

struct TrainResult {
  gnn::FilterTensor A;
  TrainReport report;
  DualState state;
};

gnn::FilterTensor initial_filters(const gnn::RegnnConfig& regnn_config, const TrainConfig& config, Rng& rng);

TrainResult train(const wireless::NetworkModel& network, const wireless::ProblemSpec& problem,
                  const gnn::RegnnConfig& regnn_config, const TrainConfig& config);

}  // namespace regnn::train
