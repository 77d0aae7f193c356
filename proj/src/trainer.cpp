#include "regnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "regnn/numeric.hpp"

namespace regnn::train {

using graph::ChannelMatrix;
using graph::GraphSignal;
using wireless::Variant;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void require_finite(std::span<const double> v, const char* what, std::size_t iteration) {
  if (!all_finite(v))
    throw std::runtime_error(std::string("primal_dual_step: non-finite ") + what + " at iteration " +
                             std::to_string(iteration));
}

}  // namespace

void TrainConfig::validate() const {
  if (!(primal_step >= 0.0)) throw std::invalid_argument("train: primal_step must be nonnegative");
  if (!(dual_step0 >= 0.0)) throw std::invalid_argument("train: dual_step0 must be nonnegative");
  if (!(dual_decay > 0.0 && dual_decay <= 1.0)) throw std::invalid_argument("train: dual_decay must lie in (0, 1]");
  if (batch == 0) throw std::invalid_argument("train: batch must be at least 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw std::invalid_argument("train: ADAM betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("train: adam_eps must be positive");
  if (eval_every == 0) throw std::invalid_argument("train: eval_every must be at least 1");
  if (eval_samples == 0) throw std::invalid_argument("train: eval_samples must be at least 1");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0))
    throw std::invalid_argument("train: baseline_decay must lie in [0, 1)");
  if (!(reward_step >= 0.0)) throw std::invalid_argument("train: reward_step must be nonnegative");
  if (!(reward_damping >= 0.0)) throw std::invalid_argument("train: reward_damping must be nonnegative");
  if (!(init_range >= 0.0)) throw std::invalid_argument("train: init_range must be nonnegative");
}

double TrainConfig::dual_step(std::size_t k) const {
  return dual_step0 * std::pow(dual_decay, static_cast<double>(k));
}

Adam::Adam(std::size_t size, double step, double beta1, double beta2, double eps)
    : step_(step), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void Adam::ascend(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("Adam: parameter/gradient size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] += step_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

ExtendedProblem extend_problem(const wireless::ProblemSpec& spec, std::size_t m) {
  spec.validate();
  ExtendedProblem p;
  p.variant = spec.variant;
  p.nodes = m;
  const double sigma2 = spec.sigma2;

  switch (spec.variant) {
    case Variant::sum_rate_budget: {
      const double p_max = spec.p_max;
      p.reward_dim = m + 1;
      p.constraint_dim = 1;
      // The budget component is measured in units of P_max so its scale does not depend on p0 or m.
      p.probe = [sigma2, p_max](std::span<const double> alloc, const ChannelMatrix& H, std::span<const double>) {
        std::vector<double> f = wireless::capacity(alloc, H, sigma2);
        f.push_back(std::accumulate(alloc.begin(), alloc.end(), 0.0) / p_max);
        return f;
      };
      p.utility = [m](std::span<const double> r) { return std::accumulate(r.begin(), r.begin() + m, 0.0); };
      p.utility_gradient = [m](std::span<const double>) {
        std::vector<double> g(m + 1, 1.0);
        g[m] = 0.0;
        return g;
      };
      p.constraints = [m](std::span<const double> r, std::span<const double>) {
        return std::vector<double>{1.0 - r[m]};
      };
      p.constraint_adjoint = [m](std::span<const double>, std::span<const double> mu) {
        std::vector<double> g(m + 1, 0.0);
        g[m] = -mu[0];
        return g;
      };
      break;
    }
    case Variant::demand_constrained: {
      p.reward_dim = m;
      p.constraint_dim = m;
      p.probe = [sigma2](std::span<const double> alloc, const ChannelMatrix& H, std::span<const double>) {
        return wireless::capacity(alloc, H, sigma2);
      };
      p.utility = [](std::span<const double> r) { return std::accumulate(r.begin(), r.end(), 0.0); };
      p.utility_gradient = [m](std::span<const double>) { return std::vector<double>(m, 1.0); };
      p.constraints = [m](std::span<const double> r, std::span<const double> demand) {
        std::vector<double> u(m);
        for (std::size_t i = 0; i < m; ++i) u[i] = r[i] - demand[i];
        return u;
      };
      p.constraint_adjoint = [](std::span<const double>, std::span<const double> mu) {
        return std::vector<double>(mu.begin(), mu.end());
      };
      break;
    }
  }
  return p;
}

DualState initial_state(const ExtendedProblem& problem) {
  DualState s;
  s.r.assign(problem.reward_dim, 0.0);
  s.lambda.assign(problem.reward_dim, 0.0);
  s.mu.assign(problem.constraint_dim, 0.0);
  s.demand_estimate.assign(problem.variant == Variant::demand_constrained ? problem.nodes : 0, 0.0);
  return s;
}

StateSample sample_state(const wireless::NetworkModel& network, const wireless::ProblemSpec& problem,
                         Rng& fading_rng, Rng& demand_rng, std::size_t draw_id) {
  StateSample s{wireless::sample_fading(network, fading_rng, problem.rayleigh_scale, draw_id).H, {}};
  if (problem.variant == Variant::demand_constrained)
    s.x = wireless::sample_demand(network.m, problem.demand_mean, demand_rng);
  else
    s.x.assign(network.m, 1.0);
  return s;
}

StepStats primal_dual_step(DualState& state, gnn::FilterTensor& A, Adam& adam, std::span<const StateSample> batch,
                           const ExtendedProblem& problem, const wireless::ProblemSpec& spec,
                           const TrainConfig& config, Rng& policy_rng) {
  if (batch.empty()) throw std::invalid_argument("primal_dual_step: empty batch");
  const std::size_t D = problem.reward_dim;
  const std::size_t m = problem.nodes;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  StepStats stats;
  stats.mean_reward.assign(D, 0.0);
  std::vector<double> mean_x(m, 0.0);

  // Probe phase: the reward is observed, never differentiated.
  struct Probe {
    gnn::ForwardTape tape;
    policy::PolicySample draw;
    std::vector<double> reward;
  };
  std::vector<Probe> probes;
  probes.reserve(batch.size());
  for (const StateSample& s : batch) {
    if (s.H.dim() != m || s.x.size() != m)
      throw std::invalid_argument("primal_dual_step: sample dimension does not match the problem");
    Probe p{gnn::forward(A, s.H, GraphSignal(s.x)), {}, {}};
    p.draw = policy::sample(p.tape.probs(), spec.spec, policy_rng);
    p.reward = problem.probe(p.draw.allocation, s.H, s.x);
    for (std::size_t d = 0; d < D; ++d) stats.mean_reward[d] += p.reward[d] * inv_b;
    for (std::size_t i = 0; i < m; ++i) {
      stats.sum_rate += p.reward[i] * inv_b;
      mean_x[i] += s.x[i] * inv_b;
    }
    probes.push_back(std::move(p));
  }

  if (config.warm_start && state.iteration == 0) {
    // Start (r, lambda) at the stationary point of their own updates.
    state.r = stats.mean_reward;
    if (!state.demand_estimate.empty()) state.demand_estimate = mean_x;
    const std::vector<double> du0 = problem.utility_gradient(state.r);
    const std::vector<double> du_mu = problem.constraint_adjoint(state.r, state.mu);
    for (std::size_t d = 0; d < D; ++d) state.lambda[d] = du0[d] + du_mu[d];
  }

  // Score-function estimate of grad_A E[f]^T lambda; backward is linear in grad_out.
  std::vector<double> grad_A(A.size(), 0.0);
  double mean_weight = 0.0;
  const std::vector<double>& score_weights = state.lambda;
  for (std::size_t b = 0; b < probes.size(); ++b) {
    const Probe& p = probes[b];
    const double weight = dot(p.reward, score_weights);
    mean_weight += weight * inv_b;
    const double centered = config.reward_baseline ? weight - state.baseline : weight;
    std::vector<double> score = policy::grad_log_prob(p.draw, p.tape.probs());
    for (double& g : score) g *= centered * inv_b;
    const std::vector<double> g = gnn::backward(p.tape, A, batch[b].H, score);
    for (std::size_t i = 0; i < grad_A.size(); ++i) grad_A[i] += g[i];
  }
  if (config.reward_baseline && state.iteration == 0) state.baseline = mean_weight;

  const double eps = config.dual_step(state.iteration);
  const double eta = config.reward_step > 0.0 ? config.reward_step : eps;
  if (!state.demand_estimate.empty())
    for (std::size_t i = 0; i < m; ++i) state.demand_estimate[i] += eps * (mean_x[i] - state.demand_estimate[i]);

  const std::vector<double> du0 = problem.utility_gradient(state.r);
  const std::vector<double> du_mu = problem.constraint_adjoint(state.r, state.mu);
  const std::vector<double> u = problem.constraints(state.r, state.demand_estimate);

  std::vector<double> r_next(D), lambda_next(D), mu_next(state.mu.size());
  for (std::size_t d = 0; d < D; ++d) {
    r_next[d] = state.r[d] + eta * (du0[d] + du_mu[d] - state.lambda[d] +
                                     config.reward_damping * (stats.mean_reward[d] - state.r[d]));
    lambda_next[d] = state.lambda[d] - eta * (stats.mean_reward[d] - state.r[d]);
  }
  for (std::size_t c = 0; c < mu_next.size(); ++c) mu_next[c] = std::max(0.0, state.mu[c] - eps * u[c]);

  require_finite(r_next, "reward estimate", state.iteration);
  require_finite(lambda_next, "lambda", state.iteration);
  require_finite(mu_next, "mu", state.iteration);
  require_finite(grad_A, "policy gradient", state.iteration);

  state.r = std::move(r_next);
  state.lambda = std::move(lambda_next);
  state.mu = std::move(mu_next);
  if (config.reward_baseline)
    state.baseline = config.baseline_decay * state.baseline + (1.0 - config.baseline_decay) * mean_weight;
  adam.ascend(A.flat(), grad_A);
  require_finite(A.flat(), "filter taps", state.iteration);
  ++state.iteration;
  return stats;
}

EvalSummary evaluate(const gnn::FilterTensor& A, const wireless::NetworkModel& network,
                     const wireless::ProblemSpec& problem, std::size_t samples, std::uint64_t seed) {
  Rng fading = make_stream(seed, stream::fading_eval);
  Rng demand = make_stream(seed, stream::demand_eval);
  Rng pol = make_stream(seed, stream::policy_eval);
  const std::size_t m = network.m;
  EvalSummary out;
  out.samples = samples;
  out.mean_rate.assign(m, 0.0);
  out.mean_demand.assign(m, 0.0);
  if (samples == 0) return out;
  const double inv = 1.0 / static_cast<double>(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const StateSample st = sample_state(network, problem, fading, demand, s);
    const gnn::ForwardTape tape = gnn::forward(A, st.H, GraphSignal(st.x));
    const auto draw = policy::sample(tape.probs(), problem.spec, pol);
    const auto rates = wireless::capacity(draw.allocation, st.H, problem.sigma2);
    const auto det = policy::threshold(tape.probs(), problem.spec);
    out.threshold_sum_rate += wireless::sum_rate(det, st.H, problem.sigma2) * inv;
    for (std::size_t i = 0; i < m; ++i) {
      out.mean_rate[i] += rates[i] * inv;
      out.mean_demand[i] += st.x[i] * inv;
      out.sum_rate += rates[i] * inv;
      out.mean_power += draw.allocation[i] * inv;
    }
  }
  return out;
}

namespace {

EvalRecord make_record(std::size_t iteration, const EvalSummary& e, const ExtendedProblem& problem,
                       const wireless::ProblemSpec& spec, const DualState& state) {
  std::vector<double> r_hat = e.mean_rate;
  if (problem.variant == Variant::sum_rate_budget) r_hat.push_back(e.mean_power / spec.p_max);
  EvalRecord rec;
  rec.iteration = iteration;
  rec.objective = problem.utility(r_hat);
  rec.slack = problem.constraints(r_hat, e.mean_demand);
  rec.lambda_norm = norm(state.lambda);
  rec.mu_norm = norm(state.mu);
  rec.sum_rate = e.sum_rate;
  rec.threshold_sum_rate = e.threshold_sum_rate;
  rec.mean_power = e.mean_power;
  return rec;
}

}  // namespace

gnn::FilterTensor initial_filters(const gnn::RegnnConfig& regnn_config, const TrainConfig& config, Rng& rng) {
  gnn::FilterTensor A = gnn::FilterTensor::random_uniform(regnn_config, config.init_range, rng);
  if (config.init_identity != 0.0)
    for (std::size_t l = 0; l + 1 < regnn_config.layers(); ++l)
      for (std::size_t f = 0; f < std::min(regnn_config.features[l], regnn_config.features[l + 1]); ++f)
        A.taps(l, f, f)[0] += config.init_identity;
  return A;
}

TrainResult train(const wireless::NetworkModel& network, const wireless::ProblemSpec& problem,
                  const gnn::RegnnConfig& regnn_config, const TrainConfig& config) {
  config.validate();
  problem.validate();
  network.validate();
  const ExtendedProblem ext = extend_problem(problem, network.m);

  Rng init = make_stream(config.seed, stream::init);
  Rng fading = make_stream(config.seed, stream::fading_train);
  Rng demand = make_stream(config.seed, stream::demand);
  Rng pol = make_stream(config.seed, stream::policy);

  TrainResult result{initial_filters(regnn_config, config, init), {}, initial_state(ext)};
  Adam adam(result.A.size(), config.primal_step, config.adam_beta1, config.adam_beta2, config.adam_eps);

  std::vector<StateSample> batch;
  batch.reserve(config.batch);
  for (std::size_t k = 0; k < config.iters; ++k) {
    batch.clear();
    for (std::size_t b = 0; b < config.batch; ++b)
      batch.push_back(sample_state(network, problem, fading, demand, k * config.batch + b));
    const StepStats stats = primal_dual_step(result.state, result.A, adam, batch, ext, problem, config, pol);
    result.report.train_sum_rate.push_back(stats.sum_rate);
    for (double mu : result.state.mu) result.report.min_mu = std::min(result.report.min_mu, mu);

    const std::size_t done = k + 1;
    if (done % config.eval_every == 0 || done == config.iters) {
      const EvalSummary e = evaluate(result.A, network, problem, config.eval_samples, config.seed);
      result.report.records.push_back(make_record(done, e, ext, problem, result.state));
    }
  }
  return result;
}

}  // namespace regnn::train
