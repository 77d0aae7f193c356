#include "regnn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "regnn/numeric.hpp"
#include "regnn/wireless.hpp"

namespace regnn::oracle {

using graph::ChannelMatrix;
using graph::GraphSignal;
using graph::Permutation;

Dense to_dense(const ChannelMatrix& H) {
  const std::size_t m = H.dim();
  Dense D(m, std::vector<double>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) D[i][j] = H(i, j);
  return D;
}

Dense matrix_power(const ChannelMatrix& H, std::size_t k) {
  const std::size_t m = H.dim();
  Dense P(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) P[i][i] = 1.0;
  const Dense D = to_dense(H);
  for (std::size_t step = 0; step < k; ++step) {
    Dense next(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t t = 0; t < m; ++t) next[i][j] += P[i][t] * D[t][j];
    P = std::move(next);
  }
  return P;
}

std::vector<double> reference_filter(const ChannelMatrix& H, std::span<const double> z,
                                     std::span<const double> taps) {
  const std::size_t m = H.dim();
  std::vector<double> out(m, 0.0);
  for (std::size_t k = 0; k < taps.size(); ++k) {
    const Dense P = matrix_power(H, k);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += P[i][j] * z[j];
      out[i] += taps[k] * s;
    }
  }
  return out;
}

namespace {

double act(gnn::Nonlinearity n, double y) {
  switch (n) {
    case gnn::Nonlinearity::relu:
      return y > 0.0 ? y : 0.0;
    case gnn::Nonlinearity::abs:
      return y < 0.0 ? -y : y;
    case gnn::Nonlinearity::sigmoid:
      return 1.0 / (1.0 + std::exp(-y));
  }
  return y;
}

}  // namespace

std::vector<double> reference_forward(const gnn::FilterTensor& A, const ChannelMatrix& H,
                                      std::span<const double> x) {
  const gnn::RegnnConfig& c = A.config();
  const std::size_t L = c.layers();
  std::vector<std::vector<double>> z{std::vector<double>(x.begin(), x.end())};
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<std::vector<double>> next(c.features[l + 1], std::vector<double>(H.dim(), 0.0));
    for (std::size_t g = 0; g < c.features[l + 1]; ++g) {
      for (std::size_t f = 0; f < c.features[l]; ++f) {
        const std::vector<double> y = reference_filter(H, z[f], A.taps(l, f, g));
        for (std::size_t i = 0; i < H.dim(); ++i) next[g][i] += y[i];
      }
      const gnn::Nonlinearity n = l + 1 == L ? gnn::Nonlinearity::sigmoid : c.hidden;
      for (double& v : next[g]) v = act(n, v);
    }
    z = std::move(next);
  }
  return z[0];
}

std::vector<double> reference_capacity(std::span<const double> p, const ChannelMatrix& H, double sigma2) {
  const std::size_t m = H.dim();
  std::vector<double> r(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double signal = H(i, i) * H(i, i) * p[i];
    double interference = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) interference += H(j, i) * H(j, i) * p[j];
    r[i] = std::log(1.0 + signal / (sigma2 + interference));
  }
  return r;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& fn,
                                       std::span<const double> params, double step) {
  std::vector<double> work(params.begin(), params.end());
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = work[i];
    work[i] = saved + step;
    const double up = fn(work);
    work[i] = saved - step;
    const double down = fn(work);
    work[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

ChannelMatrix random_channel(std::size_t m, Rng& rng) {
  // Entries on [0, 2/m) keep row sums near 1, so high powers of H stay bounded.
  std::vector<double> e(m * m);
  for (double& v : e) v = 2.0 * uniform01(rng) / static_cast<double>(m);
  return ChannelMatrix(m, std::move(e));
}

std::vector<double> random_vector(std::size_t m, double lo, double hi, Rng& rng) {
  std::vector<double> v(m);
  for (double& x : v) x = lo + (hi - lo) * uniform01(rng);
  return v;
}

Permutation random_permutation(std::size_t m, Rng& rng) {
  std::vector<std::size_t> map(m);
  std::iota(map.begin(), map.end(), 0);
  for (std::size_t i = m; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(map[i - 1], map[j]);
  }
  return Permutation(std::move(map));
}

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}

}  // namespace

gnn::RegnnConfig random_config(Rng& rng, std::size_t max_layers, std::size_t max_taps, std::size_t max_features) {
  gnn::RegnnConfig c;
  const std::size_t L = pick(rng, 1, max_layers);
  c.features.assign(L + 1, 1);
  for (std::size_t l = 1; l < L; ++l) c.features[l] = pick(rng, 1, max_features);
  for (std::size_t l = 0; l < L; ++l) c.taps.push_back(pick(rng, 1, max_taps));
  const gnn::Nonlinearity kinds[] = {gnn::Nonlinearity::relu, gnn::Nonlinearity::abs, gnn::Nonlinearity::sigmoid};
  c.hidden = kinds[pick(rng, 0, 2)];
  return c;
}

double equivariance_residual(const gnn::FilterTensor& A, const ChannelMatrix& H, std::span<const double> x,
                             const Permutation& perm) {
  const std::vector<double> xv(x.begin(), x.end());
  const gnn::ForwardTape base = gnn::forward(A, H, GraphSignal(xv));
  const auto [Hp, xp] = graph::permute(H, GraphSignal(xv), perm);
  const gnn::ForwardTape moved = gnn::forward(A, Hp, xp);
  const std::vector<double> expected = graph::permute(base.probs(), perm);
  double worst = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i)
    worst = std::max(worst, std::abs(moved.probs()[i] - expected[i]));
  return worst;
}

double reward_equivariance_residual(std::span<const double> p, const ChannelMatrix& H, double sigma2,
                                    const Permutation& perm) {
  const std::vector<double> base = wireless::capacity(p, H, sigma2);
  const std::vector<double> moved = wireless::capacity(graph::permute(p, perm), graph::permute(H, perm), sigma2);
  const std::vector<double> expected = graph::permute(base, perm);
  double worst = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) worst = std::max(worst, std::abs(moved[i] - expected[i]));
  return worst;
}

double score_gradient_error(const gnn::FilterTensor& A, const ChannelMatrix& H, std::span<const double> x,
                            std::span<const std::uint8_t> draws, const BackwardFn& backward_fn, double step,
                            double floor) {
  const GraphSignal xs(std::vector<double>(x.begin(), x.end()));
  const gnn::ForwardTape tape = gnn::forward(A, H, xs);
  policy::PolicySample s;
  s.draws.assign(draws.begin(), draws.end());
  const std::vector<double> score = policy::grad_log_prob(s, tape.probs());
  const std::vector<double> analytic = backward_fn(tape, A, H, score);

  const auto log_psi = [&](std::span<const double> flat) {
    const gnn::FilterTensor B(A.config(), std::vector<double>(flat.begin(), flat.end()));
    return policy::log_prob(draws, reference_forward(B, H, x));
  };
  const std::vector<double> numeric = central_difference(log_psi, A.flat(), step);
  // Round-off in the quotient grows with |log Psi|, so the floor does too.
  const double scaled_floor = floor * std::max(1.0, std::abs(log_psi(A.flat())));
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i)
    worst = std::max(worst, relative_error(analytic[i], numeric[i], scaled_floor));
  return worst;
}

bool OracleReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
}

namespace {

void record(CheckResult& c, double residual, std::uint64_t seed) {
  c.max_residual = std::max(c.max_residual, residual);
  if (!(residual <= c.tolerance)) c.failing_seeds.push_back(seed);
}

}  // namespace

OracleReport run_oracle_checks(const OracleOptions& o) {
  if (o.m < 2 || o.m > 10) throw std::invalid_argument("oracle-check: m must lie in [2, 10]");
  if (!o.backward) throw std::invalid_argument("oracle-check: missing backward function");
  const std::size_t m = o.m;
  const double sigma2 = 1.0;
  const double p0 = 1.0;

  CheckResult capacity{"capacity", 0, 0.0, 1e-12, {}};
  CheckResult powers{"filter-powers", 0, 0.0, tol::filter_power_rel, {}};
  CheckResult gradient{"gradient", 0, 0.0, tol::gradient_rel, {}};
  CheckResult equivariance{"equivariance", 0, 0.0, tol::equivariance_abs, {}};
  CheckResult reward{"reward-equivariance", 0, 0.0, tol::reward_equivariance_abs, {}};
  CheckResult brute{"brute-force", 0, 0.0, 1e-12, {}};
  const std::size_t gradient_instances = std::min<std::size_t>(o.instances, 20);

  for (std::size_t n = 0; n < o.instances; ++n) {
    const std::uint64_t seed = derive_seed(o.seed, "oracle", n);
    Rng rng(seed);
    const ChannelMatrix H = random_channel(m, rng);
    const std::vector<double> x = random_vector(m, -1.0, 1.0, rng);
    const Permutation perm = random_permutation(m, rng);

    // Capacity against the scalar re-derivation, on a continuous allocation.
    const std::vector<double> p = random_vector(m, 0.0, p0, rng);
    const std::vector<double> got = wireless::capacity(p, H, sigma2);
    const std::vector<double> want = reference_capacity(p, H, sigma2);
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    record(capacity, worst, seed);
    ++capacity.instances;

    // Iterated shifts against explicit powers.
    const std::vector<double> taps = random_vector(1 + n % 6, -1.0, 1.0, rng);
    const GraphSignal filtered = graph::apply_filter(H, GraphSignal(x), taps);
    const std::vector<double> ref = reference_filter(H, x, taps);
    worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, relative_error(filtered.feature(0)[i], ref[i]));
    record(powers, worst, seed);
    ++powers.instances;

    // Proposition-style equivariance on a random architecture.
    const gnn::RegnnConfig config = random_config(rng, 4, 5, 3);
    const gnn::FilterTensor A = gnn::FilterTensor::random_uniform(config, 0.5, rng);
    record(equivariance, equivariance_residual(A, H, x, perm), seed);
    ++equivariance.instances;

    std::vector<double> binary(m);
    for (double& v : binary) v = uniform01(rng) < 0.5 ? p0 : 0.0;
    record(reward, reward_equivariance_residual(binary, H, sigma2, perm), seed);
    ++reward.instances;

    if (n < gradient_instances) {
      const gnn::ForwardTape tape = gnn::forward(A, H, GraphSignal(x));
      const policy::PolicySample draw = policy::sample(tape.probs(), policy::AllocationSpec{p0}, rng);
      record(gradient,
             score_gradient_error(A, H, x, draw.draws, o.backward, tol::finite_difference_step), seed);
      ++gradient.instances;
    }

    // The binary optimum dominates every allocator on the same draw.
    const wireless::BruteForceResult best = wireless::brute_force_binary(H, sigma2, p0);
    std::vector<std::vector<double>> others;
    const double p_max = static_cast<double>(m) * p0 / 2.0;
    others.push_back(wireless::equal_power(m, p_max));
    others.push_back(wireless::random_selection(m, p_max, p0, rng));
    std::vector<double> w = wireless::wmmse(H, sigma2, p0).power;
    for (double& v : w) v = v >= p0 / 2.0 ? p0 : 0.0;
    others.push_back(std::move(w));
    others.push_back(binary);
    worst = 0.0;
    for (const auto& alloc : others)
      worst = std::max(worst, wireless::sum_rate(alloc, H, sigma2) - best.sum_rate);
    record(brute, std::max(worst, 0.0), seed);
    ++brute.instances;
  }
  return OracleReport{{capacity, powers, gradient, equivariance, reward, brute}};
}

}  // namespace regnn::oracle
