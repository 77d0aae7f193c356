#include "regnn/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regnn::policy {

void AllocationSpec::validate() const {
  if (!(p0 > 0.0) || !std::isfinite(p0)) throw std::invalid_argument("AllocationSpec: p0 must be positive");
}

double clamp_prob(double q) { return std::clamp(q, kProbClamp, 1.0 - kProbClamp); }

PolicySample sample(std::span<const double> probs, const AllocationSpec& spec, Rng& rng) {
  PolicySample s;
  s.allocation.resize(probs.size());
  s.draws.resize(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double q = clamp_prob(probs[i]);
    const bool on = uniform01(rng) < q;
    s.draws[i] = on ? 1 : 0;
    s.allocation[i] = on ? spec.p0 : 0.0;
  }
  s.log_prob = log_prob(s.draws, probs);
  return s;
}

double log_prob(std::span<const std::uint8_t> draws, std::span<const double> probs) {
  if (draws.size() != probs.size()) throw std::invalid_argument("log_prob: draw and probability counts differ");
  double lp = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double q = clamp_prob(probs[i]);
    lp += draws[i] ? std::log(q) : std::log1p(-q);
  }
  return lp;
}

std::vector<double> grad_log_prob(const PolicySample& sample, std::span<const double> probs) {
  if (sample.draws.size() != probs.size())
    throw std::invalid_argument("grad_log_prob: sample and probability counts differ");
  std::vector<double> g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double q = clamp_prob(probs[i]);
    g[i] = sample.draws[i] ? 1.0 / q : -1.0 / (1.0 - q);
  }
  return g;
}

std::vector<double> threshold(std::span<const double> probs, const AllocationSpec& spec) {
  std::vector<double> p(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) p[i] = clamp_prob(probs[i]) > 0.5 ? spec.p0 : 0.0;
  return p;
}

}  // namespace regnn::policy
