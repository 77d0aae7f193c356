#pragma once

// Bernoulli allocation policy driven by the REGNN output probabilities.

#include <cstdint>
#include <span>
#include <vector>

#include "regnn/rng.hpp"

namespace regnn::policy {

/// Probabilities are clamped to [eps, 1 - eps] before sampling and scoring.
inline constexpr double kProbClamp = 1e-6;

struct AllocationSpec {
  double p0 = 1.0;  // transmit power level, watts

  void validate() const;
};

struct PolicySample {
  std::vector<double> allocation;     // each entry 0 or p0
  std::vector<std::uint8_t> draws;    // 1 where the node transmits
  double log_prob = 0.0;              // nats
};

double clamp_prob(double q);

/// Independent Bernoulli(q_i) per node.
PolicySample sample(std::span<const double> probs, const AllocationSpec& spec, Rng& rng);

double log_prob(std::span<const std::uint8_t> draws, std::span<const double> probs);

/// d log Psi / d probs, evaluated at the clamped probabilities.
std::vector<double> grad_log_prob(const PolicySample& sample, std::span<const double> probs);

/// Deterministic execution: transmit iff the probability exceeds 1/2.
std::vector<double> threshold(std::span<const double> probs, const AllocationSpec& spec);

}  // namespace regnn::policy
