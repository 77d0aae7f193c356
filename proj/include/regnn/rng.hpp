#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace regnn {

using Rng = std::mt19937_64;

/// Named random streams derived from one master seed. Each label hashes to an
/// independent seed, so adding a new consumer never shifts an existing stream.
namespace stream {
inline constexpr std::string_view topology = "topology";
inline constexpr std::string_view fading_train = "fading-train";
inline constexpr std::string_view fading_eval = "fading-eval";
inline constexpr std::string_view policy = "policy";
inline constexpr std::string_view policy_eval = "policy-eval";
inline constexpr std::string_view demand = "demand";
inline constexpr std::string_view demand_eval = "demand-eval";
inline constexpr std::string_view init = "init";
inline constexpr std::string_view baseline = "baseline";
}  // namespace stream

std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

inline Rng make_stream(std::uint64_t master, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(master, label, index));
}

/// FNV-1a, 64-bit.
std::uint64_t fnv1a(std::string_view bytes);

/// Uniform draw on [0, 1) from the top 53 bits; independent of the standard
/// library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace regnn
