#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

// Deterministic draws on top of mt19937_64. The standard <random>
// distributions are implementation-defined, so everything that has to be
// reproducible bit for bit across toolchains is mapped from raw engine
// output here instead.
namespace nnviterbi::rng {

// Uniform double in [0, 1).
inline double uniform_unit(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(g);
}

// Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
std::size_t uniform_index(std::mt19937_64& g, std::size_t n);

// Standard normal via Box-Muller (two uniforms per draw, no cached spare).
double normal(std::mt19937_64& g);

// Poisson draw. Knuth's product-of-uniforms method, with a split for large
// lambda to keep the running product away from underflow.
long poisson(std::mt19937_64& g, double lambda);

// splitmix64 step; used to derive independent sub-seeds from a master seed.
std::uint64_t split_seed(std::uint64_t& state);

}  // namespace nnviterbi::rng
