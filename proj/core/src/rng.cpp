#include "nnviterbi/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nnviterbi::rng {

std::size_t uniform_index(std::mt19937_64& g, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be >= 1");
  if (n == 1) return 0;
  const std::uint64_t mask = ~std::uint64_t{0} >> std::countl_zero(std::uint64_t{n - 1});
  for (;;) {
    const std::uint64_t x = g() & mask;
    if (x < n) return static_cast<std::size_t>(x);
  }
}

double normal(std::mt19937_64& g) {
  const double u1 = 1.0 - uniform_unit(g);  // (0, 1], keeps log finite
  const double u2 = uniform_unit(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

long poisson(std::mt19937_64& g, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("poisson: lambda must be > 0");
  long count = 0;
  // Split large rates so exp(-chunk) stays well above the underflow floor.
  while (lambda > 500.0) {
    count += poisson(g, lambda / 2.0);
    lambda /= 2.0;
  }
  const double limit = std::exp(-lambda);
  double product = uniform_unit(g);
  while (product >= limit) {
    ++count;
    product *= uniform_unit(g);
  }
  return count;
}

std::uint64_t split_seed(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace nnviterbi::rng
