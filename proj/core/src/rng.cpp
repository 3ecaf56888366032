#include "emog/rng.hpp"

#include <cmath>
#include <numbers>

namespace emog {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t counter) : key_(mix64(seed)), counter_(counter) {}

std::uint64_t Rng::next_u64() {
  const std::uint64_t c = counter_++;
  return mix64(key_ ^ mix64(c + 0x632BE59BD9B4E019ull));
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Lemire-free rejection keeps this exact and portable.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

double Rng::normal() {
  // Box-Muller; the second variate is dropped so the stream stays stateless.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t stream) const {
  Rng child;
  child.key_ = mix64(key_ ^ mix64(stream ^ 0xD1B54A32D192ED03ull));
  child.counter_ = 0;
  return child;
}

}  // namespace emog
