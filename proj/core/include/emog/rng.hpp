#pragma once

#include <cstdint>

namespace emog {

/// Counter-based pseudo-random stream.
///
/// Every draw is a pure function of (key, counter), so a stream is fully
/// described by two integers. That makes checkpoint/resume and per-step
/// sub-streams trivial: `split(i)` derives an independent stream without
/// advancing the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  Rng split(std::uint64_t stream) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace emog
