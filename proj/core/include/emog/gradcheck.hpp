#pragma once

#include <functional>
#include <string>
#include <vector>

#include "emog/optim.hpp"

namespace emog {

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;   // number of elements probed
  double max_rel_error = 0;  // worst |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double max_abs_error = 0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool passed() const;
  double worst() const;
};

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  /// Denominator floor so near-zero gradients are judged absolutely.
  double floor = 1e-6;
  /// Probe at most this many elements per parameter (0 = all), chosen by
  /// a seeded draw.
  std::size_t max_elements = 0;
  std::uint64_t seed = 0;
};

/// Compares analytic gradients of a scalar loss against central differences
/// (f(p+h) - f(p-h)) / 2h for every parameter in `params`.
///
/// `loss` must rebuild the graph from the current parameter values on every
/// call. Failures are reported, not thrown.
GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, ParameterSet& params,
                                  const GradCheckOptions& options = {});

}  // namespace emog
