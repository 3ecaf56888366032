#include "emog/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emog/error.hpp"
#include "emog/rng.hpp"

namespace emog {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& loss, ParameterSet& params,
                                  const GradCheckOptions& options) {
  params.zero_grad();
  Tensor out = loss();
  if (out.numel() != 1) throw DimensionError("finite_diff_check: loss is not scalar " + shape_string(out.shape()));
  out.backward();

  std::vector<std::vector<double>> analytic;
  for (const auto& p : params.items()) {
    const auto g = p.tensor.grad();
    analytic.emplace_back(p.tensor.numel(), 0.0);
    std::copy(g.begin(), g.end(), analytic.back().begin());
  }

  GradCheckReport report;
  Rng rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.items().size(); ++pi) {
    auto& p = params.items()[pi];
    GradCheckEntry entry;
    entry.name = p.name;
    std::vector<std::size_t> idx(p.tensor.numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_elements != 0 && idx.size() > options.max_elements) {
      for (std::size_t i = 0; i < options.max_elements; ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      }
      idx.resize(options.max_elements);
      std::sort(idx.begin(), idx.end());
    }
    auto values = p.tensor.mutable_data();
    for (std::size_t i : idx) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = loss().item();
      values[i] = saved - options.step;
      const double down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[pi][i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, rel);
      ++entry.checked;
    }
    entry.passed = entry.max_rel_error <= options.tolerance;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace emog
