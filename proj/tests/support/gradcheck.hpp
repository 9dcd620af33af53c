#pragma once

// Central finite-difference oracle, always in 64-bit.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <span>
#include <string>

namespace fatality::testing {

inline constexpr double kFiniteDifferenceStep = 1e-4;
inline constexpr double kNegligibleGradient = 1e-8;

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

struct GradCheck {
  double max_relative_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;

  std::string describe() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "max rel err %.3g at index %zu (analytic %.6g, numeric %.6g), "
                  "checked %zu, skipped %zu",
                  max_relative_error, worst_index, worst_analytic, worst_numeric, checked, skipped);
    return buf;
  }
};

// Perturbs each entry of `values` in place, evaluating `loss` at +/- step,
// and compares with `analytic`. Entries with |analytic| + |numeric| below
// kNegligibleGradient are skipped.
template <typename Analytic>
GradCheck check_gradient(std::span<double> values, Analytic analytic,
                         const std::function<double()>& loss,
                         double step = kFiniteDifferenceStep) {
  GradCheck r;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = loss();
    values[i] = saved - step;
    const double down = loss();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = static_cast<double>(analytic[i]);
    if (std::abs(a) + std::abs(numeric) <= kNegligibleGradient) {
      ++r.skipped;
      continue;
    }
    ++r.checked;
    const double err = relative_error(a, numeric);
    if (err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
      r.worst_analytic = a;
      r.worst_numeric = numeric;
    }
  }
  return r;
}

}  // namespace fatality::testing
