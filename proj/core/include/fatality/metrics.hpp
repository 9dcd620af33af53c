#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace fatality::metrics {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// nullopt means undefined (zero denominator). It is never coerced to 0 or 1.
using Metric = std::optional<double>;

// Tallies (predicted, actual) pairs. Throws DataError on length mismatch,
// empty input, or labels outside {0, 1}.
ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> actual);

Metric accuracy(const ConfusionCounts& c);
Metric recall(const ConfusionCounts& c);
Metric precision(const ConfusionCounts& c);

// Harmonic mean; undefined if either input is undefined or both are zero.
Metric f1(Metric precision, Metric recall);
Metric f1(const ConfusionCounts& c);

struct EvaluationReport {
  Metric accuracy;
  Metric precision;
  Metric recall;
  Metric f1;
  ConfusionCounts confusion;
};

EvaluationReport evaluate(const ConfusionCounts& c);

// JSON object with keys accuracy, precision, recall, f1 (null when
// undefined) and confusion {tp, fp, fn, tn}.
std::string to_json(const EvaluationReport& report, int indent = 2);

// value * 100 rounded half away from zero to `decimals` places.
double to_percent(double value, int decimals);

}  // namespace fatality::metrics
