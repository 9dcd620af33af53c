#include "fatality/metrics.hpp"

#include <cmath>
#include <json.hpp>

#include "fatality/error.hpp"

namespace fatality::metrics {

ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) {
    throw DataError("confusion: " + std::to_string(predicted.size()) + " predictions vs " +
                    std::to_string(actual.size()) + " labels");
  }
  if (predicted.empty()) throw DataError("confusion: no examples");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], a = actual[i];
    if ((p != 0 && p != 1) || (a != 0 && a != 1)) {
      throw DataError("confusion: labels must be 0 or 1 (index " + std::to_string(i) + ")");
    }
    if (p && a) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (a) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

namespace {

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json metric_json(const Metric& m) {
  return m ? nlohmann::ordered_json(*m) : nlohmann::ordered_json(nullptr);
}

}  // namespace

Metric accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }
Metric recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
Metric precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }

Metric f1(Metric p, Metric r) {
  if (!p || !r) return std::nullopt;
  if (*p + *r == 0.0) return std::nullopt;
  return 2.0 * *p * *r / (*p + *r);
}

Metric f1(const ConfusionCounts& c) { return f1(precision(c), recall(c)); }

EvaluationReport evaluate(const ConfusionCounts& c) {
  return {accuracy(c), precision(c), recall(c), f1(c), c};
}

std::string to_json(const EvaluationReport& r, int indent) {
  nlohmann::ordered_json j;
  j["accuracy"] = metric_json(r.accuracy);
  j["precision"] = metric_json(r.precision);
  j["recall"] = metric_json(r.recall);
  j["f1"] = metric_json(r.f1);
  j["confusion"] = {{"tp", r.confusion.tp},
                    {"fp", r.confusion.fp},
                    {"fn", r.confusion.fn},
                    {"tn", r.confusion.tn}};
  return j.dump(indent);
}

double to_percent(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * 100.0 * scale) / scale;
}

}  // namespace fatality::metrics
