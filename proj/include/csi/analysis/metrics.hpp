#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csi/error.hpp"

namespace csi {

/// Positive class is 1 (fake).
struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline Metrics classification_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw ShapeError("classification_metrics: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  if (truth.empty()) throw ShapeError("classification_metrics: no samples");
  Metrics m;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if ((predicted[k] != 0 && predicted[k] != 1) || (truth[k] != 0 && truth[k] != 1))
      throw ParameterError("classification_metrics: labels must be 0 or 1");
    if (predicted[k] == 1) {
      truth[k] == 1 ? ++m.tp : ++m.fp;
    } else {
      truth[k] == 0 ? ++m.tn : ++m.fn;
    }
  }
  const auto d = [](std::size_t x) { return static_cast<double>(x); };
  m.accuracy = d(m.tp + m.tn) / d(truth.size());
  m.precision = m.tp + m.fp ? d(m.tp) / d(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn ? d(m.tp) / d(m.tp + m.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single value
};

inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) throw ShapeError("mean_std: no values");
  MeanStd r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

struct MetricsSummary {
  MeanStd accuracy, precision, recall, f1;
};

inline MetricsSummary summarize(const std::vector<Metrics>& folds) {
  std::vector<double> a, p, r, f;
  for (const auto& m : folds) {
    a.push_back(m.accuracy);
    p.push_back(m.precision);
    r.push_back(m.recall);
    f.push_back(m.f1);
  }
  return {mean_std(a), mean_std(p), mean_std(r), mean_std(f)};
}

}  // namespace csi
