#pragma once

// Post-hoc temperature scaling fitted by grid search on binary NLL.

#include <span>
#include <vector>

#include "confcal/losses.hpp"
#include "confcal/metrics.hpp"

namespace confcal {

inline constexpr double kConfidenceEpsilon = 1e-6;

struct TemperatureGrid {
  double lo = 0.1;
  double hi = 10.0;
  double step = 0.1;

  // lo, lo + step, ... up to hi (inclusive within half a step), rounded to
  // 1e-10 so that decimal grids print cleanly. Throws InputError when invalid.
  std::vector<double> points() const;
};

// sigmoid(logit(c) / T), c clamped into (eps, 1 - eps).
double scale_confidence(double confidence, double temperature);

// -sum [t log c(T) + (1 - t) log(1 - c(T))] over the records.
double binary_nll(std::span<const PredictionRecord> records, double temperature);

// Grid point with the smallest NLL; ties go to the smaller T.
double fit_temperature(std::span<const PredictionRecord> holdout,
                       const TemperatureGrid& grid = {});

std::vector<PredictionRecord> apply_temperature(std::span<const PredictionRecord> records,
                                                double temperature);

// softmax(z / T) for full logit vectors.
ProbDist scale_logits(std::span<const double> logits, double temperature);

}  // namespace confcal
