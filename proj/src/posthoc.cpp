#include "confcal/posthoc.hpp"

#include <algorithm>
#include <cmath>

#include "confcal/error.hpp"

namespace confcal {
namespace {

double clamp_conf(double c) {
  return std::clamp(c, kConfidenceEpsilon, 1.0 - kConfidenceEpsilon);
}

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InputError("temperature must be positive and finite");
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace

std::vector<double> TemperatureGrid::points() const {
  if (!(lo > 0.0) || !(step > 0.0) || !(hi >= lo) || !std::isfinite(hi)) {
    throw InputError("temperature grid needs 0 < lo <= hi and step > 0");
  }
  std::vector<double> out;
  for (long i = 0;; ++i) {
    const double t = lo + static_cast<double>(i) * step;
    if (t > hi + 0.5 * step) break;
    out.push_back(std::round(t * 1e10) / 1e10);
  }
  while (out.size() > 1 && out.back() > hi + 1e-9) out.pop_back();
  return out;
}

double scale_confidence(double confidence, double temperature) {
  check_temperature(temperature);
  const double c = clamp_conf(confidence);
  const double z = std::log(c / (1.0 - c)) / temperature;
  return 1.0 / (1.0 + std::exp(-z));
}

double binary_nll(std::span<const PredictionRecord> records, double temperature) {
  check_temperature(temperature);
  double nll = 0.0;
  for (const auto& r : records) {
    const double c = clamp_conf(r.confidence);
    const double z = std::log(c / (1.0 - c)) / temperature;
    nll -= r.correct() ? log_sigmoid(z) : log_sigmoid(-z);
  }
  return nll;
}

double fit_temperature(std::span<const PredictionRecord> holdout, const TemperatureGrid& grid) {
  if (holdout.empty()) throw EmptyInputError("temperature holdout");
  const auto pts = grid.points();
  double best_t = pts.front();
  double best = binary_nll(holdout, best_t);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double v = binary_nll(holdout, pts[i]);
    if (v < best) {
      best = v;
      best_t = pts[i];
    }
  }
  return best_t;
}

std::vector<PredictionRecord> apply_temperature(std::span<const PredictionRecord> records,
                                                double temperature) {
  check_temperature(temperature);
  std::vector<PredictionRecord> out(records.begin(), records.end());
  if (temperature == 1.0) return out;
  for (auto& r : out) r.confidence = scale_confidence(r.confidence, temperature);
  return out;
}

ProbDist scale_logits(std::span<const double> logits, double temperature) {
  check_temperature(temperature);
  std::vector<double> z(logits.begin(), logits.end());
  for (auto& v : z) v /= temperature;
  return softmax(z);
}

}  // namespace confcal
