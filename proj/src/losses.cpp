#include "confcal/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "confcal/error.hpp"

namespace confcal {
namespace {

void check_class(std::size_t y, std::size_t k) {
  if (y >= k) {
    throw InputError("class index " + std::to_string(y) + " out of range for " +
                     std::to_string(k) + " classes");
  }
}

double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

}  // namespace

ProbDist::ProbDist(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InputError("empty probability vector");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InputError("probabilities do not sum to 1");
}

std::size_t ProbDist::argmax() const noexcept {
  return static_cast<std::size_t>(
      std::distance(probs_.begin(), std::max_element(probs_.begin(), probs_.end())));
}

const char* to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::kFocal:
      return "FL";
    case LossKind::kFocalPlusAlignCal:
      return "FL+AlignCal";
    case LossKind::kLabelSmoothing:
      return "LS";
  }
  return "?";
}

ProbDist softmax(std::span<const double> logits) {
  if (logits.size() < 2) throw InputError("softmax needs at least 2 logits");
  for (double z : logits) {
    if (!std::isfinite(z)) throw InputError("non-finite logit");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return ProbDist(std::move(p));
}

double aligncal_loss(const ProbDist& p, std::size_t y) {
  check_class(y, p.size());
  const double py = p[y];
  const double pmax = p.max();
  return py * (1.0 - pmax) + (1.0 - py) * pmax;
}

double focal_loss(const ProbDist& p, std::size_t y, double gamma) {
  check_class(y, p.size());
  if (gamma < 0.0) throw InputError("focal gamma must be non-negative");
  const double py = p[y];
  return -std::pow(1.0 - py, gamma) * safe_log(py);
}

double label_smoothing_loss(const ProbDist& p, std::size_t y, double alpha) {
  check_class(y, p.size());
  if (p.size() < 2) throw InputError("label smoothing needs at least 2 classes");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InputError("alpha must lie in [0,1)");
  const double off = alpha / static_cast<double>(p.size() - 1);
  double loss = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double q = j == y ? 1.0 - alpha : off;
    if (q > 0.0) loss -= q * safe_log(p[j]);
  }
  return loss;
}

double total_loss(std::span<const double> logits, std::size_t y, const LossConfig& cfg) {
  const auto p = softmax(logits);
  return focal_loss(p, y, cfg.gamma) + cfg.lambda * aligncal_loss(p, y);
}

std::vector<double> aligncal_grad(std::span<const double> logits, std::size_t y) {
  const auto p = softmax(logits);
  check_class(y, p.size());
  const std::size_t top = p.argmax();
  const double py = p[y];
  const double ptop = p[top];
  // L = p_y + p_top - 2 p_y p_top, and dp_k/dz_i = p_k (delta_ik - p_i).
  const double a = (1.0 - 2.0 * py) * ptop;
  const double b = (1.0 - 2.0 * ptop) * py;
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = a * ((i == top ? 1.0 : 0.0) - p[i]) + b * ((i == y ? 1.0 : 0.0) - p[i]);
  }
  return g;
}

std::vector<double> focal_grad(std::span<const double> logits, std::size_t y, double gamma) {
  const auto p = softmax(logits);
  check_class(y, p.size());
  if (gamma < 0.0) throw InputError("focal gamma must be non-negative");
  const double py = p[y];
  const double rest = 1.0 - py;
  // dL/dp_y * p_y; the first term tends to 0 as p_y -> 1 for every gamma >= 0.
  double coef = -std::pow(rest, gamma);
  if (gamma > 0.0 && rest > 0.0) {
    coef += gamma * std::pow(rest, gamma - 1.0) * py * safe_log(py);
  }
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = coef * ((i == y ? 1.0 : 0.0) - p[i]);
  }
  return g;
}

std::vector<double> label_smoothing_grad(std::span<const double> logits, std::size_t y,
                                         double alpha) {
  const auto p = softmax(logits);
  check_class(y, p.size());
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InputError("alpha must lie in [0,1)");
  const double off = alpha / static_cast<double>(p.size() - 1);
  std::vector<double> g(p.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = p[j] - (j == y ? 1.0 - alpha : off);
  return g;
}

std::vector<double> total_grad(std::span<const double> logits, std::size_t y,
                               const LossConfig& cfg) {
  auto g = focal_grad(logits, y, cfg.gamma);
  if (cfg.lambda != 0.0) {
    const auto c = aligncal_grad(logits, y);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += cfg.lambda * c[i];
  }
  return g;
}

double loss_value(LossKind kind, std::span<const double> logits, std::size_t y,
                  const LossConfig& cfg) {
  switch (kind) {
    case LossKind::kFocal:
      return focal_loss(softmax(logits), y, cfg.gamma);
    case LossKind::kFocalPlusAlignCal:
      return total_loss(logits, y, cfg);
    case LossKind::kLabelSmoothing:
      return label_smoothing_loss(softmax(logits), y, cfg.alpha);
  }
  throw InvariantError("unknown loss kind");
}

std::vector<double> loss_grad(LossKind kind, std::span<const double> logits, std::size_t y,
                              const LossConfig& cfg) {
  switch (kind) {
    case LossKind::kFocal:
      return focal_grad(logits, y, cfg.gamma);
    case LossKind::kFocalPlusAlignCal:
      return total_grad(logits, y, cfg);
    case LossKind::kLabelSmoothing:
      return label_smoothing_grad(logits, y, cfg.alpha);
  }
  throw InvariantError("unknown loss kind");
}

std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> logits,
                                     double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("finite-difference epsilon must be positive");
  std::vector<double> z(logits.begin(), logits.end());
  std::vector<double> g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double orig = z[i];
    z[i] = orig + epsilon;
    const double up = f(z);
    z[i] = orig - epsilon;
    const double down = f(z);
    z[i] = orig;
    g[i] = (up - down) / (2.0 * epsilon);
  }
  return g;
}

}  // namespace confcal
