#pragma once

// Per-instance classification losses over softmax outputs and their
// closed-form gradients with respect to the logits.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace confcal {

// Floor applied inside logarithms so that log(0) never appears.
inline constexpr double kProbFloor = 1e-12;

// A categorical distribution; entries in [0,1] summing to 1 within 1e-9.
class ProbDist {
 public:
  explicit ProbDist(std::vector<double> probs);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const noexcept { return probs_; }

  // Lowest index among the maximal entries.
  std::size_t argmax() const noexcept;
  double max() const noexcept { return probs_[argmax()]; }

 private:
  std::vector<double> probs_;
};

struct LossConfig {
  double gamma = 2.0;   // focal focusing
  double lambda = 2.0;  // weight of the calibration term
  double alpha = 0.1;   // label-smoothing mass
};

enum class LossKind { kFocal, kFocalPlusAlignCal, kLabelSmoothing };

const char* to_string(LossKind kind) noexcept;

// Max-shifted softmax. Throws InputError on non-finite or fewer than 2 logits.
ProbDist softmax(std::span<const double> logits);

// p_y (1 - p_max) + (1 - p_y) p_max.
double aligncal_loss(const ProbDist& p, std::size_t y);

// -(1 - p_y)^gamma log p_y.
double focal_loss(const ProbDist& p, std::size_t y, double gamma);

// Cross-entropy against q_y = 1 - alpha, q_j = alpha / (K - 1).
double label_smoothing_loss(const ProbDist& p, std::size_t y, double alpha);

// focal + lambda * aligncal, both on softmax(logits).
double total_loss(std::span<const double> logits, std::size_t y, const LossConfig& cfg);

// Gradient of aligncal_loss(softmax(z), y) with respect to z, using the
// lowest-index argmax when the top probabilities tie.
std::vector<double> aligncal_grad(std::span<const double> logits, std::size_t y);

std::vector<double> focal_grad(std::span<const double> logits, std::size_t y, double gamma);

// Ignores the log floor, i.e. softmax(z) - q.
std::vector<double> label_smoothing_grad(std::span<const double> logits, std::size_t y,
                                         double alpha);

std::vector<double> total_grad(std::span<const double> logits, std::size_t y,
                               const LossConfig& cfg);

// Dispatch on the training loss kind.
double loss_value(LossKind kind, std::span<const double> logits, std::size_t y,
                  const LossConfig& cfg);
std::vector<double> loss_grad(LossKind kind, std::span<const double> logits, std::size_t y,
                              const LossConfig& cfg);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences (f(z + eps e_i) - f(z - eps e_i)) / (2 eps).
std::vector<double> finite_diff_grad(const ScalarFn& f, std::span<const double> logits,
                                     double epsilon = 1e-5);

}  // namespace confcal
