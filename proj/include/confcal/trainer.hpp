#pragma once

// Desk-scale softmax regression on synthetic data, used to compare training
// losses by the calibration of the resulting model.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "confcal/losses.hpp"
#include "confcal/metrics.hpp"

namespace confcal {

struct SyntheticDataset {
  Eigen::MatrixXd features;          // n x d
  std::vector<int> labels;           // n entries in [0, K)
  int num_classes = 0;
  std::uint64_t generator_seed = 0;
  Eigen::MatrixXd hidden_weights;    // K x d ground truth used for sampling
  double noise_temperature = 1.0;

  std::size_t size() const { return labels.size(); }
  int dim() const { return static_cast<int>(features.cols()); }
};

// x ~ N(0, I_d), y ~ softmax(W* x / noise_temperature), W* ~ N(0, 1), all
// from streams of `seed`.
SyntheticDataset gen_synthetic(int n, int d, int num_classes, double noise_temperature,
                               std::uint64_t seed);

// Rows [begin, end) sharing the generator's hidden weights.
SyntheticDataset slice(const SyntheticDataset& data, std::size_t begin, std::size_t end);

struct TrainTestSplit {
  SyntheticDataset train;
  SyntheticDataset test;
};

struct BenchmarkTask {
  int n_train = 2000;
  int n_test = 1000;
  int dim = 10;
  int num_classes = 3;
  double noise_temperature = 2.0;
};

TrainTestSplit make_benchmark(const BenchmarkTask& task, std::uint64_t seed);

struct LinearModel {
  Eigen::MatrixXd weights;  // K x (d + 1); last column is the bias

  Eigen::VectorXd logits(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 50;
  int batch_size = 64;
  LossKind loss_kind = LossKind::kFocalPlusAlignCal;
  LossConfig loss_params;
  std::uint64_t seed = 0;
};

struct TrainResult {
  LinearModel model;
  // Full-batch training loss after each epoch.
  std::vector<double> epoch_losses;
};

// Mini-batch gradient descent from zero weights. Throws DivergenceError when
// the full-batch loss becomes non-finite.
TrainResult fit(const SyntheticDataset& data, const TrainConfig& cfg);
LinearModel train(const SyntheticDataset& data, const TrainConfig& cfg);

double mean_loss(const LinearModel& model, const SyntheticDataset& data, LossKind kind,
                 const LossConfig& params);

// Predicted class = argmax p, confidence = max p; answers are class indices.
std::vector<PredictionRecord> predict_records(const LinearModel& model,
                                              const SyntheticDataset& data);

struct EvalReport {
  double accuracy = 0.0;
  double ece = 0.0;
  double ace = 0.0;
  double mce = 0.0;
  double ubce = 0.0;
};

EvalReport evaluate(const LinearModel& model, const SyntheticDataset& data,
                    int num_bins = kDefaultNumBins);

}  // namespace confcal
