#include "confcal/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "confcal/error.hpp"
#include "confcal/rng.hpp"

namespace confcal {
namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void check_compatible(const LinearModel& model, const SyntheticDataset& data) {
  if (model.weights.rows() != data.num_classes ||
      model.weights.cols() != data.features.cols() + 1) {
    throw InputError("model shape " + std::to_string(model.weights.rows()) + "x" +
                     std::to_string(model.weights.cols()) + " does not fit data with " +
                     std::to_string(data.num_classes) + " classes and " +
                     std::to_string(data.features.cols()) + " features");
  }
}

}  // namespace

SyntheticDataset gen_synthetic(int n, int d, int num_classes, double noise_temperature,
                               std::uint64_t seed) {
  if (n <= 0 || d <= 0 || num_classes < 2) {
    throw InputError("gen_synthetic needs n > 0, d > 0 and at least 2 classes");
  }
  if (n < num_classes) throw InputError("gen_synthetic needs n >= number of classes");
  if (!(noise_temperature > 0.0)) throw InputError("noise_temperature must be positive");

  const Rng root(seed);
  SyntheticDataset data;
  data.num_classes = num_classes;
  data.generator_seed = seed;
  data.noise_temperature = noise_temperature;

  Rng wrng = root.child("weights");
  data.hidden_weights.resize(num_classes, d);
  for (int k = 0; k < num_classes; ++k)
    for (int j = 0; j < d; ++j) data.hidden_weights(k, j) = wrng.normal();

  Rng xrng = root.child("features");
  Rng yrng = root.child("labels");
  data.features.resize(n, d);
  data.labels.resize(static_cast<std::size_t>(n));
  std::vector<int> seen(static_cast<std::size_t>(num_classes), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) data.features(i, j) = xrng.normal();
    const Eigen::VectorXd z =
        data.hidden_weights * data.features.row(i).transpose() / noise_temperature;
    const auto p = softmax(to_vector(z));
    const double u = yrng.uniform();
    double acc = 0.0;
    int label = num_classes - 1;
    for (int k = 0; k < num_classes; ++k) {
      acc += p[static_cast<std::size_t>(k)];
      if (u < acc) {
        label = k;
        break;
      }
    }
    data.labels[static_cast<std::size_t>(i)] = label;
    seen[static_cast<std::size_t>(label)] = 1;
  }
  if (std::accumulate(seen.begin(), seen.end(), 0) != num_classes) {
    throw InputError("synthetic draw left a class without examples; use a larger n");
  }
  return data;
}

SyntheticDataset slice(const SyntheticDataset& data, std::size_t begin, std::size_t end) {
  if (begin > end || end > data.size()) throw InputError("slice out of range");
  SyntheticDataset out = data;
  const auto rows = static_cast<Eigen::Index>(end - begin);
  out.features = data.features.middleRows(static_cast<Eigen::Index>(begin), rows);
  out.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    data.labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

TrainTestSplit make_benchmark(const BenchmarkTask& task, std::uint64_t seed) {
  const auto all = gen_synthetic(task.n_train + task.n_test, task.dim, task.num_classes,
                                 task.noise_temperature, seed);
  const auto n_train = static_cast<std::size_t>(task.n_train);
  return {slice(all, 0, n_train), slice(all, n_train, all.size())};
}

Eigen::VectorXd LinearModel::logits(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const auto d = weights.cols() - 1;
  return weights.leftCols(d) * x + weights.col(d);
}

double mean_loss(const LinearModel& model, const SyntheticDataset& data, LossKind kind,
                 const LossConfig& params) {
  check_compatible(model, data);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd z =
        model.logits(data.features.row(static_cast<Eigen::Index>(i)).transpose());
    if (!z.allFinite()) return std::numeric_limits<double>::quiet_NaN();
    total += loss_value(kind, to_vector(z), static_cast<std::size_t>(data.labels[i]), params);
  }
  return total / static_cast<double>(data.size());
}

TrainResult fit(const SyntheticDataset& data, const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw InputError("learning_rate must be positive");
  if (cfg.epochs < 0) throw InputError("epochs must be non-negative");
  if (cfg.batch_size <= 0) throw InputError("batch_size must be positive");
  if (data.size() == 0) throw EmptyInputError("training set");

  const auto d = data.features.cols();
  TrainResult result;
  result.model.weights = Eigen::MatrixXd::Zero(data.num_classes, d + 1);
  auto& w = result.model.weights;

  Rng rng = Rng(cfg.seed).child("shuffle");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::MatrixXd grad(w.rows(), w.cols());
  Eigen::VectorXd x(d);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grad.setZero();
      for (std::size_t b = start; b < stop; ++b) {
        const auto row = static_cast<Eigen::Index>(order[b]);
        x = data.features.row(row).transpose();
        const Eigen::VectorXd z = result.model.logits(x);
        if (!z.allFinite()) throw DivergenceError(epoch);
        const auto g = loss_grad(cfg.loss_kind, to_vector(z),
                                 static_cast<std::size_t>(data.labels[order[b]]),
                                 cfg.loss_params);
        const Eigen::Map<const Eigen::VectorXd> gz(g.data(), static_cast<Eigen::Index>(g.size()));
        grad.leftCols(d).noalias() += gz * x.transpose();
        grad.col(d) += gz;
      }
      w -= cfg.learning_rate / static_cast<double>(stop - start) * grad;
      if (!w.allFinite()) throw DivergenceError(epoch);
    }
    const double loss = mean_loss(result.model, data, cfg.loss_kind, cfg.loss_params);
    if (!std::isfinite(loss)) throw DivergenceError(epoch);
    result.epoch_losses.push_back(loss);
  }
  return result;
}

LinearModel train(const SyntheticDataset& data, const TrainConfig& cfg) {
  return fit(data, cfg).model;
}

std::vector<PredictionRecord> predict_records(const LinearModel& model,
                                              const SyntheticDataset& data) {
  check_compatible(model, data);
  std::vector<PredictionRecord> records;
  records.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd z =
        model.logits(data.features.row(static_cast<Eigen::Index>(i)).transpose());
    const auto p = softmax(to_vector(z));
    records.push_back({std::to_string(i), std::to_string(p.argmax()),
                       std::to_string(data.labels[i]), p.max()});
  }
  return records;
}

EvalReport evaluate(const LinearModel& model, const SyntheticDataset& data, int num_bins) {
  const auto records = predict_records(model, data);
  const auto m = compute_metrics(records, num_bins);
  return {m.classification.accuracy, m.ece, m.ace, m.mce, m.ubce};
}

}  // namespace confcal
