#include <doctest.h>

#include <cmath>

#include "confcal/error.hpp"
#include "confcal/rng.hpp"
#include "confcal/trainer.hpp"

using namespace confcal;

namespace {

SyntheticDataset separable(int n) {
  SyntheticDataset d;
  d.features = Eigen::MatrixXd(n, 2);
  d.num_classes = 2;
  Rng rng(5);
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    d.features(i, 0) = (y == 1 ? 1.0 : -1.0) * (0.5 + rng.uniform());
    d.features(i, 1) = rng.normal();
    d.labels.push_back(y);
  }
  return d;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("generator determinism") {
    const auto a = gen_synthetic(300, 4, 3, 1.0, 17);
    const auto b = gen_synthetic(300, 4, 3, 1.0, 17);
    const auto c = gen_synthetic(300, 4, 3, 1.0, 18);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    CHECK(a.hidden_weights == b.hidden_weights);
    CHECK(a.features != c.features);
    CHECK_THROWS_AS(gen_synthetic(0, 4, 3, 1.0, 1), InputError);
    CHECK_THROWS_AS(gen_synthetic(10, 4, 3, 0.0, 1), InputError);
    CHECK_THROWS_AS(gen_synthetic(2, 4, 3, 1.0, 1), InputError);
  }

  TEST_CASE("low noise temperature gives near-deterministic labels") {
    const auto d = gen_synthetic(5000, 5, 3, 0.01, 3);
    int agree = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      Eigen::VectorXd s = d.hidden_weights * d.features.row(static_cast<Eigen::Index>(i)).transpose();
      Eigen::Index k;
      s.maxCoeff(&k);
      agree += static_cast<int>(k) == d.labels[i];
    }
    CHECK(agree / 5000.0 >= 0.99);
  }

  TEST_CASE("label histogram matches the hidden softmax marginal") {
    const int n = 10000;
    const double temp = 2.0;
    const auto d = gen_synthetic(n, 4, 3, temp, 8);
    std::vector<double> marginal(3, 0.0), freq(3, 0.0);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd s = d.hidden_weights * d.features.row(i).transpose() / temp;
      s.array() -= s.maxCoeff();
      const Eigen::VectorXd e = s.array().exp();
      for (int k = 0; k < 3; ++k) marginal[k] += e(k) / e.sum() / n;
      freq[d.labels[i]] += 1.0 / n;
    }
    for (int k = 0; k < 3; ++k) {
      const double se = std::sqrt(marginal[k] * (1 - marginal[k]) / n);
      CHECK(std::abs(freq[k] - marginal[k]) <= 3 * se);
    }
  }

  TEST_CASE("zero epochs returns the zero model") {
    const auto d = gen_synthetic(100, 3, 2, 1.0, 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto m = train(d, cfg);
    CHECK(m.weights.rows() == 2);
    CHECK(m.weights.cols() == 4);
    CHECK(m.weights.isZero(0.0));
  }

  TEST_CASE("separable toy set is learned") {
    const auto d = separable(200);
    TrainConfig cfg;
    cfg.epochs = 200;
    const auto m = train(d, cfg);
    CHECK(evaluate(m, d).accuracy >= 0.99);
  }

  TEST_CASE("training determinism and config errors") {
    const auto d = gen_synthetic(400, 5, 3, 2.0, 2);
    TrainConfig cfg;
    cfg.seed = 4;
    cfg.epochs = 5;
    CHECK(train(d, cfg).weights == train(d, cfg).weights);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(d, cfg), InputError);
  }

  TEST_CASE("full-batch loss is non-increasing at small learning rate") {
    const auto task = make_benchmark({}, 1);
    for (auto kind : {LossKind::kFocal, LossKind::kFocalPlusAlignCal, LossKind::kLabelSmoothing}) {
      TrainConfig cfg;
      cfg.learning_rate = 0.01;
      cfg.epochs = 30;
      cfg.batch_size = static_cast<int>(task.train.size());
      cfg.loss_kind = kind;
      const auto r = fit(task.train, cfg);
      REQUIRE(r.epoch_losses.size() == 30);
      for (std::size_t e = 1; e < r.epoch_losses.size(); ++e) {
        CHECK(r.epoch_losses[e] <= r.epoch_losses[e - 1] + 1e-12);
      }
    }
  }

  TEST_CASE("divergence names the epoch") {
    const auto d = gen_synthetic(200, 3, 3, 1.0, 1);
    TrainConfig cfg;
    cfg.learning_rate = 1e308;
    cfg.epochs = 5;
    cfg.loss_kind = LossKind::kLabelSmoothing;
    try {
      train(d, cfg);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() >= 1);
      CHECK(std::string(e.what()).find("epoch " + std::to_string(e.epoch())) != std::string::npos);
    }
  }

  TEST_CASE("evaluate") {
    const auto d = separable(300);
    LinearModel perfect;
    perfect.weights = Eigen::MatrixXd::Zero(2, 3);
    perfect.weights(1, 0) = 50.0;
    perfect.weights(0, 0) = -50.0;
    const auto ev = evaluate(perfect, d);
    CHECK(ev.accuracy == 1.0);
    double gap = 0.0;
    for (const auto& r : predict_records(perfect, d)) gap += 1.0 - r.confidence;
    CHECK(ev.ubce == doctest::Approx(gap / d.size()).epsilon(1e-12));

    const auto data = gen_synthetic(4000, 5, 2, 1e6, 12);
    LinearModel rnd;
    rnd.weights = Eigen::MatrixXd(2, 6);
    Rng rng(6);
    for (Eigen::Index i = 0; i < rnd.weights.size(); ++i) rnd.weights.data()[i] = rng.normal();
    const auto er = evaluate(rnd, data);
    CHECK(std::abs(er.accuracy - 0.5) <= 3 * std::sqrt(0.25 / 4000));

    const auto recs = predict_records(rnd, data);
    CHECK(er.ece == ece(recs));
    CHECK(er.ace == ace(recs));
    CHECK(er.mce == mce(recs));
    CHECK(er.ubce == ubce_empirical(recs));

    LinearModel wrong;
    wrong.weights = Eigen::MatrixXd::Zero(2, 3);
    CHECK_THROWS_AS(evaluate(wrong, data), InputError);
  }

  TEST_CASE("benchmark split sizes") {
    const auto s = make_benchmark({}, 3);
    CHECK(s.train.size() == 2000);
    CHECK(s.test.size() == 1000);
    CHECK(s.train.dim() == 10);
    CHECK(s.train.hidden_weights == s.test.hidden_weights);
  }
}
