#include <doctest.h>

#include "confcal/error.hpp"
#include "confcal/metrics.hpp"
#include "support.hpp"

using namespace confcal;
using testutil::random_records;

namespace {

std::vector<PredictionRecord> tumor() {
  std::vector<PredictionRecord> rs;
  for (int i = 0; i < 5; ++i) {
    rs.push_back({"t" + std::to_string(i), "tumor", i < 3 ? "tumor" : "no tumor", 0.9});
  }
  return rs;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("normalize_answer") {
    CHECK(normalize_answer("  Yes. ") == "yes");
    CHECK(normalize_answer("\"Cardinalfish!\"") == "cardinalfish");
    CHECK(normalize_answer("black-howler") == "black-howler");
    CHECK(normalize_answer("...") == "");
    PredictionRecord r{"x", "YES!", " yes", 0.5};
    CHECK(r.correct());
  }

  TEST_CASE("tumor example") {
    const auto rs = tumor();
    CHECK(ece(rs) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(mce(rs) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(ubce_empirical(rs) == doctest::Approx(0.42).epsilon(1e-12));
    CHECK(ace(rs, 1) == doctest::Approx(0.3).epsilon(1e-12));

    const auto bins = bin_records(rs, {BinningKind::kEqualWidth, 10});
    REQUIRE(bins.size() == 10);
    for (std::size_t m = 0; m < 9; ++m) {
      CHECK(bins[m].count == 0);
      CHECK_FALSE(bins[m].mean_confidence.has_value());
      CHECK_FALSE(bins[m].accuracy.has_value());
    }
    CHECK(bins[9].count == 5);
    CHECK(*bins[9].mean_confidence == doctest::Approx(0.9));
    CHECK(*bins[9].accuracy == doctest::Approx(0.6));
    CHECK(bins[9].lo == doctest::Approx(0.9));
    CHECK(bins[9].hi == doctest::Approx(1.0));
  }

  TEST_CASE("confidence 1.0 lands in the last bin") {
    std::vector<PredictionRecord> rs{{"a", "x", "x", 1.0}};
    const auto bins = bin_records(rs, {BinningKind::kEqualWidth, 10});
    CHECK(bins.back().count == 1);
    CHECK(*bins.back().accuracy == 1.0);
    CHECK(ece(rs) == 0.0);
    CHECK(ubce_empirical(rs) == 0.0);
    CHECK(ace(rs, 1) == 0.0);
  }

  TEST_CASE("bin edges") {
    CHECK(equal_width_bin_index(0.0, 10) == 0);
    CHECK(equal_width_bin_index(0.1, 10) == 1);
    CHECK(equal_width_bin_index(0.3, 10) == 3);
    CHECK(equal_width_bin_index(0.7, 10) == 7);
    CHECK(equal_width_bin_index(0.99999, 10) == 9);
    CHECK(equal_width_bin_index(1.0, 10) == 9);
    CHECK(equal_width_bin_index(0.5, 1) == 0);
  }

  TEST_CASE("empty input and bad bins") {
    std::vector<PredictionRecord> none;
    CHECK_THROWS_AS(ece(none), EmptyInputError);
    CHECK_THROWS_AS(mce(none), EmptyInputError);
    CHECK_THROWS_AS(ace(none, 1), EmptyInputError);
    CHECK_THROWS_AS(ubce_empirical(none), EmptyInputError);
    CHECK_THROWS_AS(classification_report(none), EmptyInputError);
    CHECK_THROWS_AS(bin_records(none, {}), EmptyInputError);
    CHECK_THROWS_AS(ece(tumor(), 0), InputError);
    CHECK_THROWS_AS(ace(tumor(), 6), InputError);
  }

  TEST_CASE("equal-count bins against a sort-and-split oracle") {
    Rng rng(11);
    auto rs = random_records(rng, 20);
    const auto bins = bin_records(rs, {BinningKind::kEqualCount, 4});
    REQUIRE(bins.size() == 4);
    for (const auto& b : bins) CHECK(b.count == 5);

    std::vector<double> sorted;
    for (const auto& r : rs) sorted.push_back(r.confidence);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t b = 0; b < 4; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += sorted[b * 5 + k];
      CHECK(*bins[b].mean_confidence == doctest::Approx(s / 5).epsilon(1e-12));
      CHECK(bins[b].lo == sorted[b * 5]);
      CHECK(bins[b].hi == sorted[b * 5 + 4]);
    }

    auto uneven = random_records(rng, 23);
    const auto ub = bin_records(uneven, {BinningKind::kEqualCount, 5});
    std::vector<std::size_t> sizes;
    for (const auto& b : ub) sizes.push_back(b.count);
    CHECK(sizes == std::vector<std::size_t>{5, 5, 5, 4, 4});
  }

  TEST_CASE("brute-force oracle agreement") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
      const auto n = 1 + rng.index(50);
      const auto rs = random_records(rng, n);
      for (int m : {1, 5, 10, 15}) {
        CHECK(ece(rs, m) == doctest::Approx(testutil::brute_ece(rs, m)).epsilon(1e-12));
        CHECK(mce(rs, m) == doctest::Approx(testutil::brute_mce(rs, m)).epsilon(1e-12));
        CHECK(ece(rs, m) <= mce(rs, m) + 1e-15);
        CHECK(ece(rs, m) <= ubce_empirical(rs) + 1e-15);
      }
      CHECK(ubce_empirical(rs) == doctest::Approx(testutil::brute_ubce(rs)).epsilon(1e-12));
      const int b = static_cast<int>(std::min<std::size_t>(5, n));
      CHECK(ace(rs, b) == doctest::Approx(testutil::brute_ace(rs, b)).epsilon(1e-12));
    }
  }

  TEST_CASE("M=1 reduces to the mean gap") {
    Rng rng(5);
    const auto rs = random_records(rng, 37);
    double a = 0.0, c = 0.0;
    for (const auto& r : rs) {
      a += r.correct();
      c += r.confidence;
    }
    CHECK(ece(rs, 1) == doctest::Approx(std::abs(a - c) / rs.size()).epsilon(1e-12));
  }

  TEST_CASE("permutation and duplication invariance") {
    Rng rng(9);
    const auto rs = random_records(rng, 30);
    auto rev = rs;
    std::reverse(rev.begin(), rev.end());
    CHECK(ece(rev) == doctest::Approx(ece(rs)).epsilon(1e-12));
    CHECK(mce(rev) == doctest::Approx(mce(rs)).epsilon(1e-12));
    CHECK(ubce_empirical(rev) == doctest::Approx(ubce_empirical(rs)).epsilon(1e-12));

    auto dup = rs;
    dup.insert(dup.end(), rs.begin(), rs.end());
    CHECK(ece(dup) == doctest::Approx(ece(rs)).epsilon(1e-12));
    CHECK(mce(dup) == doctest::Approx(mce(rs)).epsilon(1e-12));
    CHECK(ubce_empirical(dup) == doctest::Approx(ubce_empirical(rs)).epsilon(1e-12));
  }

  TEST_CASE("perfectly calibrated two-bin set") {
    std::vector<PredictionRecord> rs;
    for (int i = 0; i < 10; ++i) rs.push_back({"a", i < 2 ? "x" : "y", "x", 0.2});
    for (int i = 0; i < 10; ++i) rs.push_back({"b", i < 8 ? "x" : "y", "x", 0.8});
    CHECK(mce(rs) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ece(rs) == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<PredictionRecord> perfect{{"a", "x", "x", 1.0}, {"b", "y", "y", 1.0}};
    CHECK(ace(perfect, 2) == 0.0);
  }

  TEST_CASE("classification report") {
    // yes/no: TP=3 FP=1 FN=1 TN=5 with "yes" positive
    std::vector<PredictionRecord> rs;
    auto add = [&](const char* pred, const char* truth, int k) {
      for (int i = 0; i < k; ++i) rs.push_back({"", pred, truth, 0.5});
    };
    add("yes", "yes", 3);
    add("yes", "no", 1);
    add("no", "yes", 1);
    add("no", "no", 5);
    const auto rep = classification_report(rs);
    const double p_yes = 3.0 / 4, r_yes = 3.0 / 4, f_yes = 2 * p_yes * r_yes / (p_yes + r_yes);
    const double p_no = 5.0 / 6, r_no = 5.0 / 6, f_no = 2 * p_no * r_no / (p_no + r_no);
    CHECK(rep.accuracy == doctest::Approx(0.8));
    CHECK(rep.precision == doctest::Approx((p_yes + p_no) / 2));
    CHECK(rep.recall == doctest::Approx((r_yes + r_no) / 2));
    CHECK(rep.f1 == doctest::Approx((f_yes + f_no) / 2));

    std::vector<PredictionRecord> all{{"", "a", "a", 0.9}, {"", "b", "B.", 0.9}};
    const auto perfect = classification_report(all);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1 == 1.0);

    // class "b" never predicted: its precision and F1 are 0
    std::vector<PredictionRecord> skew{{"", "a", "a", 0.9}, {"", "a", "b", 0.9}};
    const auto s = classification_report(skew);
    const double f_a = 2 * 0.5 * 1.0 / 1.5;
    CHECK(s.precision == doctest::Approx(0.25));
    CHECK(s.recall == doctest::Approx(0.5));
    CHECK(s.f1 == doctest::Approx(f_a / 2));
  }

  TEST_CASE("reliability table") {
    const auto table = reliability_table(tumor(), {BinningKind::kEqualWidth, 10});
    REQUIRE(table.size() == 10);
    int occupied = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
      occupied += table[i].count > 0;
      if (i > 0) CHECK(table[i].lo > table[i - 1].lo);
      if (table[i].count == 0) CHECK(table[i].gap() == 0.0);
    }
    CHECK(occupied == 1);
  }

  TEST_CASE("compute_metrics bundles the library calls") {
    Rng rng(77);
    const auto rs = random_records(rng, 40);
    const auto rep = compute_metrics(rs, 10);
    CHECK(rep.ece == ece(rs, 10));
    CHECK(rep.mce == mce(rs, 10));
    CHECK(rep.ace == ace(rs, 10));
    CHECK(rep.ubce == ubce_empirical(rs));
    CHECK(rep.n == 40);
    const auto small = compute_metrics(tumor(), 10);
    CHECK(small.ace_bins == 5);
  }
}
