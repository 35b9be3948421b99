#pragma once

// Calibration and classification metrics over top-label prediction logs.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace confcal {

// Trim, ASCII case-fold, strip surrounding punctuation.
std::string normalize_answer(std::string_view answer);

struct PredictionRecord {
  std::string id;
  std::string predicted_answer;
  std::string true_answer;
  double confidence = 0.0;

  // Correctness is derived from the answers, never stored.
  bool correct() const;
};

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  // Absent for empty bins.
  std::optional<double> mean_confidence;
  std::optional<double> accuracy;

  // |accuracy - mean_confidence|, zero for an empty bin.
  double gap() const;
};

enum class BinningKind { kEqualWidth, kEqualCount };

struct BinningScheme {
  BinningKind kind = BinningKind::kEqualWidth;
  int num_bins = 10;
};

inline constexpr int kDefaultNumBins = 10;

// Index of the equal-width bin [m/M, (m+1)/M) holding `confidence`; the last
// bin is closed at 1.0.
std::size_t equal_width_bin_index(double confidence, int num_bins);

// Partition records into bins. Equal-width bins cover [0,1] in ascending
// order. Equal-count bins split the confidence-sorted records (stable, ties in
// input order) into groups whose sizes differ by at most one, larger groups
// first; their lo/hi are the min/max member confidence.
std::vector<ReliabilityBin> bin_records(std::span<const PredictionRecord> records,
                                        BinningScheme scheme);

double ece(std::span<const PredictionRecord> records, int num_bins = kDefaultNumBins);
double mce(std::span<const PredictionRecord> records, int num_bins = kDefaultNumBins);
// Throws InputError when num_bins exceeds the number of records.
double ace(std::span<const PredictionRecord> records, int num_bins = kDefaultNumBins);
double ubce_empirical(std::span<const PredictionRecord> records);

struct ClassificationReport {
  double accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Macro-averaged over every normalized answer that appears as a label or a
// prediction.
ClassificationReport classification_report(std::span<const PredictionRecord> records);

// Same rows as bin_records, ascending by lo; meant for CSV/SVG emission.
std::vector<ReliabilityBin> reliability_table(std::span<const PredictionRecord> records,
                                              BinningScheme scheme);

struct MetricsReport {
  ClassificationReport classification;
  double ece = 0.0;
  double ace = 0.0;
  double mce = 0.0;
  double ubce = 0.0;
  std::size_t n = 0;
  int bins = kDefaultNumBins;
  // ACE uses min(bins, n) equal-count bins so small logs still report it.
  int ace_bins = kDefaultNumBins;
};

MetricsReport compute_metrics(std::span<const PredictionRecord> records,
                              int num_bins = kDefaultNumBins);

}  // namespace confcal
