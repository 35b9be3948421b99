#include "confcal/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include "confcal/error.hpp"

namespace confcal {
namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }

void validate(std::span<const PredictionRecord> records, const char* what) {
  if (records.empty()) throw EmptyInputError(what);
  for (const auto& r : records) {
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
      throw InputError("record '" + r.id + "': confidence outside [0,1]");
    }
  }
}

void validate_bins(int num_bins) {
  if (num_bins < 1) throw InputError("num_bins must be >= 1");
}

ReliabilityBin summarize(double lo, double hi, std::span<const PredictionRecord> all,
                         std::span<const std::size_t> members) {
  ReliabilityBin bin{lo, hi, members.size(), std::nullopt, std::nullopt};
  if (members.empty()) return bin;
  double conf = 0.0;
  double hits = 0.0;
  for (std::size_t i : members) {
    conf += all[i].confidence;
    hits += all[i].correct() ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(members.size());
  bin.mean_confidence = conf / n;
  bin.accuracy = hits / n;
  return bin;
}

}  // namespace

std::string normalize_answer(std::string_view answer) {
  auto first = answer.begin();
  auto last = answer.end();
  auto strip = [&](auto pred) {
    while (first != last && pred(static_cast<unsigned char>(*first))) ++first;
    while (first != last && pred(static_cast<unsigned char>(*(last - 1)))) --last;
  };
  strip(is_space);
  strip([](unsigned char c) { return is_punct(c) || is_space(c); });
  std::string out(first, last);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool PredictionRecord::correct() const {
  return normalize_answer(predicted_answer) == normalize_answer(true_answer);
}

double ReliabilityBin::gap() const {
  if (count == 0) return 0.0;
  return std::abs(*accuracy - *mean_confidence);
}

std::size_t equal_width_bin_index(double confidence, int num_bins) {
  const double m = static_cast<double>(num_bins);
  auto idx = static_cast<long>(std::floor(confidence * m));
  // Correct floating rounding so that idx/M <= c < (idx+1)/M holds exactly.
  if (idx > 0 && static_cast<double>(idx) / m > confidence) --idx;
  if (idx + 1 < num_bins && static_cast<double>(idx + 1) / m <= confidence) ++idx;
  return static_cast<std::size_t>(std::clamp<long>(idx, 0, num_bins - 1));
}

std::vector<ReliabilityBin> bin_records(std::span<const PredictionRecord> records,
                                        BinningScheme scheme) {
  validate(records, "no prediction records to bin");
  validate_bins(scheme.num_bins);
  const auto num_bins = static_cast<std::size_t>(scheme.num_bins);
  std::vector<ReliabilityBin> bins;
  bins.reserve(num_bins);

  if (scheme.kind == BinningKind::kEqualWidth) {
    std::vector<std::vector<std::size_t>> members(num_bins);
    for (std::size_t i = 0; i < records.size(); ++i) {
      members[equal_width_bin_index(records[i].confidence, scheme.num_bins)].push_back(i);
    }
    const double m = static_cast<double>(num_bins);
    for (std::size_t b = 0; b < num_bins; ++b) {
      bins.push_back(summarize(static_cast<double>(b) / m, static_cast<double>(b + 1) / m,
                               records, members[b]));
    }
    return bins;
  }

  if (num_bins > records.size()) {
    throw InputError("equal-count binning needs at least as many records (" +
                     std::to_string(records.size()) + ") as bins (" +
                     std::to_string(num_bins) + ")");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].confidence < records[b].confidence;
  });
  const std::size_t base = records.size() / num_bins;
  const std::size_t extra = records.size() % num_bins;
  std::size_t start = 0;
  for (std::size_t b = 0; b < num_bins; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    std::span<const std::size_t> group(order.data() + start, size);
    bins.push_back(summarize(records[group.front()].confidence,
                             records[group.back()].confidence, records, group));
    start += size;
  }
  return bins;
}

double ece(std::span<const PredictionRecord> records, int num_bins) {
  const auto bins = bin_records(records, {BinningKind::kEqualWidth, num_bins});
  const double n = static_cast<double>(records.size());
  double total = 0.0;
  for (const auto& b : bins) total += static_cast<double>(b.count) / n * b.gap();
  return total;
}

double mce(std::span<const PredictionRecord> records, int num_bins) {
  const auto bins = bin_records(records, {BinningKind::kEqualWidth, num_bins});
  double worst = 0.0;
  for (const auto& b : bins) {
    if (b.count > 0) worst = std::max(worst, b.gap());
  }
  return worst;
}

double ace(std::span<const PredictionRecord> records, int num_bins) {
  const auto bins = bin_records(records, {BinningKind::kEqualCount, num_bins});
  double total = 0.0;
  for (const auto& b : bins) total += b.gap();
  return total / static_cast<double>(bins.size());
}

double ubce_empirical(std::span<const PredictionRecord> records) {
  validate(records, "no prediction records for UBCE");
  double total = 0.0;
  for (const auto& r : records) {
    total += r.correct() ? 1.0 - r.confidence : r.confidence;
  }
  return total / static_cast<double>(records.size());
}

ClassificationReport classification_report(std::span<const PredictionRecord> records) {
  validate(records, "no prediction records for classification report");
  struct Counts {
    double tp = 0, fp = 0, fn = 0;
  };
  std::map<std::string, Counts> classes;
  double hits = 0.0;
  for (const auto& r : records) {
    const auto pred = normalize_answer(r.predicted_answer);
    const auto truth = normalize_answer(r.true_answer);
    if (pred == truth) {
      classes[pred].tp += 1;
      hits += 1;
    } else {
      classes[pred].fp += 1;
      classes[truth].fn += 1;
    }
  }
  ClassificationReport rep;
  rep.accuracy = hits / static_cast<double>(records.size());
  for (const auto& [label, c] : classes) {
    const double p = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
    const double r = c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
    rep.precision += p;
    rep.recall += r;
    rep.f1 += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  const double k = static_cast<double>(classes.size());
  rep.precision /= k;
  rep.recall /= k;
  rep.f1 /= k;
  return rep;
}

std::vector<ReliabilityBin> reliability_table(std::span<const PredictionRecord> records,
                                              BinningScheme scheme) {
  auto bins = bin_records(records, scheme);
  std::stable_sort(bins.begin(), bins.end(),
                   [](const auto& a, const auto& b) { return a.lo < b.lo; });
  return bins;
}

MetricsReport compute_metrics(std::span<const PredictionRecord> records, int num_bins) {
  MetricsReport rep;
  rep.classification = classification_report(records);
  rep.ece = ece(records, num_bins);
  rep.mce = mce(records, num_bins);
  rep.ace_bins = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(std::max(num_bins, 1)), records.size()));
  rep.ace = ace(records, rep.ace_bins);
  rep.ubce = ubce_empirical(records);
  rep.n = records.size();
  rep.bins = num_bins;
  return rep;
}

}  // namespace confcal
