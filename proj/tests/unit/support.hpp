#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "confcal/metrics.hpp"
#include "confcal/rng.hpp"

namespace testutil {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(CONFCAL_FIXTURE_DIR) / name;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / "confcal_tests" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// n records; confidences sometimes snapped to bin edges and 1.0.
inline std::vector<confcal::PredictionRecord> random_records(confcal::Rng& rng, std::size_t n) {
  std::vector<confcal::PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    double c = rng.uniform();
    const double u = rng.uniform();
    if (u < 0.1) c = std::floor(c * 10.0) / 10.0;
    else if (u < 0.15) c = 1.0;
    const bool ok = rng.uniform() < c;
    out.push_back({"r" + std::to_string(i), ok ? "a" : "b", "a", c});
  }
  return out;
}

// Direct per-bin double loop; bin m holds m/M <= c < (m+1)/M, last closed.
struct BruteBins {
  std::vector<double> acc, conf;
  std::vector<int> count;
};

inline BruteBins brute_equal_width(const std::vector<confcal::PredictionRecord>& rs, int m_bins) {
  BruteBins b;
  b.acc.assign(m_bins, 0.0);
  b.conf.assign(m_bins, 0.0);
  b.count.assign(m_bins, 0);
  for (int m = 0; m < m_bins; ++m) {
    const double lo = static_cast<double>(m) / m_bins;
    const double hi = static_cast<double>(m + 1) / m_bins;
    for (const auto& r : rs) {
      const bool in = m == m_bins - 1 ? (r.confidence >= lo && r.confidence <= 1.0)
                                      : (r.confidence >= lo && r.confidence < hi);
      if (in) {
        b.count[m] += 1;
        b.acc[m] += r.predicted_answer == r.true_answer ? 1.0 : 0.0;
        b.conf[m] += r.confidence;
      }
    }
  }
  return b;
}

inline double brute_ece(const std::vector<confcal::PredictionRecord>& rs, int m_bins) {
  const auto b = brute_equal_width(rs, m_bins);
  double e = 0.0;
  for (int m = 0; m < m_bins; ++m) {
    if (b.count[m] == 0) continue;
    e += std::abs(b.acc[m] - b.conf[m]) / static_cast<double>(rs.size());
  }
  return e;
}

inline double brute_mce(const std::vector<confcal::PredictionRecord>& rs, int m_bins) {
  const auto b = brute_equal_width(rs, m_bins);
  double e = 0.0;
  for (int m = 0; m < m_bins; ++m) {
    if (b.count[m] == 0) continue;
    e = std::max(e, std::abs(b.acc[m] - b.conf[m]) / b.count[m]);
  }
  return e;
}

inline double brute_ace(const std::vector<confcal::PredictionRecord>& rs, int n_bins) {
  std::vector<std::size_t> idx(rs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // insertion sort keeps ties in input order
  for (std::size_t i = 1; i < idx.size(); ++i) {
    for (std::size_t j = i; j > 0 && rs[idx[j - 1]].confidence > rs[idx[j]].confidence; --j) {
      std::swap(idx[j - 1], idx[j]);
    }
  }
  const std::size_t n = rs.size(), base = n / n_bins, extra = n % n_bins;
  double total = 0.0;
  std::size_t pos = 0;
  for (int b = 0; b < n_bins; ++b) {
    const std::size_t size = base + (static_cast<std::size_t>(b) < extra ? 1 : 0);
    double a = 0.0, c = 0.0;
    for (std::size_t k = 0; k < size; ++k, ++pos) {
      const auto& r = rs[idx[pos]];
      a += r.predicted_answer == r.true_answer ? 1.0 : 0.0;
      c += r.confidence;
    }
    total += std::abs(a - c) / size;
  }
  return total / n_bins;
}

inline double brute_ubce(const std::vector<confcal::PredictionRecord>& rs) {
  double s = 0.0;
  for (const auto& r : rs) {
    const double t = r.predicted_answer == r.true_answer ? 1.0 : 0.0;
    s += t * (1.0 - r.confidence) + (1.0 - t) * r.confidence;
  }
  return s / rs.size();
}

}  // namespace testutil
