#pragma once

// File formats: JSONL prediction logs, reliability CSV/SVG, JSON reports.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "confcal/metrics.hpp"

namespace confcal {

// One JSON object per line: {"id", "predicted_answer", "true_answer",
// "confidence"}. Blank lines are skipped; anything else malformed raises
// InputError naming the 1-based line number.
std::vector<PredictionRecord> read_predictions(std::istream& in);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

void write_predictions(std::ostream& out, std::span<const PredictionRecord> records);
void save_predictions(const std::filesystem::path& path,
                      std::span<const PredictionRecord> records);

nlohmann::json to_json(const PredictionRecord& record);
PredictionRecord record_from_json(const nlohmann::json& j);

inline constexpr const char* kReliabilityCsvHeader =
    "bin_lo,bin_hi,count,mean_confidence,accuracy";

// Absent per-bin values are written as empty fields.
void write_reliability_csv(std::ostream& out, std::span<const ReliabilityBin> bins);
std::vector<ReliabilityBin> read_reliability_csv(std::istream& in);

void write_reliability_svg(std::ostream& out, std::span<const ReliabilityBin> bins,
                           const std::string& title = "Reliability diagram");

nlohmann::json to_json(const MetricsReport& report);

// Shortest round-trip decimal text for a double.
std::string format_real(double value);

// Writes `text` with LF line endings, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace confcal
