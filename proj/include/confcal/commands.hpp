#pragma once

// Library entry points behind the command-line subcommands. Each returns the
// JSON report it prints and writes its files under out_dir when one is given.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "confcal/debate.hpp"
#include "confcal/error.hpp"
#include "confcal/losses.hpp"
#include "confcal/metrics.hpp"
#include "confcal/posthoc.hpp"
#include "confcal/trainer.hpp"

namespace confcal {

struct MetricsOptions {
  std::filesystem::path predictions;
  int bins = kDefaultNumBins;
  std::filesystem::path out_dir;  // metrics.json + reliability.csv
};

nlohmann::json cmd_metrics(const MetricsOptions& opts);

struct ReliabilityOptions {
  std::filesystem::path predictions;  // either a prediction log...
  std::filesystem::path table;        // ...or a reliability CSV
  int bins = kDefaultNumBins;
  BinningKind binning = BinningKind::kEqualWidth;
  std::filesystem::path csv_out;
  std::filesystem::path svg_out;
};

// Returns the table as CSV text.
std::string cmd_reliability(const ReliabilityOptions& opts);

struct TrainDemoOptions {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  BenchmarkTask task;
  double learning_rate = 0.1;
  int epochs = 50;
  int batch_size = 64;
  LossConfig loss;
  int bins = kDefaultNumBins;
  std::filesystem::path out_dir;  // train_demo.json
};

// Rows {seed, loss_kind, accuracy, ece, ace, mce}, FL then FL+AlignCal per
// seed. A diverging run becomes a row with an "error" field.
nlohmann::json cmd_train_demo(const TrainDemoOptions& opts);

struct Roster {
  std::vector<AgentSpec> specialists;
  std::vector<AgentSpec> generalists;
  std::optional<AgentSpec> judge;
  std::optional<AgentSpec> verifier;
  std::shared_ptr<const FixtureTable> fixtures;
};

// JSON {"fixtures"?, "specialists": [...], "generalists": [...],
// "judge_agent"?, "verifier_agent"?}; the fixtures path is relative to the
// roster file.
Roster load_roster(const std::filesystem::path& path);
DebateParticipants make_participants(const Roster& roster);

struct DebateOptions {
  std::filesystem::path queries;
  std::filesystem::path roster;
  std::filesystem::path out_dir;  // predictions.jsonl, transcripts/, metrics.json
  DebateConfig config;
  int bins = kDefaultNumBins;
};

// Per-query seed derived from the run seed and the query id.
std::uint64_t query_seed(std::uint64_t run_seed, const std::string& query_id);

struct DebateBatch {
  nlohmann::json report;
  std::vector<PredictionRecord> records;
  std::vector<DebateResult> results;
  ExitCode status = ExitCode::kOk;  // worst per-query failure
};

DebateBatch cmd_debate(const DebateOptions& opts);

struct CalibrateOptions {
  std::filesystem::path predictions;
  double holdout_fraction = 0.1;
  TemperatureGrid grid;
  std::uint64_t seed = 0;
  int bins = kDefaultNumBins;
  std::filesystem::path out_dir;  // calibration.json + calibrated.jsonl
};

inline constexpr std::size_t kMinHoldout = 10;

nlohmann::json cmd_calibrate_ts(const CalibrateOptions& opts);

}  // namespace confcal
