#include "confcal/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "confcal/report_io.hpp"
#include "confcal/rng.hpp"

namespace confcal {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void check_bins(int bins) {
  if (bins < 1) throw InputError("bins must be >= 1");
}

std::string csv_text(std::span<const ReliabilityBin> bins) {
  std::ostringstream out;
  write_reliability_csv(out, bins);
  return out.str();
}

std::string jsonl_text(std::span<const PredictionRecord> records) {
  std::ostringstream out;
  write_predictions(out, records);
  return out.str();
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

bool has_truth(const Query& q) { return q.true_answer.has_value(); }

}  // namespace

json cmd_metrics(const MetricsOptions& opts) {
  check_bins(opts.bins);
  const auto records = load_predictions(opts.predictions);
  if (records.empty()) throw EmptyInputError(opts.predictions.string() + " has no records");
  const auto report = compute_metrics(records, opts.bins);
  const auto j = to_json(report);
  if (!opts.out_dir.empty()) {
    write_text_file(opts.out_dir / "metrics.json", j.dump(2) + "\n");
    const auto table = reliability_table(records, {BinningKind::kEqualWidth, opts.bins});
    write_text_file(opts.out_dir / "reliability.csv", csv_text(table));
  }
  return j;
}

std::string cmd_reliability(const ReliabilityOptions& opts) {
  std::vector<ReliabilityBin> table;
  if (!opts.table.empty()) {
    std::ifstream in(opts.table);
    if (!in) throw InputError("cannot open " + opts.table.string());
    table = read_reliability_csv(in);
  } else if (!opts.predictions.empty()) {
    check_bins(opts.bins);
    const auto records = load_predictions(opts.predictions);
    if (records.empty()) throw EmptyInputError(opts.predictions.string() + " has no records");
    table = reliability_table(records, {opts.binning, opts.bins});
  } else {
    throw InputError("reliability needs a prediction log or a reliability table");
  }
  const auto text = csv_text(table);
  if (!opts.csv_out.empty()) write_text_file(opts.csv_out, text);
  if (!opts.svg_out.empty()) {
    std::ostringstream svg;
    write_reliability_svg(svg, table);
    write_text_file(opts.svg_out, svg.str());
  }
  return text;
}

json cmd_train_demo(const TrainDemoOptions& opts) {
  check_bins(opts.bins);
  if (opts.seeds.empty()) throw InputError("train-demo needs at least one seed");
  json rows = json::array();
  int failures = 0;
  for (const auto seed : opts.seeds) {
    const auto split = make_benchmark(opts.task, seed);
    for (const auto kind : {LossKind::kFocal, LossKind::kFocalPlusAlignCal}) {
      TrainConfig cfg;
      cfg.learning_rate = opts.learning_rate;
      cfg.epochs = opts.epochs;
      cfg.batch_size = opts.batch_size;
      cfg.loss_kind = kind;
      cfg.loss_params = opts.loss;
      cfg.seed = seed;
      json row{{"seed", seed}, {"loss_kind", to_string(kind)}};
      try {
        const auto model = train(split.train, cfg);
        const auto ev = evaluate(model, split.test, opts.bins);
        row["accuracy"] = ev.accuracy;
        row["ece"] = ev.ece;
        row["ace"] = ev.ace;
        row["mce"] = ev.mce;
      } catch (const DivergenceError& e) {
        row["error"] = e.what();
        ++failures;
      }
      rows.push_back(std::move(row));
    }
  }
  json report{{"rows", rows},
              {"config",
               {{"learning_rate", opts.learning_rate},
                {"epochs", opts.epochs},
                {"batch_size", opts.batch_size},
                {"gamma", opts.loss.gamma},
                {"lambda", opts.loss.lambda},
                {"n_train", opts.task.n_train},
                {"n_test", opts.task.n_test},
                {"dim", opts.task.dim},
                {"num_classes", opts.task.num_classes},
                {"noise_temperature", opts.task.noise_temperature},
                {"bins", opts.bins}}},
              {"failures", failures}};
  if (!opts.out_dir.empty()) write_text_file(opts.out_dir / "train_demo.json", report.dump(2) + "\n");
  return report;
}

Roster load_roster(const fs::path& path) {
  const auto j = read_json_file(path);
  if (!j.is_object()) throw InputError("roster must be a JSON object");
  Roster roster;
  if (j.contains("fixtures")) {
    fs::path fx = j.at("fixtures").get<std::string>();
    if (fx.is_relative()) fx = path.parent_path() / fx;
    roster.fixtures = std::make_shared<FixtureTable>(FixtureTable::load(fx));
  }
  const auto list = [&](const char* key, Strategy fallback) {
    std::vector<AgentSpec> out;
    if (!j.contains(key) || !j.at(key).is_array()) {
      throw InputError(std::string("roster needs a '") + key + "' array");
    }
    for (const auto& e : j.at(key)) out.push_back(agent_spec_from_json(e, fallback));
    return out;
  };
  roster.specialists = list("specialists", Strategy::kChainOfThought);
  roster.generalists = list("generalists", Strategy::kGeneralist);
  for (const auto& s : roster.specialists) {
    if (s.strategy == Strategy::kGeneralist) {
      throw InputError("specialist '" + s.name + "' cannot use the generalist strategy");
    }
  }
  if (j.contains("judge_agent")) {
    roster.judge = agent_spec_from_json(j.at("judge_agent"), Strategy::kGeneralist);
  }
  if (j.contains("verifier_agent")) {
    roster.verifier = agent_spec_from_json(j.at("verifier_agent"), Strategy::kGeneralist);
  }
  return roster;
}

DebateParticipants make_participants(const Roster& roster) {
  DebateParticipants p;
  for (const auto& s : roster.specialists) p.specialists.push_back(make_agent(s, roster.fixtures));
  for (const auto& s : roster.generalists) p.generalists.push_back(make_agent(s, roster.fixtures));
  if (roster.judge) {
    p.judge = std::make_shared<AgentJudge>(make_agent(*roster.judge, roster.fixtures));
  }
  if (roster.verifier) {
    p.verifier = std::make_shared<AgentVerifier>(make_agent(*roster.verifier, roster.fixtures));
  }
  return p;
}

std::uint64_t query_seed(std::uint64_t run_seed, const std::string& query_id) {
  return mix64(run_seed ^ hash_label(query_id));
}

DebateBatch cmd_debate(const DebateOptions& opts) {
  check_bins(opts.bins);
  const auto queries = load_queries(opts.queries);
  if (queries.empty()) throw EmptyInputError(opts.queries.string() + " has no queries");
  const auto participants = make_participants(load_roster(opts.roster));

  DebateBatch batch;
  json failures = json::array();
  for (const auto& q : queries) {
    DebateConfig cfg = opts.config;
    cfg.seed = query_seed(opts.config.seed, q.id);
    try {
      auto result = run_debate(q, participants, cfg);
      if (!opts.out_dir.empty()) {
        write_text_file(opts.out_dir / "transcripts" / (q.id + ".json"),
                        result.to_json().dump(2) + "\n");
      }
      batch.records.push_back({q.id, result.final_answer, q.true_answer.value_or(""),
                               std::clamp(result.final_confidence, 0.0, 1.0)});
      batch.results.push_back(std::move(result));
    } catch (const DebateError& e) {
      std::cerr << "query " << q.id << ": " << e.what() << "\n";
      failures.push_back({{"query_id", q.id},
                          {"error", e.what()},
                          {"exit_code", static_cast<int>(e.exit_code())}});
      if (static_cast<int>(e.exit_code()) > static_cast<int>(batch.status)) {
        batch.status = e.exit_code();
      }
      if (!opts.out_dir.empty()) {
        json t{{"query_id", q.id}, {"error", e.what()}, {"transcript", e.transcript().events()}};
        write_text_file(opts.out_dir / "transcripts" / (q.id + ".json"), t.dump(2) + "\n");
      }
    }
  }

  json recs = json::array();
  for (const auto& r : batch.records) recs.push_back(to_json(r));
  batch.report = json{{"n_queries", queries.size()},
                      {"n_failed", failures.size()},
                      {"records", recs},
                      {"failures", failures}};
  const bool all_truth = std::all_of(queries.begin(), queries.end(), has_truth);
  if (all_truth && !batch.records.empty()) {
    batch.report["metrics"] = to_json(compute_metrics(batch.records, opts.bins));
  }
  if (!opts.out_dir.empty()) {
    write_text_file(opts.out_dir / "predictions.jsonl", jsonl_text(batch.records));
    if (batch.report.contains("metrics")) {
      write_text_file(opts.out_dir / "metrics.json", batch.report["metrics"].dump(2) + "\n");
      const auto table = reliability_table(batch.records, {BinningKind::kEqualWidth, opts.bins});
      write_text_file(opts.out_dir / "reliability.csv", csv_text(table));
    }
  }
  return batch;
}

json cmd_calibrate_ts(const CalibrateOptions& opts) {
  check_bins(opts.bins);
  if (!(opts.holdout_fraction > 0.0 && opts.holdout_fraction < 1.0)) {
    throw InputError("holdout fraction must lie in (0, 1)");
  }
  const auto records = load_predictions(opts.predictions);
  if (records.empty()) throw EmptyInputError(opts.predictions.string() + " has no records");

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng(opts.seed).child("split");
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

  const auto n_hold = static_cast<std::size_t>(
      std::llround(opts.holdout_fraction * static_cast<double>(records.size())));
  if (n_hold < kMinHoldout) {
    throw InputError("holdout has " + std::to_string(n_hold) + " records; need at least " +
                     std::to_string(kMinHoldout));
  }
  if (n_hold >= records.size()) throw InputError("no records left after the holdout split");

  std::vector<PredictionRecord> holdout;
  std::vector<PredictionRecord> rest;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_hold ? holdout : rest).push_back(records[order[i]]);
  }
  const double t = fit_temperature(holdout, opts.grid);
  const auto scaled = apply_temperature(rest, t);

  json report{{"temperature", t},
              {"n_holdout", holdout.size()},
              {"n_eval", rest.size()},
              {"holdout_nll_at_1", binary_nll(holdout, 1.0)},
              {"holdout_nll_at_t", binary_nll(holdout, t)},
              {"before", to_json(compute_metrics(rest, opts.bins))},
              {"after", to_json(compute_metrics(scaled, opts.bins))}};
  if (!opts.out_dir.empty()) {
    write_text_file(opts.out_dir / "calibration.json", report.dump(2) + "\n");
    write_text_file(opts.out_dir / "calibrated.jsonl", jsonl_text(scaled));
  }
  return report;
}

}  // namespace confcal
