// confcal: calibration metrics, loss demo, debate runner and temperature
// scaling from the command line.

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "confcal/commands.hpp"

namespace {

using namespace confcal;

int code(ExitCode c) { return static_cast<int>(c); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"confidence calibration toolkit"};
  app.require_subcommand(1);

  MetricsOptions metrics;
  auto* m = app.add_subcommand("metrics", "ECE/ACE/MCE/UBCE and classification metrics");
  m->add_option("predictions", metrics.predictions, "JSONL prediction log")->required();
  m->add_option("--bins", metrics.bins, "number of bins")->capture_default_str();
  m->add_option("--out", metrics.out_dir, "directory for metrics.json and reliability.csv");

  ReliabilityOptions rel;
  std::string binning = "equal_width";
  auto* r = app.add_subcommand("reliability", "reliability table as CSV and SVG");
  auto* r_pred = r->add_option("--predictions", rel.predictions, "JSONL prediction log");
  auto* r_tab = r->add_option("--table", rel.table, "existing reliability CSV");
  r_pred->excludes(r_tab);
  r->add_option("--bins", rel.bins, "number of bins")->capture_default_str();
  r->add_option("--binning", binning, "equal_width or equal_count")
      ->check(CLI::IsMember({"equal_width", "equal_count"}))
      ->capture_default_str();
  r->add_option("--csv", rel.csv_out, "CSV output path");
  r->add_option("--svg", rel.svg_out, "SVG output path");

  TrainDemoOptions train;
  auto* t = app.add_subcommand("train-demo", "FL vs FL+AlignCal on a synthetic task");
  t->add_option("--seeds", train.seeds, "seeds")->capture_default_str();
  t->add_option("--lr", train.learning_rate, "learning rate")->capture_default_str();
  t->add_option("--epochs", train.epochs, "epochs")->capture_default_str();
  t->add_option("--batch", train.batch_size, "batch size")->capture_default_str();
  t->add_option("--gamma", train.loss.gamma, "focal gamma")->capture_default_str();
  t->add_option("--lambda", train.loss.lambda, "AlignCal weight")->capture_default_str();
  t->add_option("--alpha", train.loss.alpha, "label smoothing")->capture_default_str();
  t->add_option("--n-train", train.task.n_train)->capture_default_str();
  t->add_option("--n-test", train.task.n_test)->capture_default_str();
  t->add_option("--dim", train.task.dim)->capture_default_str();
  t->add_option("--classes", train.task.num_classes)->capture_default_str();
  t->add_option("--noise-temperature", train.task.noise_temperature)->capture_default_str();
  t->add_option("--bins", train.bins, "number of bins")->capture_default_str();
  t->add_option("--out", train.out_dir, "directory for train_demo.json");

  DebateOptions debate;
  std::string source = "verbalized_first";
  bool debate_unanimous = false;
  auto* d = app.add_subcommand("debate", "two-stage multi-agent debate over a query batch");
  d->add_option("--queries", debate.queries, "JSONL queries")->required();
  d->add_option("--roster", debate.roster, "agent roster JSON")->required();
  d->add_option("--out", debate.out_dir, "output directory")->required();
  d->add_option("--seed", debate.config.seed, "root seed")->capture_default_str();
  d->add_option("--rounds", debate.config.rounds, "stage-2 rounds")->capture_default_str();
  d->add_option("--num-generalists", debate.config.num_generalists)->capture_default_str();
  d->add_option("--confidence-source", source, "verbalized_first or sequence_only")
      ->check(CLI::IsMember({"verbalized_first", "sequence_only"}))
      ->capture_default_str();
  d->add_flag("--debate-unanimous", debate_unanimous,
              "run stage 2 even when every specialist gives the same answer");
  d->add_flag("--parallel", debate.config.parallel, "run agent calls of a stage concurrently");
  d->add_option("--bins", debate.bins, "number of bins")->capture_default_str();

  CalibrateOptions cal;
  auto* c = app.add_subcommand("calibrate-ts", "temperature scaling fitted on a holdout split");
  c->add_option("predictions", cal.predictions, "JSONL prediction log")->required();
  c->add_option("--holdout", cal.holdout_fraction, "holdout fraction")->capture_default_str();
  c->add_option("--t-min", cal.grid.lo)->capture_default_str();
  c->add_option("--t-max", cal.grid.hi)->capture_default_str();
  c->add_option("--t-step", cal.grid.step)->capture_default_str();
  c->add_option("--seed", cal.seed, "split seed")->capture_default_str();
  c->add_option("--bins", cal.bins, "number of bins")->capture_default_str();
  c->add_option("--out", cal.out_dir, "directory for calibration.json and calibrated.jsonl");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::kInputError);
  }

  try {
    if (*m) {
      std::cout << cmd_metrics(metrics).dump(2) << "\n";
    } else if (*r) {
      rel.binning = binning == "equal_count" ? BinningKind::kEqualCount : BinningKind::kEqualWidth;
      const auto text = cmd_reliability(rel);
      if (rel.csv_out.empty() && rel.svg_out.empty()) std::cout << text;
    } else if (*t) {
      const auto report = cmd_train_demo(train);
      std::cout << report.dump(2) << "\n";
      if (report.at("failures").get<int>() > 0) return code(ExitCode::kInvariantViolation);
    } else if (*d) {
      debate.config.confidence_source = parse_confidence_source(source);
      debate.config.skip_unanimous = !debate_unanimous;
      const auto batch = cmd_debate(debate);
      std::cout << batch.report.dump(2) << "\n";
      return code(batch.status);
    } else if (*c) {
      std::cout << cmd_calibrate_ts(cal).dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(ExitCode::kInvariantViolation);
  }
  return 0;
}
