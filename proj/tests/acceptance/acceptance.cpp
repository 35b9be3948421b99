// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/support.hpp"
#include "confcal/commands.hpp"
#include "confcal/debate.hpp"
#include "confcal/losses.hpp"
#include "confcal/metrics.hpp"
#include "confcal/posthoc.hpp"
#include "confcal/report_io.hpp"
#include "confcal/trainer.hpp"

using namespace confcal;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;  // runtime limit, 0 for none
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome worked_example() {
  const auto rs = load_predictions(testutil::fixture("tumor.jsonl"));
  const double e = ece(rs, 10), u = ubce_empirical(rs);
  const bool ok = rs.size() == 5 && std::abs(e - 0.3) <= 1e-9 && std::abs(u - 0.42) <= 1e-9;
  return {ok, "ECE=" + fmt("%.12f", e) + " UBCE=" + fmt("%.12f", u)};
}

Outcome metric_oracles() {
  Rng rng(20240601);
  double worst = 0.0;
  int order_violations = 0;
  for (int set = 0; set < 200; ++set) {
    const auto n = 1 + rng.index(50);
    const auto rs = testutil::random_records(rng, n);
    const int bins = 10;
    const int ace_bins = static_cast<int>(std::min<std::size_t>(bins, n));
    const double e = ece(rs, bins), m = mce(rs, bins), u = ubce_empirical(rs), a = ace(rs, ace_bins);
    worst = std::max({worst, std::abs(e - testutil::brute_ece(rs, bins)),
                      std::abs(m - testutil::brute_mce(rs, bins)),
                      std::abs(u - testutil::brute_ubce(rs)),
                      std::abs(a - testutil::brute_ace(rs, ace_bins))});
    if (!(e <= m + 1e-15) || !(e <= u + 1e-15)) ++order_violations;
  }
  return {worst <= 1e-12 && order_violations == 0,
          "max |lib-oracle|=" + fmt("%.3g", worst) + " order violations=" +
              std::to_string(order_violations) + " over 200 sets"};
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-8);
}

Outcome gradient_fidelity() {
  Rng rng(77);
  double worst_rel = 0.0, worst_sum = 0.0;
  int checked = 0, skipped = 0;
  const LossConfig cfg;
  for (std::size_t k : {2, 3, 5}) {
    int done = 0;
    while (done < 100) {
      std::vector<double> z(k);
      for (auto& v : z) v = rng.normal(0.0, 2.0);
      const auto p = softmax(z);
      std::vector<double> sorted(p.values().begin(), p.values().end());
      std::sort(sorted.rbegin(), sorted.rend());
      if (sorted[0] - sorted[1] < 1e-6) {
        ++skipped;
        continue;
      }
      const auto y = rng.index(k);
      const auto ga = aligncal_grad(z, y);
      const auto gt = total_grad(z, y, cfg);
      const auto fa = finite_diff_grad(
          [y](std::span<const double> v) { return aligncal_loss(softmax(v), y); }, z, 1e-5);
      const auto ft = finite_diff_grad(
          [&](std::span<const double> v) { return total_loss(v, y, cfg); }, z, 1e-5);
      worst_rel = std::max({worst_rel, rel_err(ga, fa), rel_err(gt, ft)});
      worst_sum = std::max({worst_sum, std::abs(std::accumulate(ga.begin(), ga.end(), 0.0)),
                            std::abs(std::accumulate(gt.begin(), gt.end(), 0.0))});
      ++done;
      ++checked;
    }
  }
  return {worst_rel <= 1e-6 && worst_sum <= 1e-10,
          "max rel err=" + fmt("%.3g", worst_rel) + " max |sum|=" + fmt("%.3g", worst_sum) + " (" +
              std::to_string(checked) + " points, " + std::to_string(skipped) + " near-ties skipped)"};
}

Outcome loss_identities() {
  Rng rng(5);
  double worst_identity = 0.0, worst_ce = 0.0;
  int zero_mismatch = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto k = 2 + rng.index(4);
    std::vector<double> probs(k, 0.0);
    const auto y = rng.index(k);
    if (t % 10 == 0) {
      probs[t % 20 == 0 ? y : (y + 1) % k] = 1.0;  // one-hot, on or off the label
    } else {
      double s = 0.0;
      for (auto& v : probs) s += (v = -std::log(1.0 - rng.uniform()));
      for (auto& v : probs) v /= s;
    }
    const ProbDist p(probs);
    const double py = p[y], pm = p.max();
    const double l = aligncal_loss(p, y);
    worst_identity = std::max(worst_identity, std::abs(l - (py + pm - 2 * py * pm)));
    if ((l == 0.0) != (py == 1.0)) ++zero_mismatch;
    if (py > 0.0) worst_ce = std::max(worst_ce, std::abs(focal_loss(p, y, 0.0) + std::log(py)));
  }
  return {worst_identity <= 1e-12 && zero_mismatch == 0 && worst_ce <= 1e-12,
          "identity err=" + fmt("%.3g", worst_identity) + " zero-iff mismatches=" +
              std::to_string(zero_mismatch) + " |FL(g=0)-CE|=" + fmt("%.3g", worst_ce)};
}

Outcome training_claim() {
  const auto report = cmd_train_demo(TrainDemoOptions{});
  const auto& rows = report.at("rows");
  int wins = 0;
  double worst_drop = -1.0;
  std::ostringstream per_seed;
  for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
    if (rows[i].contains("error") || rows[i + 1].contains("error")) {
      per_seed << " seed " << rows[i].at("seed") << " diverged;";
      continue;
    }
    const double fl = rows[i].at("ece"), al = rows[i + 1].at("ece");
    const double drop = rows[i].at("accuracy").get<double>() - rows[i + 1].at("accuracy").get<double>();
    wins += al <= fl;
    worst_drop = std::max(worst_drop, drop);
    per_seed << " " << fmt("%.3f", fl) << "->" << fmt("%.3f", al);
  }
  return {wins >= 4 && worst_drop <= 0.02,
          "AlignCal ECE <= FL ECE on " + std::to_string(wins) + "/5 seeds, worst accuracy drop " +
              fmt("%.3f", worst_drop) + "; ECE" + per_seed.str()};
}

Outcome stage1_fidelity() {
  const auto queries = load_queries(testutil::fixture("fish_queries.jsonl"));
  const auto participants = make_participants(load_roster(testutil::fixture("fish_roster.json")));
  const auto r = run_debate(queries.at(0), participants, DebateConfig{});
  const auto& s = r.stage1;
  const bool ok = s.size() == 2 && s[0].answer == "cardinalfish" && s[0].frequency == 3 &&
                  std::abs(s[0].mean_confidence - 0.8333333333333334) <= 1e-9 &&
                  s[1].answer == "black howler" && s[1].frequency == 1 &&
                  std::abs(s[1].mean_confidence - 0.90) <= 1e-9;
  std::ostringstream d;
  for (const auto& st : s) d << st.answer << ": f=" << st.frequency << " c=" << fmt("%.10f", st.mean_confidence) << "; ";
  return {ok, d.str()};
}

Outcome sampling_law() {
  const std::vector<StanceSummary> s{{"A", {0, 1, 2}, 3, 0.8}, {"B", {3}, 1, 0.9}};
  const Rng root(99);
  const int n = 10000;
  int a = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng = root.child(static_cast<std::uint64_t>(i));
    a += sample_stance(s, rng) == 0;
  }
  const double fa = static_cast<double>(a) / n;
  return {std::abs(fa - 0.75) <= 0.02 && std::abs((1 - fa) - 0.25) <= 0.02,
          "empirical " + fmt("%.4f", fa) + "/" + fmt("%.4f", 1 - fa) + " over 10000 draws"};
}

Outcome aggregation_determinism() {
  const auto queries = load_queries(testutil::fixture("fish_queries.jsonl"));
  const auto participants = make_participants(load_roster(testutil::fixture("fish_roster.json")));
  bool identical = true;
  for (std::uint64_t seed : {1ULL, 2ULL, 12345ULL}) {
    for (const auto& q : queries) {
      DebateConfig cfg;
      cfg.seed = seed;
      const auto a = run_debate(q, participants, cfg).to_json().dump();
      const auto b = run_debate(q, participants, cfg).to_json().dump();
      cfg.parallel = true;
      const auto c = run_debate(q, participants, cfg).to_json().dump();
      identical = identical && a == b && a == c;
    }
  }
  NormalizingJudge judge;
  Query q{"t", "tie?", {}, {}, {}};
  auto outs = [](std::vector<std::pair<std::string, double>> v) {
    std::vector<RefinedOutput> r;
    for (std::size_t i = 0; i < v.size(); ++i) r.push_back({static_cast<int>(i), v[i].first, v[i].second, "", {}});
    return r;
  };
  const auto t1 = aggregate(outs({{"A", 0.6}, {"B", 0.9}, {"A", 0.6}, {"B", 0.9}}), judge, q);
  const auto t2 = aggregate(outs({{"zeta", 0.7}, {"alpha", 0.7}}), judge, q);
  const auto t3 = aggregate(outs({{"A", 0.8}, {"A", 0.6}, {"B", 0.9}}), judge, q);
  const bool ties = t1.final_answer == "B" && t2.final_answer == "alpha" && t3.final_answer == "A" &&
                    std::abs(t3.final_confidence - 0.7) <= 1e-12;
  return {identical && ties, std::string("reruns ") + (identical ? "byte-identical" : "DIFFER") +
                                 ", tie-breaks " + (ties ? "as documented" : "WRONG")};
}

struct PopulationRun {
  double post_ece = 0.0;
  double best_single_ece = 1.0;
  double accuracy = 0.0;
};

// 3 calibrated specialists (accuracy 0.8), 1 overconfident (accuracy 0.5, confidence 0.95),
// 4 deliberative generalists, 500 four-option queries.
PopulationRun simulated_population(bool skip_unanimous) {
  DebateParticipants p;
  auto agent = [](const std::string& name, std::uint64_t seed, Params params) {
    AgentSpec s;
    s.name = name;
    s.backend = Backend::kSimulated;
    s.seed = seed;
    s.backend_params = std::move(params);
    return std::shared_ptr<const Agent>(make_agent(s));
  };
  const Params calibrated{{"accuracy", "0.8"}, {"correct_mean", "0.8"}, {"correct_spread", "0.05"},
                          {"wrong_mean", "0.8"}, {"wrong_spread", "0.05"}};
  const Params overconfident{{"accuracy", "0.5"}, {"correct_mean", "0.95"}, {"correct_spread", "0.0"},
                             {"wrong_mean", "0.95"}, {"wrong_spread", "0.0"}};
  for (int i = 0; i < 3; ++i) p.specialists.push_back(agent("calibrated-" + std::to_string(i), 100 + i, calibrated));
  p.specialists.push_back(agent("overconfident", 103, overconfident));
  for (int j = 0; j < 4; ++j) p.generalists.push_back(agent("generalist-" + std::to_string(j), 200 + j, {}));

  const int n = 500;
  std::vector<std::vector<PredictionRecord>> single(p.specialists.size());
  std::vector<PredictionRecord> debated;
  for (int i = 0; i < n; ++i) {
    Query q;
    q.id = "sim-" + std::to_string(i);
    q.question = "Synthetic question " + std::to_string(i) + "?";
    q.options = {"alpha", "bravo", "charlie", "delta"};
    q.true_answer = q.options[static_cast<std::size_t>(i) % 4];
    for (std::size_t k = 0; k < p.specialists.size(); ++k) {
      const auto r = p.specialists[k]->respond(q);
      single[k].push_back({q.id, r.parsed_answer, *q.true_answer, r.confidence(ConfidenceSource::kVerbalizedFirst)});
    }
    DebateConfig cfg;
    cfg.seed = query_seed(2024, q.id);
    cfg.skip_unanimous = skip_unanimous;
    const auto res = run_debate(q, p, cfg);
    debated.push_back({q.id, res.final_answer, *q.true_answer, res.final_confidence});
  }
  PopulationRun out;
  for (const auto& s : single) out.best_single_ece = std::min(out.best_single_ece, ece(s));
  out.post_ece = ece(debated);
  out.accuracy = classification_report(debated).accuracy;
  return out;
}

Outcome debate_calibration() {
  const auto def = simulated_population(DebateConfig{}.skip_unanimous);
  const auto all = simulated_population(false);
  return {def.post_ece <= def.best_single_ece + 0.02,
          "default config: post-debate ECE=" + fmt("%.4f", def.post_ece) + " best single ECE=" +
              fmt("%.4f", def.best_single_ece) + " accuracy=" + fmt("%.3f", def.accuracy) +
              " | informational, unanimous stances debated: post-debate ECE=" + fmt("%.4f", all.post_ece)};
}

double grid_oracle(const std::vector<PredictionRecord>& rs) {
  double best_t = 0.0, best = INFINITY;
  for (int k = 1; k <= 100; ++k) {
    const double t = k / 10.0;
    double nll = 0.0;
    for (const auto& r : rs) {
      const double c = std::clamp(r.confidence, 1e-6, 1.0 - 1e-6);
      const double s = 1.0 / (1.0 + std::exp(-std::log(c / (1 - c)) / t));
      nll -= r.correct() ? std::log(s) : std::log(1.0 - s);
    }
    if (nll < best) {
      best = nll;
      best_t = t;
    }
  }
  return best_t;
}

Outcome temperature_scaling() {
  std::vector<std::vector<PredictionRecord>> sets;
  Rng rng(31);
  for (int i = 0; i < 10; ++i) sets.push_back(testutil::random_records(rng, 30 + rng.index(300)));
  std::vector<PredictionRecord> over;
  for (int i = 0; i < 2000; ++i) over.push_back({"o" + std::to_string(i), "a", rng.uniform() < 0.6 ? "a" : "b", 0.95});
  sets.push_back(over);

  int oracle_mismatch = 0, accuracy_changes = 0;
  for (const auto& s : sets) {
    const double t = fit_temperature(s);
    if (std::abs(t - grid_oracle(s)) > 1e-12) ++oracle_mismatch;
    if (classification_report(apply_temperature(s, t)).accuracy != classification_report(s).accuracy) ++accuracy_changes;
  }
  const double t_over = fit_temperature(over);
  const double pre = ece(over), post = ece(apply_temperature(over, t_over));
  return {oracle_mismatch == 0 && accuracy_changes == 0 && post <= pre && t_over > 1.0,
          "oracle mismatches=" + std::to_string(oracle_mismatch) + " accuracy changes=" +
              std::to_string(accuracy_changes) + " overconfident T*=" + fmt("%.1f", t_over) + " ECE " +
              fmt("%.4f", pre) + "->" + fmt("%.4f", post)};
}

std::pair<int, std::string> run_cli(const std::string& args) {
  const std::string cmd = std::string(CONFCAL_CLI) + " " + args + " 2>&1";
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

Outcome cli_round_trip() {
  const auto path = testutil::fixture("tumor.jsonl");
  const auto [code, out] = run_cli("metrics '" + path.string() + "'");
  const auto lib = to_json(compute_metrics(load_predictions(path), kDefaultNumBins));
  bool same = false;
  try {
    same = code == 0 && json::parse(out) == lib;
  } catch (const std::exception&) {
  }
  const auto [bad_code, bad_out] = run_cli("metrics '" + testutil::fixture("malformed.jsonl").string() + "'");
  const bool names_line = bad_code != 0 && bad_out.find("line 2") != std::string::npos;
  return {same && names_line, std::string("metrics report ") + (same ? "equals" : "DIFFERS from") +
                                  " library; malformed exit=" + std::to_string(bad_code) +
                                  (names_line ? " naming line 2" : " without line number")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"worked-example fidelity", 1.0, worked_example},
      {"metric oracle equivalence", 10.0, metric_oracles},
      {"gradient fidelity", 5.0, gradient_fidelity},
      {"loss identities", 0.0, loss_identities},
      {"desk-scale training claim", 120.0, training_claim},
      {"stage-1 fidelity", 0.0, stage1_fidelity},
      {"stance-sampling law", 0.0, sampling_law},
      {"aggregation determinism", 0.0, aggregation_determinism},
      {"debate calibration property", 60.0, debate_calibration},
      {"temperature scaling", 0.0, temperature_scaling},
      {"cli round-trip", 0.0, cli_round_trip},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool pass = o.pass;
    std::string budget;
    if (c.budget_s > 0.0) {
      budget = " / limit " + fmt("%.0f", c.budget_s) + " s";
      if (secs >= c.budget_s) {
        pass = false;
        o.detail += " (over time budget)";
      }
    }
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.name << ": " << o.detail << "  [" << fmt("%.2f", secs) << " s"
              << budget << "]" << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
