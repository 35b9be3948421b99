#include "confcal/debate.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <future>
#include <numeric>

#include "confcal/metrics.hpp"

namespace confcal {
namespace {

using nlohmann::json;

// Runs fn(0..n-1), optionally concurrently; results come back in index order
// and the lowest failing index rethrows first.
template <class Fn>
auto map_indices(std::size_t n, bool parallel, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out;
  out.reserve(n);
  if (!parallel || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
    return out;
  }
  std::vector<std::future<R>> futures;
  futures.reserve(n);
  for (std::size_t i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, fn, i));
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string feedback_text(const Feedback& f) {
  std::string s = "logical " + std::to_string(f.logical) + "/5, factual " +
                  std::to_string(f.factual) + "/5, clarity " + std::to_string(f.clarity) +
                  "/5, concise " + std::to_string(f.concise) + "/5";
  if (!f.notes.empty()) s += "; " + f.notes;
  return s;
}

const StanceSummary& find_stance(std::span<const StanceSummary> stances, const std::string& s) {
  for (const auto& st : stances) {
    if (st.answer == s) return st;
  }
  throw InvariantError("stance '" + s + "' is not among the current stances");
}

void rank_clusters(std::vector<StanceSummary>& clusters) {
  std::stable_sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.answer < b.answer;
  });
}

// Groups answers: each joins the first existing class whose canonical answer
// the judge accepts, or opens a new one.
std::vector<StanceSummary> group(std::span<const Vote> votes, const Judge& judge,
                                 const Query& query, std::span<const std::string> seeds) {
  std::vector<StanceSummary> classes;
  for (const auto& s : seeds) {
    bool dup = false;
    for (const auto& c : classes) dup = dup || c.answer == s;
    if (!dup) classes.push_back({s, {}, 0, 0.0});
  }
  for (std::size_t i = 0; i < votes.size(); ++i) {
    StanceSummary* home = nullptr;
    for (std::size_t k = 0; k < classes.size() && !home; ++k) {
      try {
        if (judge.equivalent(query, votes[i].answer, classes[k].answer)) home = &classes[k];
      } catch (const TransportError& e) {
        throw TransportError(e.agent(), "judge failed comparing answer " + std::to_string(i) +
                                            " with stance '" + classes[k].answer + "': " +
                                            e.what());
      } catch (const std::exception& e) {
        throw InvariantError("judge failed comparing answer " + std::to_string(i) +
                             " with stance '" + classes[k].answer + "': " + e.what());
      }
    }
    if (!home) {
      classes.push_back({votes[i].answer, {}, 0, 0.0});
      home = &classes.back();
    }
    home->member_ids.push_back(i);
    home->frequency += 1;
    home->mean_confidence += votes[i].confidence;
  }
  std::erase_if(classes, [](const auto& c) { return c.frequency == 0; });
  for (auto& c : classes) c.mean_confidence /= c.frequency;
  return classes;
}

}  // namespace

// ---------------------------------------------------------------------------
// Judges and verifiers

std::string judge_normalize(std::string_view answer) {
  auto s = normalize_answer(answer);
  for (std::string_view article : {"a ", "an ", "the "}) {
    if (s.size() > article.size() && s.compare(0, article.size(), article) == 0) {
      s = normalize_answer(s.substr(article.size()));
      break;
    }
  }
  return s;
}

bool NormalizingJudge::equivalent(const Query&, std::string_view a, std::string_view b) const {
  return judge_normalize(a) == judge_normalize(b);
}

bool AgentJudge::equivalent(const Query& query, std::string_view a, std::string_view b) const {
  if (judge_normalize(a) == judge_normalize(b)) return true;
  const auto prompt = render_prompt(PromptKind::kEquivalence, Strategy::kGeneralist, query,
                                    {{"ANSWER_A", std::string(a)}, {"ANSWER_B", std::string(b)}});
  auto text = agent_->complete(query, prompt).raw_text;
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const auto pos = text.find("equivalent:");
  const auto tail = pos == std::string::npos ? text : text.substr(pos + 11);
  return normalize_answer(tail).rfind("yes", 0) == 0;
}

FactCheck AgentVerifier::verify(const Query& query, const Argument& argument) const {
  const auto prompt = render_prompt(PromptKind::kVerification, Strategy::kGeneralist, query,
                                    {{"ARGUMENT", argument.text}});
  const auto fb = parse_feedback(agent_->complete(query, prompt).raw_text);
  return {fb.factual, fb.notes.empty() ? "verified" : fb.notes};
}

// ---------------------------------------------------------------------------
// Stage 1

json to_json(const StanceSummary& s) {
  return json{{"answer", s.answer},
              {"member_ids", s.member_ids},
              {"frequency", s.frequency},
              {"mean_confidence", s.mean_confidence}};
}

std::vector<StanceSummary> cluster_stances(std::span<const Vote> votes, const Judge& judge,
                                           const Query& query) {
  if (votes.empty()) throw EmptyInputError("no responses to cluster");
  auto classes = group(votes, judge, query, {});
  rank_clusters(classes);
  return classes;
}

std::vector<StanceSummary> cluster_stances(std::span<const AgentResponse> responses,
                                           const Judge& judge, const Query& query,
                                           ConfidenceSource source) {
  std::vector<Vote> votes;
  votes.reserve(responses.size());
  for (const auto& r : responses) votes.push_back({r.parsed_answer, r.confidence(source)});
  return cluster_stances(votes, judge, query);
}

// ---------------------------------------------------------------------------
// Stage 2

std::size_t sample_stance(std::span<const StanceSummary> summaries, Rng& rng) {
  if (summaries.empty()) throw EmptyInputError("no stances to sample from");
  int total = 0;
  for (const auto& s : summaries) total += s.frequency;
  if (total < 1) throw InputError("stance frequencies sum to zero");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < summaries.size(); ++k) {
    acc += summaries[k].frequency;
    if (u < acc) return k;
  }
  return summaries.size() - 1;
}

std::vector<std::string> assign_stances(std::span<const StanceSummary> summaries, int count,
                                        const Rng& stream_root) {
  if (count < 1) throw InputError("need at least one generalist");
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    Rng rng = stream_root.child(static_cast<std::uint64_t>(j));
    out.push_back(summaries[sample_stance(summaries, rng)].answer);
  }
  return out;
}

std::vector<Argument> generate_arguments(const Agent& agent, int agent_id,
                                         const std::string& stance, const Query& query) {
  Argument a;
  a.stance = stance;
  a.side = Side::kFor;
  a.text = agent.argue(query, stance);
  a.author = agent.name();
  a.author_id = agent_id;
  return {a};
}

Feedback rate_argument(const Agent& agent, const Argument& argument, const Query& query,
                       const Verifier& verifier) {
  if (argument.text.empty()) throw InputError("cannot rate an empty argument");
  auto fb = agent.rate(query, argument);
  const auto check = verifier.verify(query, argument);
  if (check.rating < kMinRating || check.rating > kMaxRating) fb.clamped = true;
  fb.factual = std::clamp(check.rating, kMinRating, kMaxRating);
  fb.notes = fb.notes.empty() ? check.note : fb.notes + "; factuality: " + check.note;
  return fb;
}

json to_json(const DebatePair& p) {
  return json{{"supporting", to_json(p.supporting)},
              {"opposing", p.opposing ? to_json(*p.opposing) : json(nullptr)},
              {"n_for", p.n_for},
              {"n_against", p.n_against}};
}

DebatePair build_debate_pair(const std::string& assigned_stance,
                             std::span<const Argument> all_arguments, int n_for, int n_total,
                             Rng& rng) {
  std::vector<const Argument*> pool;
  std::vector<const Argument*> others;
  for (const auto& a : all_arguments) (a.stance == assigned_stance ? pool : others).push_back(&a);
  if (pool.empty()) {
    throw InputError("no supporting argument for stance '" + assigned_stance + "'");
  }
  DebatePair pair;
  pair.supporting = *pool[rng.index(pool.size())];
  if (!others.empty()) {
    Argument opp = *others[rng.index(others.size())];
    opp.side = Side::kAgainst;
    pair.opposing = std::move(opp);
  }
  pair.n_for = n_for;
  pair.n_against = n_total - n_for;
  return pair;
}

json to_json(const RefinedOutput& r) {
  return json{{"agent_id", r.agent_id},
              {"answer", r.answer},
              {"confidence", r.confidence},
              {"rationale", r.rationale},
              {"fallback", r.fallback ? json(*r.fallback) : json(nullptr)}};
}

PromptVars final_confidence_vars(const Query& query, const std::string& stance,
                                 double mean_conf, const DebatePair& pair) {
  PromptVars v;
  v["QUERY"] = query_text(query);
  v["STANCE"] = stance;
  v["ORIGINAL-CONFIDENCE"] = fixed2(mean_conf);
  v["ARGUMENT_FOR"] = pair.supporting.text;
  v["FEEDBACK-SUPPORTING"] = feedback_text(pair.supporting.feedback);
  v["NUMBER-SUPPORTING"] = std::to_string(pair.n_for);
  v["ARGUMENT-AGAINST"] = pair.opposing ? pair.opposing->text : "(no opposing argument was raised)";
  v["FEEDBACK-AGAINST"] = pair.opposing ? feedback_text(pair.opposing->feedback) : "none";
  v["NUMBER_AGAINST"] = std::to_string(pair.n_against);
  return v;
}

RefinedOutput refine(const Agent& agent, int agent_id, const Query& query,
                     const std::string& stance, double mean_conf, const DebatePair& pair,
                     const DebateConfig& config) {
  RefineRequest req;
  req.stance = stance;
  req.original_confidence = mean_conf;
  req.n_for = pair.n_for;
  req.n_against = pair.n_against;
  req.supporting = pair.supporting;
  req.opposing = pair.opposing;
  req.vars = final_confidence_vars(query, stance, mean_conf, pair);

  const auto completion = agent.refine(query, req);
  const auto parsed = parse_answer_and_confidence(completion.raw_text);

  RefinedOutput out;
  out.agent_id = agent_id;
  out.rationale = completion.rationale;
  if (!parsed.answer) {
    out.answer = stance;
    out.confidence = mean_conf;
    out.fallback = "unparseable answer; kept the assigned stance and its stage-1 confidence";
    return out;
  }
  out.answer = *parsed.answer;

  std::optional<double> sequence;
  if (completion.token_probs && !completion.token_probs->empty()) {
    sequence = sequence_confidence(*completion.token_probs);
  }
  std::optional<double> conf = sequence;
  if (config.confidence_source == ConfidenceSource::kVerbalizedFirst && parsed.confidence) {
    conf = parsed.confidence;
  }
  if (conf) {
    out.confidence = std::clamp(*conf, 0.0, 1.0);
  } else {
    out.confidence = mean_conf;
    out.fallback = "no usable confidence; kept the stage-1 confidence";
  }
  return out;
}

Aggregate aggregate(std::span<const RefinedOutput> refined, const Judge& judge,
                    const Query& query, std::span<const std::string> known_stances) {
  if (refined.empty()) throw EmptyInputError("no refined outputs to aggregate");
  std::vector<Vote> votes;
  votes.reserve(refined.size());
  for (const auto& r : refined) votes.push_back({r.answer, r.confidence});
  auto clusters = group(votes, judge, query, known_stances);
  std::stable_sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    if (a.mean_confidence != b.mean_confidence) return a.mean_confidence > b.mean_confidence;
    return a.answer < b.answer;
  });
  Aggregate agg;
  agg.final_answer = clusters.front().answer;
  agg.final_confidence = clusters.front().mean_confidence;
  agg.clusters = std::move(clusters);
  return agg;
}

// ---------------------------------------------------------------------------
// Orchestration

void Transcript::add(std::string stage, std::string kind, std::string agent, json data) {
  events_.push_back(json{{"seq", events_.size()},
                         {"stage", std::move(stage)},
                         {"kind", std::move(kind)},
                         {"agent", std::move(agent)},
                         {"data", std::move(data)}});
}

json DebateResult::to_json() const {
  json stances = json::array();
  for (const auto& s : stage1) stances.push_back(confcal::to_json(s));
  json outs = json::array();
  for (const auto& r : refined) outs.push_back(confcal::to_json(r));
  return json{{"query_id", query_id},
              {"final_answer", final_answer},
              {"final_confidence", final_confidence},
              {"stage1", stances},
              {"refined", outs},
              {"stage2_skipped", stage2_skipped},
              {"transcript", transcript.events()}};
}

DebateResult run_debate(const Query& query, const DebateParticipants& participants,
                        const DebateConfig& config) {
  if (participants.specialists.empty()) throw InputError("debate needs at least one specialist");
  if (participants.generalists.empty()) throw InputError("debate needs at least one generalist");
  if (config.num_generalists < 1) throw InputError("num_generalists must be >= 1");
  if (config.rounds < 1) throw InputError("rounds must be >= 1");

  const auto& judge = *participants.judge;
  const auto& verifier = *participants.verifier;
  const auto m = static_cast<std::size_t>(config.num_generalists);
  auto generalist = [&](std::size_t j) -> const Agent& {
    return *participants.generalists[j % participants.generalists.size()];
  };
  const Rng root(config.seed);

  DebateResult result;
  result.query_id = query.id;
  auto& log = result.transcript;

  try {
    // Stage 1: independent answers, merged into stances.
    const auto responses = map_indices(participants.specialists.size(), config.parallel,
                                       [&](std::size_t i) {
                                         return participants.specialists[i]->respond(query);
                                       });
    for (std::size_t i = 0; i < responses.size(); ++i) {
      auto data = to_json(responses[i]);
      data["index"] = i;
      data["confidence"] = responses[i].confidence(config.confidence_source);
      log.add("stage1", "respond", participants.specialists[i]->name(), std::move(data));
    }
    result.stage1 = cluster_stances(responses, judge, query, config.confidence_source);
    json stances = json::array();
    for (const auto& s : result.stage1) stances.push_back(to_json(s));
    log.add("stage1", "cluster", "", {{"stances", stances}});

    if (result.stage1.size() == 1 && config.skip_unanimous) {
      result.final_answer = result.stage1.front().answer;
      result.final_confidence = result.stage1.front().mean_confidence;
      result.stage2_skipped = true;
      log.add("stage2", "skipped", "", {{"reason", "single stance after stage 1"}});
      log.add("aggregate", "final", "",
              {{"answer", result.final_answer}, {"confidence", result.final_confidence}});
      return result;
    }

    std::vector<std::string> known;
    for (const auto& s : result.stage1) known.push_back(s.answer);

    std::vector<StanceSummary> current = result.stage1;
    int n_total = static_cast<int>(participants.specialists.size());
    std::vector<std::string> stance(m);

    for (int round = 1; round <= config.rounds; ++round) {
      const std::string stage = "stage2.round" + std::to_string(round);
      if (round == 1) {
        const Rng assign_root = root.child("assign");
        for (std::size_t j = 0; j < m; ++j) {
          Rng rng = assign_root.child(j);
          const double draw = Rng(rng).uniform();
          stance[j] = current[sample_stance(current, rng)].answer;
          log.add(stage, "assign", generalist(j).name(),
                  {{"slot", j}, {"draw", draw}, {"stance", stance[j]}});
        }
      } else {
        const auto prev = aggregate(result.refined, judge, query, known);
        current = prev.clusters;
        n_total = static_cast<int>(m);
        for (const auto& c : current) {
          for (std::size_t idx : c.member_ids) stance[idx] = c.answer;
          known.push_back(c.answer);
        }
        for (std::size_t j = 0; j < m; ++j) {
          log.add(stage, "carry", generalist(j).name(), {{"slot", j}, {"stance", stance[j]}});
        }
      }

      const auto per_agent = map_indices(m, config.parallel, [&](std::size_t j) {
        return generate_arguments(generalist(j), static_cast<int>(j), stance[j], query);
      });
      std::vector<Argument> arguments;
      for (const auto& list : per_agent) {
        for (const auto& a : list) {
          log.add(stage, "argue", a.author,
                  {{"slot", a.author_id}, {"stance", a.stance}, {"text", a.text}});
          arguments.push_back(a);
        }
      }

      const auto ratings = map_indices(arguments.size(), config.parallel, [&](std::size_t i) {
        const auto rater = (static_cast<std::size_t>(arguments[i].author_id) + 1) % m;
        return rate_argument(generalist(rater), arguments[i], query, verifier);
      });
      for (std::size_t i = 0; i < arguments.size(); ++i) {
        arguments[i].feedback = ratings[i];
        const auto rater = (static_cast<std::size_t>(arguments[i].author_id) + 1) % m;
        log.add(stage, "rate", generalist(rater).name(),
                {{"argument", i}, {"feedback", to_json(ratings[i])}});
        if (ratings[i].clamped) {
          log.add(stage, "rating_clamped", generalist(rater).name(), {{"argument", i}});
        }
      }

      std::vector<DebatePair> pairs;
      const Rng pair_root = root.child("pair", static_cast<std::uint64_t>(round));
      for (std::size_t j = 0; j < m; ++j) {
        Rng rng = pair_root.child(j);
        const auto& st = find_stance(current, stance[j]);
        pairs.push_back(build_debate_pair(stance[j], arguments, st.frequency, n_total, rng));
        log.add(stage, "pair", generalist(j).name(), to_json(pairs.back()));
      }

      result.refined = map_indices(m, config.parallel, [&](std::size_t j) {
        const auto& st = find_stance(current, stance[j]);
        return refine(generalist(j), static_cast<int>(j), query, stance[j], st.mean_confidence,
                      pairs[j], config);
      });
      for (std::size_t j = 0; j < m; ++j) {
        log.add(stage, "refine", generalist(j).name(), to_json(result.refined[j]));
        if (result.refined[j].fallback) {
          log.add(stage, "fallback", generalist(j).name(),
                  {{"slot", j}, {"reason", *result.refined[j].fallback}});
        }
      }
    }

    const auto agg = aggregate(result.refined, judge, query, known);
    result.final_answer = agg.final_answer;
    result.final_confidence = agg.final_confidence;
    json clusters = json::array();
    for (const auto& c : agg.clusters) clusters.push_back(to_json(c));
    log.add("aggregate", "final", "",
            {{"answer", result.final_answer},
             {"confidence", result.final_confidence},
             {"clusters", clusters}});
  } catch (const Error& e) {
    throw DebateError(e.what(), e.exit_code(), log);
  } catch (const std::exception& e) {
    throw DebateError(e.what(), ExitCode::kInvariantViolation, log);
  }
  return result;
}

}  // namespace confcal
