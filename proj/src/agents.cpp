#include "confcal/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "confcal/error.hpp"
#include "confcal/metrics.hpp"
#include "confcal/report_io.hpp"
#include "confcal/rng.hpp"

namespace confcal {
namespace {

using nlohmann::json;

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string lower_copy(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<std::vector<double>> read_token_probs(const json& row) {
  if (!row.contains("token_probs") || row.at("token_probs").is_null()) return std::nullopt;
  return row.at("token_probs").get<std::vector<double>>();
}

int read_rating(const json& row, const char* key, bool& clamped) {
  if (!row.contains(key)) return 3;
  const long v = row.at(key).get<long>();
  if (v < kMinRating || v > kMaxRating) clamped = true;
  return static_cast<int>(std::clamp<long>(v, kMinRating, kMaxRating));
}

}  // namespace

// ---------------------------------------------------------------------------
// Enums and JSON

Strategy parse_strategy(std::string_view s) {
  const auto v = lower_copy(s);
  if (v == "cot" || v == "chain_of_thought") return Strategy::kChainOfThought;
  if (v == "selfask" || v == "self_ask") return Strategy::kSelfAsk;
  if (v == "searchstyle" || v == "search" || v == "search_style") return Strategy::kSearchStyle;
  if (v == "genread") return Strategy::kGenRead;
  if (v == "generalist") return Strategy::kGeneralist;
  throw InputError("unknown strategy '" + std::string(s) + "'");
}

Backend parse_backend(std::string_view s) {
  const auto v = lower_copy(s);
  if (v == "scripted") return Backend::kScripted;
  if (v == "simulated") return Backend::kSimulated;
  if (v == "http") return Backend::kHttp;
  throw InputError("unknown backend '" + std::string(s) + "'");
}

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::kChainOfThought:
      return "CoT";
    case Strategy::kSelfAsk:
      return "SelfAsk";
    case Strategy::kSearchStyle:
      return "SearchStyle";
    case Strategy::kGenRead:
      return "GenRead";
    case Strategy::kGeneralist:
      return "Generalist";
  }
  return "?";
}

const char* to_string(Backend b) noexcept {
  switch (b) {
    case Backend::kScripted:
      return "scripted";
    case Backend::kSimulated:
      return "simulated";
    case Backend::kHttp:
      return "http";
  }
  return "?";
}

ConfidenceSource parse_confidence_source(std::string_view s) {
  if (s == "verbalized_first") return ConfidenceSource::kVerbalizedFirst;
  if (s == "sequence_only") return ConfidenceSource::kSequenceOnly;
  throw InputError("unknown confidence source '" + std::string(s) + "'");
}

const char* to_string(ConfidenceSource s) noexcept {
  return s == ConfidenceSource::kVerbalizedFirst ? "verbalized_first" : "sequence_only";
}

Query query_from_json(const json& j) {
  if (!j.is_object()) throw InputError("query must be a JSON object");
  Query q;
  if (!j.contains("id")) throw InputError("query missing 'id'");
  q.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  q.question = j.value("question", std::string{});
  if (q.question.empty()) throw InputError("query '" + q.id + "' has an empty question");
  if (j.contains("options") && !j.at("options").is_null()) {
    q.options = j.at("options").get<std::vector<std::string>>();
    std::vector<std::string> norm;
    for (const auto& o : q.options) norm.push_back(normalize_answer(o));
    std::sort(norm.begin(), norm.end());
    if (std::adjacent_find(norm.begin(), norm.end()) != norm.end()) {
      throw InputError("query '" + q.id + "' has duplicate options");
    }
  }
  if (j.contains("image_ref") && j.at("image_ref").is_string()) {
    q.image_ref = j.at("image_ref").get<std::string>();
  }
  if (j.contains("true_answer") && j.at("true_answer").is_string()) {
    q.true_answer = j.at("true_answer").get<std::string>();
  }
  return q;
}

json to_json(const Query& q) {
  json j{{"id", q.id}, {"question", q.question}, {"options", q.options}};
  if (q.image_ref) j["image_ref"] = *q.image_ref;
  if (q.true_answer) j["true_answer"] = *q.true_answer;
  return j;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<Query> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(query_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string AgentSpec::param(const std::string& key, const std::string& fallback) const {
  const auto it = backend_params.find(key);
  return it == backend_params.end() ? fallback : it->second;
}

double AgentSpec::param(const std::string& key, double fallback) const {
  const auto it = backend_params.find(key);
  if (it == backend_params.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw InputError("agent '" + name + "': parameter '" + key + "' is not a number");
  }
}

AgentSpec agent_spec_from_json(const json& j, Strategy default_strategy) {
  if (!j.is_object()) throw InputError("agent entry must be a JSON object");
  AgentSpec spec;
  spec.name = j.value("name", std::string{});
  if (spec.name.empty()) throw InputError("agent entry without a name");
  spec.backend = parse_backend(j.value("backend", std::string("simulated")));
  spec.strategy = j.contains("strategy") ? parse_strategy(j.at("strategy").get<std::string>())
                                         : default_strategy;
  spec.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("params")) {
    for (const auto& [k, v] : j.at("params").items()) {
      spec.backend_params[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return spec;
}

json to_json(const AgentSpec& spec) {
  return json{{"name", spec.name},
              {"backend", to_string(spec.backend)},
              {"strategy", to_string(spec.strategy)},
              {"seed", spec.seed},
              {"params", spec.backend_params}};
}

double AgentResponse::confidence(ConfidenceSource source) const {
  if (source == ConfidenceSource::kVerbalizedFirst && verbalized_confidence) {
    return *verbalized_confidence;
  }
  return sequence_confidence;
}

json to_json(const AgentResponse& r) {
  json j{{"raw_text", r.raw_text},
         {"parsed_answer", r.parsed_answer},
         {"sequence_confidence", r.sequence_confidence}};
  j["token_probs"] = r.token_probs ? json(*r.token_probs) : json(nullptr);
  j["verbalized_confidence"] =
      r.verbalized_confidence ? json(*r.verbalized_confidence) : json(nullptr);
  return j;
}

json to_json(const Feedback& f) {
  return json{{"logical", f.logical}, {"factual", f.factual}, {"clarity", f.clarity},
              {"concise", f.concise}, {"notes", f.notes},     {"clamped", f.clamped}};
}

json to_json(const Argument& a) {
  return json{{"stance", a.stance},
              {"side", a.side == Side::kFor ? "for" : "against"},
              {"text", a.text},
              {"author", a.author},
              {"author_id", a.author_id},
              {"feedback", to_json(a.feedback)}};
}

SimProfile SimProfile::from_params(const AgentSpec& spec) {
  SimProfile p;
  p.accuracy = spec.param("accuracy", p.accuracy);
  p.correct_mean = spec.param("correct_mean", p.correct_mean);
  p.correct_spread = spec.param("correct_spread", p.correct_spread);
  p.wrong_mean = spec.param("wrong_mean", p.wrong_mean);
  p.wrong_spread = spec.param("wrong_spread", p.wrong_spread);
  if (!(p.accuracy >= 0.0 && p.accuracy <= 1.0)) {
    throw InputError("agent '" + spec.name + "': accuracy must lie in [0,1]");
  }
  if (p.correct_spread < 0.0 || p.wrong_spread < 0.0) {
    throw InputError("agent '" + spec.name + "': spreads must be non-negative");
  }
  return p;
}

double sequence_confidence(std::span<const double> token_probs) {
  if (token_probs.empty()) throw InputError("sequence confidence of an empty token list");
  double log_sum = 0.0;
  for (double p : token_probs) {
    if (!(p > 0.0 && p <= 1.0)) throw InputError("token probability outside (0,1]");
    log_sum += std::log(p);
  }
  return std::exp(log_sum / static_cast<double>(token_probs.size()));
}

// ---------------------------------------------------------------------------
// Fixtures and scripted agents

FixtureTable FixtureTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open fixtures " + path.string());
  return parse(in);
}

FixtureTable FixtureTable::parse(std::istream& in) {
  FixtureTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      table.add(json::parse(line));
    } catch (const json::exception& e) {
      throw InputError("fixtures line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("fixtures line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return table;
}

void FixtureTable::add(const json& row) {
  if (!row.is_object() || !row.contains("query_id") || !row.contains("agent")) {
    throw InputError("fixture rows need 'query_id' and 'agent'");
  }
  const auto kind = row.value("kind", std::string("answer"));
  if (kind == "answer") {
    if (!row.contains("answer")) throw InputError("answer fixture without 'answer'");
    if (!row.contains("token_probs") && !row.contains("confidence")) {
      throw InputError("answer fixture needs 'token_probs' or 'confidence'");
    }
  }
  rows_[{row.at("query_id").get<std::string>(), row.at("agent").get<std::string>(), kind}] =
      row;
}

const json* FixtureTable::find(std::string_view query_id, std::string_view agent,
                               std::string_view kind) const {
  for (std::string_view q : {query_id, std::string_view("*")}) {
    const auto it = rows_.find({std::string(q), std::string(agent), std::string(kind)});
    if (it != rows_.end()) return &it->second;
  }
  return nullptr;
}

ScriptedAgent::ScriptedAgent(AgentSpec spec, std::shared_ptr<const FixtureTable> fixtures)
    : Agent(std::move(spec)), fixtures_(std::move(fixtures)) {
  if (!fixtures_) {
    throw InputError("scripted agent '" + name() + "' needs a fixture table");
  }
}

const json& ScriptedAgent::lookup(const Query& query, std::string_view kind) const {
  const auto* row = fixtures_->find(query.id, name(), kind);
  if (!row) {
    throw FixtureGapError("no '" + std::string(kind) + "' fixture for query '" + query.id +
                          "' and agent '" + name() + "'");
  }
  return *row;
}

AgentResponse ScriptedAgent::respond(const Query& query) const {
  const auto& row = lookup(query, "answer");
  AgentResponse r;
  r.parsed_answer = row.at("answer").get<std::string>();
  r.token_probs = read_token_probs(row);
  if (row.contains("confidence")) {
    r.verbalized_confidence = std::clamp(row.at("confidence").get<double>(), 0.0, 1.0);
  }
  r.sequence_confidence =
      r.token_probs ? sequence_confidence(*r.token_probs) : *r.verbalized_confidence;
  r.raw_text = row.value("raw_text", r.verbalized_confidence
                                         ? format_completion(r.parsed_answer,
                                                             *r.verbalized_confidence)
                                         : "Answer: " + r.parsed_answer);
  return r;
}

std::string ScriptedAgent::argue(const Query& query, const std::string&) const {
  return lookup(query, "argument").at("text").get<std::string>();
}

Feedback ScriptedAgent::rate(const Query& query, const Argument&) const {
  const auto& row = lookup(query, "rating");
  if (row.contains("text")) return parse_feedback(row.at("text").get<std::string>());
  Feedback fb;
  fb.logical = read_rating(row, "logical", fb.clamped);
  fb.factual = read_rating(row, "factual", fb.clamped);
  fb.clarity = read_rating(row, "clarity", fb.clamped);
  fb.concise = read_rating(row, "concise", fb.clamped);
  fb.notes = row.value("notes", std::string{});
  return fb;
}

Completion ScriptedAgent::refine(const Query& query, const RefineRequest&) const {
  const auto& row = lookup(query, "refine");
  Completion c;
  c.token_probs = read_token_probs(row);
  c.rationale = row.value("rationale", std::string{});
  if (row.contains("raw_text")) {
    c.raw_text = row.at("raw_text").get<std::string>();
  } else if (row.contains("answer") && row.contains("confidence")) {
    c.raw_text = format_completion(row.at("answer").get<std::string>(),
                                   row.at("confidence").get<double>());
  } else if (row.contains("answer")) {
    c.raw_text = "Answer: " + row.at("answer").get<std::string>();
  }
  return c;
}

Completion ScriptedAgent::complete(const Query& query, const std::string&) const {
  Completion c;
  c.raw_text = lookup(query, "completion").at("text").get<std::string>();
  return c;
}

// ---------------------------------------------------------------------------
// Simulated agents

SimulatedAgent::SimulatedAgent(AgentSpec spec)
    : Agent(std::move(spec)), profile_(SimProfile::from_params(this->spec())) {}

AgentResponse SimulatedAgent::respond(const Query& query) const {
  if (!query.true_answer) {
    throw InputError("simulated agent '" + name() + "' needs query '" + query.id +
                     "' to carry a true_answer");
  }
  Rng rng = Rng(spec().seed).child(query.id).child("respond");
  const bool correct = rng.bernoulli(profile_.accuracy);
  std::string answer = *query.true_answer;
  if (!correct) {
    std::vector<std::string> wrong;
    const auto truth = normalize_answer(*query.true_answer);
    for (const auto& o : query.options) {
      if (normalize_answer(o) != truth) wrong.push_back(o);
    }
    if (wrong.empty()) {
      const auto n = static_cast<std::size_t>(std::max(1.0, spec().param("num_distractors", 3.0)));
      answer = "distractor-" + std::to_string(rng.index(n) + 1);
    } else {
      answer = wrong[rng.index(wrong.size())];
    }
  }
  const double mean = correct ? profile_.correct_mean : profile_.wrong_mean;
  const double spread = correct ? profile_.correct_spread : profile_.wrong_spread;
  const double conf = std::clamp(rng.normal(mean, spread), 0.01, 1.0);

  AgentResponse r;
  r.parsed_answer = answer;
  r.sequence_confidence = conf;
  r.verbalized_confidence = conf;
  r.raw_text = format_completion(answer, conf);
  return r;
}

std::string SimulatedAgent::argue(const Query& query, const std::string& stance) const {
  return name() + " argues that \"" + stance + "\" answers \"" + query.question +
         "\" because it is the reading most consistent with the available evidence.";
}

Feedback SimulatedAgent::rate(const Query& query, const Argument& argument) const {
  Rng rng = Rng(spec().seed)
                .child(query.id)
                .child("rate")
                .child(hash_label(argument.author + "|" + argument.stance));
  const double good = spec().param("quality_correct", 3.8);
  const double bad = spec().param("quality_wrong", 2.6);
  const double spread = spec().param("quality_spread", 0.8);
  double mean = (good + bad) / 2.0;
  if (query.true_answer) {
    mean = normalize_answer(argument.stance) == normalize_answer(*query.true_answer) ? good : bad;
  }
  auto draw = [&] {
    return static_cast<int>(std::clamp(std::lround(rng.normal(mean, spread)),
                                       static_cast<long>(kMinRating),
                                       static_cast<long>(kMaxRating)));
  };
  Feedback fb;
  fb.logical = draw();
  fb.factual = draw();
  fb.clarity = draw();
  fb.concise = draw();
  fb.notes = "simulated review by " + name();
  return fb;
}

Completion SimulatedAgent::refine(const Query&, const RefineRequest& request) const {
  Completion c;
  const auto behavior = spec().param("behavior", std::string("deliberative"));
  if (behavior == "stubborn") {
    c.rationale = "keeps the assigned stance";
    c.raw_text = format_completion(request.stance, request.original_confidence) +
                 "\nRationale: " + c.rationale;
    return c;
  }
  if (behavior != "deliberative") {
    throw InputError("agent '" + name() + "': unknown behavior '" + behavior + "'");
  }
  // Log-odds pooling: each agreeing head adds the stance's log-odds, each
  // disagreeing head subtracts it, and the better-rated argument shifts the
  // balance by argument_weight per rating point.
  const double weight = spec().param("argument_weight", 1.0);
  const double prior = std::clamp(request.original_confidence, 0.01, 0.99);
  double evidence = static_cast<double>(request.n_for - request.n_against) * logit(prior);
  if (request.opposing) {
    evidence += weight * (request.supporting.feedback.mean() - request.opposing->feedback.mean());
  }
  std::string answer = request.stance;
  if (evidence < 0.0 && request.opposing) {
    answer = request.opposing->stance;
    evidence = -evidence;
  }
  const double conf = std::clamp(sigmoid(evidence), 0.01, 1.0);
  std::ostringstream why;
  why << request.n_for << " agree, " << request.n_against << " disagree; supporting argument "
      << request.supporting.feedback.mean() << "/5";
  if (request.opposing) why << ", opposing argument " << request.opposing->feedback.mean() << "/5";
  c.rationale = why.str();
  c.raw_text = format_completion(answer, conf) + "\nRationale: " + c.rationale;
  return c;
}

Completion SimulatedAgent::complete(const Query&, const std::string&) const {
  Completion c;
  c.raw_text = "Factual: 3  Notes: simulated verification";
  return c;
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec,
                                  std::shared_ptr<const FixtureTable> fixtures) {
  switch (spec.backend) {
    case Backend::kScripted:
      return std::make_unique<ScriptedAgent>(spec, std::move(fixtures));
    case Backend::kSimulated:
      return std::make_unique<SimulatedAgent>(spec);
    case Backend::kHttp:
      return std::make_unique<HttpAgent>(spec);
  }
  throw InvariantError("unknown backend");
}

}  // namespace confcal
