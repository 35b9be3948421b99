#pragma once

// Agents answer questions with a confidence, argue for a stance, rate
// arguments and refine their answer after a debate exchange. Three backends:
// scripted fixture tables, seeded simulation, and a chat-completions HTTP
// endpoint.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

namespace confcal {

struct Query {
  std::string id;
  std::string question;
  std::vector<std::string> options;
  std::optional<std::string> image_ref;  // file path or base64 payload
  std::optional<std::string> true_answer;
};

Query query_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Query& q);
std::vector<Query> load_queries(const std::filesystem::path& path);

enum class Strategy { kChainOfThought, kSelfAsk, kSearchStyle, kGenRead, kGeneralist };
enum class Backend { kScripted, kSimulated, kHttp };

Strategy parse_strategy(std::string_view s);
Backend parse_backend(std::string_view s);
const char* to_string(Strategy s) noexcept;
const char* to_string(Backend b) noexcept;

enum class ConfidenceSource { kVerbalizedFirst, kSequenceOnly };
ConfidenceSource parse_confidence_source(std::string_view s);
const char* to_string(ConfidenceSource s) noexcept;

using Params = std::map<std::string, std::string>;

struct AgentSpec {
  std::string name;
  Backend backend = Backend::kSimulated;
  Strategy strategy = Strategy::kChainOfThought;
  Params backend_params;
  std::uint64_t seed = 0;

  std::string param(const std::string& key, const std::string& fallback) const;
  double param(const std::string& key, double fallback) const;
};

AgentSpec agent_spec_from_json(const nlohmann::json& j, Strategy default_strategy);
nlohmann::json to_json(const AgentSpec& spec);

struct AgentResponse {
  std::string raw_text;
  std::string parsed_answer;
  std::optional<std::vector<double>> token_probs;
  double sequence_confidence = 1.0;  // geometric mean of token_probs when present
  std::optional<double> verbalized_confidence;

  double confidence(ConfidenceSource source) const;
};

nlohmann::json to_json(const AgentResponse& r);

// Confidence distributions used by simulated agents.
struct SimProfile {
  double accuracy = 0.7;
  double correct_mean = 0.7;
  double correct_spread = 0.1;
  double wrong_mean = 0.7;
  double wrong_spread = 0.1;

  static SimProfile from_params(const AgentSpec& spec);
};

// exp(mean log p_t). Throws InputError for an empty list or values outside (0,1].
double sequence_confidence(std::span<const double> token_probs);

// ---------------------------------------------------------------------------
// Prompts

enum class PromptKind {
  kStance,
  kArgument,
  kFinalConfidence,
  kRating,
  kVerification,
  kEquivalence,
};

using PromptVars = std::map<std::string, std::string>;

std::string_view prompt_template(PromptKind kind);
std::string_view strategy_preamble(Strategy strategy);

// Replaces every {NAME} placeholder (upper case, digits, '_' and '-').
// Throws InputError listing all names missing from `vars`.
std::string substitute(std::string_view text, const PromptVars& vars);

// QUERY defaults to the question (with options appended); entries in `vars`
// take precedence.
std::string render_prompt(PromptKind kind, Strategy strategy, const Query& query,
                          const PromptVars& vars = {});

std::string query_text(const Query& query);

struct ParsedCompletion {
  std::optional<std::string> answer;
  std::optional<double> confidence;  // clamped to [0,1]
};

// Text after "Answer:" up to "Confidence:" or end of line; first real after
// "Confidence:". Missing markers give absent fields.
ParsedCompletion parse_answer_and_confidence(std::string_view raw_text);

// The completion format requested by the stance template.
std::string format_completion(std::string_view answer, double confidence);

// ---------------------------------------------------------------------------
// Debate exchange types produced by agents

struct Feedback {
  int logical = 3;
  int factual = 3;
  int clarity = 3;
  int concise = 3;
  std::string notes;
  bool clamped = false;  // a backend rating fell outside 1..5

  double mean() const { return (logical + factual + clarity + concise) / 4.0; }
};

enum class Side { kFor, kAgainst };

struct Argument {
  std::string stance;
  Side side = Side::kFor;
  std::string text;
  std::string author;
  int author_id = -1;
  Feedback feedback;
};

nlohmann::json to_json(const Feedback& f);
nlohmann::json to_json(const Argument& a);

inline constexpr int kMinRating = 1;
inline constexpr int kMaxRating = 5;

// Parses "Logical: n  Factual: n  Clarity: n  Concise: n  Notes: ..." with
// missing ratings defaulting to 3; out-of-range values are clamped and flagged.
Feedback parse_feedback(std::string_view text);

struct RefineRequest {
  std::string stance;
  double original_confidence = 0.0;
  int n_for = 0;
  int n_against = 0;
  Argument supporting;
  std::optional<Argument> opposing;
  // Every final-confidence placeholder except CONFIDENCE-RATIONALE.
  PromptVars vars;
};

struct Completion {
  std::string raw_text;
  std::optional<std::vector<double>> token_probs;
  std::string rationale;
};

// ---------------------------------------------------------------------------
// Agents

class Agent {
 public:
  explicit Agent(AgentSpec spec) : spec_(std::move(spec)) {}
  virtual ~Agent() = default;
  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  const AgentSpec& spec() const noexcept { return spec_; }
  const std::string& name() const noexcept { return spec_.name; }

  // Stage-1 answer with confidence.
  virtual AgentResponse respond(const Query& query) const = 0;
  // A short argument that `stance` answers the query.
  virtual std::string argue(const Query& query, const std::string& stance) const = 0;
  // Logical, clarity and conciseness ratings (factuality comes from a verifier).
  virtual Feedback rate(const Query& query, const Argument& argument) const = 0;
  // Completion for the final-confidence elicitation.
  virtual Completion refine(const Query& query, const RefineRequest& request) const = 0;
  // Free-form completion used by agent-backed judges and verifiers.
  virtual Completion complete(const Query& query, const std::string& prompt) const = 0;

 private:
  AgentSpec spec_;
};

// Fixture rows keyed by (query_id, agent, kind); query_id "*" matches any query.
class FixtureTable {
 public:
  static FixtureTable load(const std::filesystem::path& path);
  static FixtureTable parse(std::istream& in);

  void add(const nlohmann::json& row);
  const nlohmann::json* find(std::string_view query_id, std::string_view agent,
                             std::string_view kind) const;
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::map<std::tuple<std::string, std::string, std::string>, nlohmann::json> rows_;
};

class ScriptedAgent final : public Agent {
 public:
  ScriptedAgent(AgentSpec spec, std::shared_ptr<const FixtureTable> fixtures);

  AgentResponse respond(const Query& query) const override;
  std::string argue(const Query& query, const std::string& stance) const override;
  Feedback rate(const Query& query, const Argument& argument) const override;
  Completion refine(const Query& query, const RefineRequest& request) const override;
  Completion complete(const Query& query, const std::string& prompt) const override;

 private:
  const nlohmann::json& lookup(const Query& query, std::string_view kind) const;

  std::shared_ptr<const FixtureTable> fixtures_;
};

// Seeded simulation. Every call draws from a stream derived from
// (seed, query id, call kind), so results do not depend on call order.
//
// Parameters: accuracy, correct_mean, correct_spread, wrong_mean,
// wrong_spread, num_distractors, behavior (deliberative | stubborn),
// argument_weight, quality_correct, quality_wrong, quality_spread.
class SimulatedAgent final : public Agent {
 public:
  explicit SimulatedAgent(AgentSpec spec);

  AgentResponse respond(const Query& query) const override;
  std::string argue(const Query& query, const std::string& stance) const override;
  Feedback rate(const Query& query, const Argument& argument) const override;
  Completion refine(const Query& query, const RefineRequest& request) const override;
  Completion complete(const Query& query, const std::string& prompt) const override;

  const SimProfile& profile() const noexcept { return profile_; }

 private:
  SimProfile profile_;
};

// POSTs chat-completions requests. Parameters: url (endpoint), model,
// temperature, api_key_env, timeout_s, retries, backoff_ms, logprobs.
class HttpAgent final : public Agent {
 public:
  explicit HttpAgent(AgentSpec spec);

  AgentResponse respond(const Query& query) const override;
  std::string argue(const Query& query, const std::string& stance) const override;
  Feedback rate(const Query& query, const Argument& argument) const override;
  Completion refine(const Query& query, const RefineRequest& request) const override;
  Completion complete(const Query& query, const std::string& prompt) const override;

  nlohmann::json build_request(const Query& query, const std::string& prompt) const;

 private:
  Completion post(const Query& query, const std::string& prompt) const;

  mutable std::mutex mutex_;
  mutable std::optional<bool> expects_logprobs_;
};

// Parses a chat-completions response body into text and token probabilities.
Completion parse_chat_completion(const nlohmann::json& body);

std::unique_ptr<Agent> make_agent(const AgentSpec& spec,
                                  std::shared_ptr<const FixtureTable> fixtures = nullptr);

}  // namespace confcal
