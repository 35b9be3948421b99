#pragma once

// Two-stage debate: specialists answer independently and their answers are
// merged into stances; generalists are assigned stances in proportion to
// their support, exchange rated arguments, refine their answers, and the
// refined answers are aggregated by majority vote.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "confcal/agents.hpp"
#include "confcal/error.hpp"
#include "confcal/rng.hpp"

namespace confcal {

// Decides whether two answer strings denote the same stance.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual bool equivalent(const Query& query, std::string_view a, std::string_view b) const = 0;
};

// normalize_answer plus removal of a leading article, then exact match.
std::string judge_normalize(std::string_view answer);

class NormalizingJudge final : public Judge {
 public:
  bool equivalent(const Query& query, std::string_view a, std::string_view b) const override;
};

// Asks an agent; normalizer-equal answers short-circuit without a call.
class AgentJudge final : public Judge {
 public:
  explicit AgentJudge(std::shared_ptr<const Agent> agent) : agent_(std::move(agent)) {}
  bool equivalent(const Query& query, std::string_view a, std::string_view b) const override;

 private:
  std::shared_ptr<const Agent> agent_;
};

struct FactCheck {
  int rating = 3;
  std::string note;
};

// Factuality check of an argument.
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual FactCheck verify(const Query& query, const Argument& argument) const = 0;
};

class StubVerifier final : public Verifier {
 public:
  FactCheck verify(const Query&, const Argument&) const override { return {3, "unverified"}; }
};

// Premise listing and checking in a second agent call.
class AgentVerifier final : public Verifier {
 public:
  explicit AgentVerifier(std::shared_ptr<const Agent> agent) : agent_(std::move(agent)) {}
  FactCheck verify(const Query& query, const Argument& argument) const override;

 private:
  std::shared_ptr<const Agent> agent_;
};

struct Vote {
  std::string answer;
  double confidence = 0.0;
};

struct StanceSummary {
  std::string answer;                 // canonical form: first member's answer
  std::vector<std::size_t> member_ids;
  int frequency = 0;
  double mean_confidence = 0.0;
};

nlohmann::json to_json(const StanceSummary& s);

// Partition votes into judge-equivalence classes, sorted by frequency
// descending then canonical answer ascending.
std::vector<StanceSummary> cluster_stances(std::span<const Vote> votes, const Judge& judge,
                                           const Query& query);
std::vector<StanceSummary> cluster_stances(std::span<const AgentResponse> responses,
                                           const Judge& judge, const Query& query,
                                           ConfidenceSource source);

// One draw with Pr(s_k) = f_k / sum f.
std::size_t sample_stance(std::span<const StanceSummary> summaries, Rng& rng);

// Slot j draws from stream_root.child(j).
std::vector<std::string> assign_stances(std::span<const StanceSummary> summaries, int count,
                                        const Rng& stream_root);

std::vector<Argument> generate_arguments(const Agent& agent, int agent_id,
                                         const std::string& stance, const Query& query);

Feedback rate_argument(const Agent& agent, const Argument& argument, const Query& query,
                       const Verifier& verifier);

struct DebatePair {
  Argument supporting;
  std::optional<Argument> opposing;
  int n_for = 0;
  int n_against = 0;
};

nlohmann::json to_json(const DebatePair& p);

// Supporting argument drawn uniformly from the stance's pool, opposing one
// uniformly from all other pools. Opposing is absent when no other pool
// exists. Throws InputError when the stance has no argument.
DebatePair build_debate_pair(const std::string& assigned_stance,
                             std::span<const Argument> all_arguments, int n_for, int n_total,
                             Rng& rng);

struct RefinedOutput {
  int agent_id = 0;
  std::string answer;
  double confidence = 0.0;
  std::string rationale;
  // Set when the answer or confidence could not be parsed.
  std::optional<std::string> fallback;
};

nlohmann::json to_json(const RefinedOutput& r);

struct DebateConfig {
  int num_generalists = 4;
  int rounds = 1;
  std::uint64_t seed = 0;
  ConfidenceSource confidence_source = ConfidenceSource::kVerbalizedFirst;
  // Return the lone stance with its mean confidence when every specialist
  // agrees; when false the stance is debated with no opposing argument.
  bool skip_unanimous = true;
  // Run agent calls of one stage concurrently.
  bool parallel = false;
};

PromptVars final_confidence_vars(const Query& query, const std::string& stance,
                                 double mean_conf, const DebatePair& pair);

RefinedOutput refine(const Agent& agent, int agent_id, const Query& query,
                     const std::string& stance, double mean_conf, const DebatePair& pair,
                     const DebateConfig& config);

struct Aggregate {
  std::string final_answer;
  double final_confidence = 0.0;
  std::vector<StanceSummary> clusters;  // clusters of refined answers
};

// Re-cluster refined answers (seeded with `known_stances` so canonical names
// carry over); winner by count, then mean confidence, then answer ascending.
Aggregate aggregate(std::span<const RefinedOutput> refined, const Judge& judge,
                    const Query& query, std::span<const std::string> known_stances = {});

class Transcript {
 public:
  void add(std::string stage, std::string kind, std::string agent, nlohmann::json data);
  const nlohmann::json& events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }

 private:
  nlohmann::json events_ = nlohmann::json::array();
};

struct DebateResult {
  std::string query_id;
  std::string final_answer;
  double final_confidence = 0.0;
  std::vector<StanceSummary> stage1;
  std::vector<RefinedOutput> refined;
  bool stage2_skipped = false;
  Transcript transcript;

  nlohmann::json to_json() const;
};

// Raised by run_debate; carries the transcript up to the failure.
class DebateError : public Error {
 public:
  DebateError(const std::string& what, ExitCode code, Transcript transcript)
      : Error(what), code_(code), transcript_(std::move(transcript)) {}
  ExitCode exit_code() const noexcept override { return code_; }
  const Transcript& transcript() const noexcept { return transcript_; }

 private:
  ExitCode code_;
  Transcript transcript_;
};

struct DebateParticipants {
  std::vector<std::shared_ptr<const Agent>> specialists;
  std::vector<std::shared_ptr<const Agent>> generalists;
  std::shared_ptr<const Judge> judge = std::make_shared<NormalizingJudge>();
  std::shared_ptr<const Verifier> verifier = std::make_shared<StubVerifier>();
};

// Generalist slot j uses generalists[j % size]; config.num_generalists slots.
DebateResult run_debate(const Query& query, const DebateParticipants& participants,
                        const DebateConfig& config);

}  // namespace confcal
