#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "confcal/agents.hpp"
#include "confcal/error.hpp"
#include "confcal/report_io.hpp"

namespace confcal {
namespace {

constexpr std::string_view kStanceTemplate =
    "{PREAMBLE}Question: {QUERY}\n"
    "State your answer (as short as possible, in one or a few words), then rate:\n"
    "the level of ambiguity in the input query (a float from 0 to 1);\n"
    "the level of complexity of the input query (a float from 0 to 1);\n"
    "and your level of ability for solving the input query (a float from 0 to 1).\n"
    "Note that your uncertainty about correctness is affected by input ambiguity, task "
    "complexity, and your own knowledge and abilities.\n"
    "Based on this, give a float (between 0 and 1) indicating your overall confidence that "
    "your answer is correct.\n"
    "Format: Answer: <your short answer>  Confidence: <float in [0,1]>\n";

constexpr std::string_view kArgumentTemplate =
    "You are participating in a debate on the question: \"{QUERY}\".\n"
    "Your assigned stance on the question is: \"{STANCE}\".\n"
    "Generate arguments or evidence (no more than three sentences) explaining why your "
    "assigned stance is correct.\n"
    "If the question is ambiguous, explicitly state the assumptions or interpretations you "
    "adopt.\n"
    "Be concise and exclude anything irrelevant or unhelpful to supporting the stance.\n";

constexpr std::string_view kFinalConfidenceTemplate =
    "Given the question: \"{QUERY}\", your original answer is \"{STANCE}\" with a confidence "
    "score of {ORIGINAL-CONFIDENCE}.\n"
    "An argument from the opposing side is \"{ARGUMENT-AGAINST}\", which received the "
    "following rating and feedback from other deliberators: \"{FEEDBACK-AGAINST}\". Note that "
    "{NUMBER_AGAINST} people disagreed with you.\n"
    "An argument supporting your original answer is \"{ARGUMENT_FOR}\", which received the "
    "following rating and feedback from other deliberators: \"{FEEDBACK-SUPPORTING}\". Note "
    "that {NUMBER-SUPPORTING} people agreed with you.\n"
    "Provide your final answer to the question (as short as possible). Considering your "
    "original belief, group consensus, and these new observations—and weighing arguments "
    "from multiple sides (including your own)—give a brief rationale for whether you "
    "would adjust your original confidence score.\n"
    "Recall your original confidence is {ORIGINAL-CONFIDENCE}. Given your rationale "
    "\"{CONFIDENCE-RATIONALE}\", provide your final confidence score (a float in [0,1]) in "
    "the exact format: Confidence: <float in [0,1]>.\n";

constexpr std::string_view kRatingTemplate =
    "You are reviewing an argument from a debate on the question: \"{QUERY}\".\n"
    "The argument supports the stance \"{STANCE}\":\n"
    "\"{ARGUMENT}\"\n"
    "Rate the argument from 1 (poor) to 5 (excellent) for logical consistency, factuality, "
    "clarity and conciseness, then give one sentence of feedback.\n"
    "Format: Logical: <1-5>  Factual: <1-5>  Clarity: <1-5>  Concise: <1-5>  Notes: "
    "<feedback>\n";

constexpr std::string_view kVerificationTemplate =
    "Question: \"{QUERY}\"\n"
    "Argument: \"{ARGUMENT}\"\n"
    "List the premises and assumptions this argument relies on. Check each premise "
    "independently and mark the ones that are not factual.\n"
    "Format: Premises: <numbered list>  Factual: <1-5>  Notes: <premises that failed>\n";

constexpr std::string_view kEquivalenceTemplate =
    "Question: \"{QUERY}\"\n"
    "Do the answers \"{ANSWER_A}\" and \"{ANSWER_B}\" mean the same thing as answers to this "
    "question?\n"
    "Format: Equivalent: <yes or no>\n";

const std::regex& placeholder_re() {
  static const std::regex re(R"(\{([A-Z][A-Z0-9_\-]*)\})");
  return re;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view prompt_template(PromptKind kind) {
  switch (kind) {
    case PromptKind::kStance:
      return kStanceTemplate;
    case PromptKind::kArgument:
      return kArgumentTemplate;
    case PromptKind::kFinalConfidence:
      return kFinalConfidenceTemplate;
    case PromptKind::kRating:
      return kRatingTemplate;
    case PromptKind::kVerification:
      return kVerificationTemplate;
    case PromptKind::kEquivalence:
      return kEquivalenceTemplate;
  }
  return {};
}

std::string_view strategy_preamble(Strategy strategy) {
  switch (strategy) {
    case Strategy::kChainOfThought:
      return "Think through the question step by step before answering.\n";
    case Strategy::kSelfAsk:
      return "Break the question into simpler follow-up questions, answer each one, then "
             "answer the original question.\n";
    case Strategy::kSearchStyle:
      return "Recall the evidence a search engine would return for this question, cite the "
             "most relevant facts, then answer.\n";
    case Strategy::kGenRead:
      return "First write a short background passage with the knowledge the question needs, "
             "then answer using that passage.\n";
    case Strategy::kGeneralist:
      return "";
  }
  return "";
}

std::string substitute(std::string_view text, const PromptVars& vars) {
  std::string out;
  std::set<std::string> missing;
  const std::string src(text);
  auto it = std::sregex_iterator(src.begin(), src.end(), placeholder_re());
  std::size_t last = 0;
  for (; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(src, last, static_cast<std::size_t>(m.position(0)) - last);
    const auto key = m.str(1);
    if (auto found = vars.find(key); found != vars.end()) {
      out += found->second;
    } else {
      missing.insert(key);
    }
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& k : missing) list += (list.empty() ? "" : ", ") + k;
    throw InputError("prompt placeholders without values: " + list);
  }
  out.append(src, last);
  return out;
}

std::string query_text(const Query& query) {
  std::string text = query.question;
  if (!query.options.empty()) {
    text += " Options: ";
    for (std::size_t i = 0; i < query.options.size(); ++i) {
      text += (i ? "; " : "") + query.options[i];
    }
    text += ".";
  }
  return text;
}

std::string render_prompt(PromptKind kind, Strategy strategy, const Query& query,
                          const PromptVars& vars) {
  PromptVars all = vars;
  all.try_emplace("QUERY", query_text(query));
  all.try_emplace("PREAMBLE", std::string(strategy_preamble(strategy)));
  return substitute(prompt_template(kind), all);
}

ParsedCompletion parse_answer_and_confidence(std::string_view raw_text) {
  ParsedCompletion out;
  const std::string low = lower(raw_text);
  constexpr std::string_view kAnswer = "answer:";
  constexpr std::string_view kConfidence = "confidence:";

  if (const auto a = low.find(kAnswer); a != std::string::npos) {
    const auto start = a + kAnswer.size();
    auto stop = low.find('\n', start);
    if (stop == std::string::npos) stop = low.size();
    for (std::string_view marker : {kConfidence, std::string_view("rationale:")}) {
      if (const auto c = low.find(marker, start); c != std::string::npos && c < stop) {
        stop = c;
      }
    }
    auto answer = trim(raw_text.substr(start, stop - start));
    if (!answer.empty()) out.answer = std::move(answer);
  }

  static const std::regex number(R"(^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))");
  for (auto c = low.find(kConfidence); c != std::string::npos;
       c = low.find(kConfidence, c + 1)) {
    const std::string tail(raw_text.substr(c + kConfidence.size()));
    std::smatch m;
    if (std::regex_search(tail, m, number)) {
      out.confidence = std::clamp(std::stod(m.str(1)), 0.0, 1.0);
      break;
    }
  }
  return out;
}

std::string format_completion(std::string_view answer, double confidence) {
  return "Answer: " + std::string(answer) + "  Confidence: " + format_real(confidence);
}

Feedback parse_feedback(std::string_view text) {
  Feedback fb;
  const std::string low = lower(text);
  auto read = [&](std::string_view key, int& slot) {
    const auto pos = low.find(key);
    if (pos == std::string::npos) return;
    static const std::regex integer(R"(^\s*([-+]?\d+))");
    const std::string tail(low.substr(pos + key.size()));
    std::smatch m;
    if (!std::regex_search(tail, m, integer)) return;
    const long v = std::stol(m.str(1));
    if (v < kMinRating || v > kMaxRating) fb.clamped = true;
    slot = static_cast<int>(std::clamp<long>(v, kMinRating, kMaxRating));
  };
  read("logical:", fb.logical);
  read("factual:", fb.factual);
  read("clarity:", fb.clarity);
  read("concise:", fb.concise);
  if (const auto pos = low.find("notes:"); pos != std::string::npos) {
    fb.notes = trim(text.substr(pos + 6));
  }
  return fb;
}

}  // namespace confcal
