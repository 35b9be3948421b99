#include <httplib.h>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include "confcal/agents.hpp"
#include "confcal/error.hpp"
#include "confcal/losses.hpp"

namespace confcal {
namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw InputError("endpoint url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string image_url(const std::string& ref) {
  if (ref.rfind("data:", 0) == 0) return ref;
  std::error_code ec;
  if (std::filesystem::is_regular_file(ref, ec)) {
    std::ifstream in(ref, std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    auto ext = std::filesystem::path(ref).extension().string();
    std::string mime = "image/png";
    if (ext == ".jpg" || ext == ".jpeg") mime = "image/jpeg";
    if (ext == ".gif") mime = "image/gif";
    if (ext == ".webp") mime = "image/webp";
    return "data:" + mime + ";base64," + base64(bytes);
  }
  return "data:image/png;base64," + ref;
}

std::string content_text(const json& content) {
  if (content.is_string()) return content.get<std::string>();
  std::string text;
  if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", std::string{}) == "text") text += part.value("text", std::string{});
    }
  }
  return text;
}

std::string first_line(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b != std::string::npos) return line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
  }
  return {};
}

}  // namespace

Completion parse_chat_completion(const json& body) {
  if (!body.contains("choices") || !body.at("choices").is_array() ||
      body.at("choices").empty()) {
    throw InputError("chat completion without choices");
  }
  const auto& choice = body.at("choices").at(0);
  Completion c;
  if (choice.contains("message")) {
    c.raw_text = content_text(choice.at("message").value("content", json("")));
  } else {
    c.raw_text = choice.value("text", std::string{});
  }
  if (choice.contains("logprobs") && choice.at("logprobs").is_object() &&
      choice.at("logprobs").contains("content") &&
      choice.at("logprobs").at("content").is_array()) {
    std::vector<double> probs;
    for (const auto& tok : choice.at("logprobs").at("content")) {
      const double lp = tok.at("logprob").get<double>();
      probs.push_back(std::clamp(std::exp(lp), kProbFloor, 1.0));
    }
    if (!probs.empty()) c.token_probs = std::move(probs);
  }
  return c;
}

HttpAgent::HttpAgent(AgentSpec spec) : Agent(std::move(spec)) {
  if (this->spec().param("url", std::string{}).empty()) {
    throw InputError("http agent '" + name() + "' needs a 'url' parameter");
  }
}

json HttpAgent::build_request(const Query& query, const std::string& prompt) const {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", prompt}});
  if (query.image_ref) {
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_url(*query.image_ref)}}}});
  }
  json body{{"model", spec().param("model", std::string("default"))},
            {"messages", json::array({{{"role", "user"}, {"content", content}}})},
            {"temperature", spec().param("temperature", 0.0)}};
  const bool logprobs = spec().param("logprobs", std::string("true")) == "true";
  body["logprobs"] = logprobs;
  return body;
}

Completion HttpAgent::post(const Query& query, const std::string& prompt) const {
  const auto endpoint = split_url(spec().param("url", std::string{}));
  const auto timeout = std::chrono::duration<double>(spec().param("timeout_s", 60.0));
  const int attempts = std::max(1, static_cast<int>(spec().param("retries", 3.0)));
  const auto backoff = std::chrono::milliseconds(
      static_cast<long>(spec().param("backoff_ms", 500.0)));

  httplib::Headers headers;
  if (const auto env = spec().param("api_key_env", std::string{}); !env.empty()) {
    const char* key = std::getenv(env.c_str());
    if (!key) throw InputError("agent '" + name() + "': environment variable " + env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const auto payload = build_request(query, prompt).dump();

  std::string last_error;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff * (1 << (attempt - 1)));
    httplib::Client client(endpoint.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    client.set_write_timeout(secs);
    auto res = client.Post(endpoint.path, headers, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    Completion c;
    try {
      c = parse_chat_completion(json::parse(res->body));
    } catch (const std::exception& e) {
      throw TransportError(name(), std::string("malformed response: ") + e.what());
    }
    std::lock_guard lock(mutex_);
    const bool has = c.token_probs.has_value();
    if (expects_logprobs_ && *expects_logprobs_ != has) {
      throw TransportError(name(), "endpoint returned log-probabilities inconsistently");
    }
    expects_logprobs_ = has;
    return c;
  }
  throw TransportError(name(), last_error + " after " + std::to_string(attempts) + " attempts");
}

AgentResponse HttpAgent::respond(const Query& query) const {
  const auto c = post(query, render_prompt(PromptKind::kStance, spec().strategy, query));
  const auto parsed = parse_answer_and_confidence(c.raw_text);
  AgentResponse r;
  r.raw_text = c.raw_text;
  r.parsed_answer = parsed.answer.value_or(first_line(c.raw_text));
  r.token_probs = c.token_probs;
  r.verbalized_confidence = parsed.confidence;
  if (r.token_probs) {
    r.sequence_confidence = sequence_confidence(*r.token_probs);
  } else if (r.verbalized_confidence) {
    r.sequence_confidence = *r.verbalized_confidence;
  } else {
    throw TransportError(name(), "response has neither log-probabilities nor a Confidence: value");
  }
  return r;
}

std::string HttpAgent::argue(const Query& query, const std::string& stance) const {
  const auto prompt =
      render_prompt(PromptKind::kArgument, spec().strategy, query, {{"STANCE", stance}});
  const auto c = post(query, prompt);
  const auto b = c.raw_text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  return c.raw_text.substr(b, c.raw_text.find_last_not_of(" \t\r\n") - b + 1);
}

Feedback HttpAgent::rate(const Query& query, const Argument& argument) const {
  const auto prompt = render_prompt(PromptKind::kRating, spec().strategy, query,
                                    {{"STANCE", argument.stance}, {"ARGUMENT", argument.text}});
  return parse_feedback(post(query, prompt).raw_text);
}

Completion HttpAgent::refine(const Query& query, const RefineRequest& request) const {
  // First call: answer and rationale. Second call: the full elicitation with
  // the rationale filled in, which asks for the confidence.
  const auto full = prompt_template(PromptKind::kFinalConfidence);
  const auto cut = full.find("Recall your original confidence");
  std::string head(full.substr(0, cut));
  head += "Format:\nAnswer: <your short answer>\nRationale: <brief rationale>\n";
  const auto first = post(query, substitute(head, request.vars));

  std::string rationale = first.raw_text;
  const auto low = [&] {
    std::string s = first.raw_text;
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
  }();
  if (const auto pos = low.find("rationale:"); pos != std::string::npos) {
    rationale = first.raw_text.substr(pos + 10);
  }
  auto vars = request.vars;
  vars["CONFIDENCE-RATIONALE"] = rationale;
  const auto second = post(query, substitute(full, vars));

  Completion c;
  const auto answer = parse_answer_and_confidence(first.raw_text).answer;
  c.raw_text = "Answer: " + answer.value_or(first_line(first.raw_text)) + "\n" +
               second.raw_text;
  c.token_probs = first.token_probs;
  c.rationale = rationale;
  return c;
}

Completion HttpAgent::complete(const Query& query, const std::string& prompt) const {
  return post(query, prompt);
}

}  // namespace confcal
