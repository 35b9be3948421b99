#include "confcal/report_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "confcal/error.hpp"

namespace confcal {
namespace {

using nlohmann::json;

std::string require_string(const json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw InputError(std::string("field '") + key + "' must be a string");
}

std::optional<double> parse_optional_real(const std::string& field, std::size_t line) {
  if (field.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw InputError("reliability CSV line " + std::to_string(line) + ": bad number '" +
                     field + "'");
  }
  return v;
}

}  // namespace

std::string format_real(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

json to_json(const PredictionRecord& record) {
  return json{{"id", record.id},
              {"predicted_answer", record.predicted_answer},
              {"true_answer", record.true_answer},
              {"confidence", record.confidence}};
}

PredictionRecord record_from_json(const json& j) {
  if (!j.is_object()) throw InputError("expected a JSON object");
  PredictionRecord r;
  r.id = require_string(j, "id");
  r.predicted_answer = require_string(j, "predicted_answer");
  r.true_answer = require_string(j, "true_answer");
  if (!j.contains("confidence") || !j.at("confidence").is_number()) {
    throw InputError("field 'confidence' must be a number");
  }
  r.confidence = j.at("confidence").get<double>();
  if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
    throw InputError("confidence " + format_real(r.confidence) + " outside [0,1]");
  }
  return r;
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError("line " + std::to_string(lineno) + ": malformed JSON: " + e.what());
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return read_predictions(in);
}

void write_predictions(std::ostream& out, std::span<const PredictionRecord> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void save_predictions(const std::filesystem::path& path,
                      std::span<const PredictionRecord> records) {
  std::ostringstream os;
  write_predictions(os, records);
  write_text_file(path, os.str());
}

void write_reliability_csv(std::ostream& out, std::span<const ReliabilityBin> bins) {
  out << kReliabilityCsvHeader << '\n';
  for (const auto& b : bins) {
    out << format_real(b.lo) << ',' << format_real(b.hi) << ',' << b.count << ',';
    if (b.mean_confidence) out << format_real(*b.mean_confidence);
    out << ',';
    if (b.accuracy) out << format_real(*b.accuracy);
    out << '\n';
  }
}

std::vector<ReliabilityBin> read_reliability_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReliabilityCsvHeader) {
    throw InputError("reliability CSV: missing header");
  }
  std::vector<ReliabilityBin> bins;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 5) {
      throw InputError("reliability CSV line " + std::to_string(lineno) +
                       ": expected 5 fields");
    }
    ReliabilityBin b;
    b.lo = parse_optional_real(fields[0], lineno).value_or(0.0);
    b.hi = parse_optional_real(fields[1], lineno).value_or(0.0);
    b.count = static_cast<std::size_t>(std::stoull(fields[2]));
    b.mean_confidence = parse_optional_real(fields[3], lineno);
    b.accuracy = parse_optional_real(fields[4], lineno);
    bins.push_back(b);
  }
  return bins;
}

void write_reliability_svg(std::ostream& out, std::span<const ReliabilityBin> bins,
                           const std::string& title) {
  constexpr double kSize = 400.0;
  constexpr double kPad = 50.0;
  auto x = [&](double v) { return kPad + v * kSize; };
  auto y = [&](double v) { return kPad + (1.0 - v) * kSize; };
  const double total = kSize + 2 * kPad;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\""
      << total << "\" viewBox=\"0 0 " << total << ' ' << total << "\">\n";
  out << "<title>" << title << "</title>\n";
  out << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kSize
      << "\" height=\"" << kSize << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const auto& b : bins) {
    if (!b.accuracy) continue;
    const double w = std::max(b.hi - b.lo, 0.005);
    out << "<rect class=\"accuracy\" x=\"" << x(b.lo) << "\" y=\"" << y(*b.accuracy)
        << "\" width=\"" << w * kSize << "\" height=\"" << *b.accuracy * kSize
        << "\" fill=\"steelblue\" fill-opacity=\"0.7\" stroke=\"navy\"/>\n";
    const double mid = b.lo + w / 2;
    out << "<circle class=\"confidence\" cx=\"" << x(mid) << "\" cy=\""
        << y(*b.mean_confidence) << "\" r=\"3\" fill=\"crimson\"/>\n";
  }
  out << "<line x1=\"" << x(0) << "\" y1=\"" << y(0) << "\" x2=\"" << x(1) << "\" y2=\""
      << y(1) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  out << "<text x=\"" << total / 2 << "\" y=\"" << total - 15
      << "\" text-anchor=\"middle\" font-size=\"14\">confidence</text>\n";
  out << "<text x=\"15\" y=\"" << total / 2 << "\" transform=\"rotate(-90 15 " << total / 2
      << ")\" text-anchor=\"middle\" font-size=\"14\">accuracy</text>\n";
  out << "</svg>\n";
}

json to_json(const MetricsReport& report) {
  return json{{"accuracy", report.classification.accuracy},
              {"f1", report.classification.f1},
              {"precision", report.classification.precision},
              {"recall", report.classification.recall},
              {"ece", report.ece},
              {"ace", report.ace},
              {"mce", report.mce},
              {"ubce", report.ubce},
              {"n", report.n},
              {"bins", report.bins},
              {"ace_bins", report.ace_bins}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace confcal
