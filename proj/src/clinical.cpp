#include "stattn/clinical.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "stattn/error.hpp"

namespace stattn {
namespace {

using json = nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

double bound_from_json(const json& j, const std::string& variable) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return -kInf;
    if (s == "inf" || s == "+inf") return kInf;
  }
  fail(ErrorCode::kFormat, "scoring table: variable '" + variable + "' has a bound that is neither a number nor +/-inf");
}

json bound_to_json(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

}  // namespace

int ScoringTable::max_achievable() const {
  int total = 0;
  for (const auto& v : variables) {
    int best = 0;
    for (const auto& b : v.brackets) best = std::max(best, b.points);
    total += best;
  }
  for (const auto& c : chronic) total += c.points;
  return total;
}

void ScoringTable::validate() const {
  if (variables.empty() && chronic.empty()) fail(ErrorCode::kFormat, "scoring table is empty");
  if (max_score <= 0) fail(ErrorCode::kFormat, "scoring table: max_score must be positive");
  std::unordered_map<std::string, int> seen;
  for (const auto& v : variables) {
    if (v.variable.empty()) fail(ErrorCode::kFormat, "scoring table: unnamed variable");
    if (seen[v.variable]++) fail(ErrorCode::kFormat, "scoring table: variable '" + v.variable + "' listed twice");
    if (v.brackets.empty()) fail(ErrorCode::kFormat, "scoring table: variable '" + v.variable + "' has no brackets");
    for (std::size_t i = 0; i < v.brackets.size(); ++i) {
      const auto& b = v.brackets[i];
      if (std::isnan(b.low) || std::isnan(b.high) || !(b.low < b.high)) {
        fail(ErrorCode::kFormat, "scoring table: variable '" + v.variable + "' has an empty or inverted bracket");
      }
      if (b.points < 0) fail(ErrorCode::kFormat, "scoring table: variable '" + v.variable + "' has negative points");
      if (i == 0) continue;
      const auto& prev = v.brackets[i - 1];
      if (b.low < prev.high) fail(ErrorCode::kFormat, "scoring table: variable '" + v.variable + "' has overlapping brackets");
      if (b.low > prev.high) fail(ErrorCode::kFormat, "scoring table: variable '" + v.variable + "' has a gap between brackets");
    }
  }
  for (const auto& c : chronic) {
    if (c.flag.empty() || c.points < 0) fail(ErrorCode::kFormat, "scoring table: invalid chronic-health rule");
    if (seen[c.flag]++) fail(ErrorCode::kFormat, "scoring table: '" + c.flag + "' listed twice");
  }
  if (max_achievable() > max_score) {
    fail(ErrorCode::kFormat, "scoring table: achievable total " + std::to_string(max_achievable()) +
                                 " exceeds max_score " + std::to_string(max_score));
  }
}

std::string ScoringTable::to_json() const {
  json j;
  j["max_score"] = max_score;
  j["variables"] = json::array();
  for (const auto& v : variables) {
    json brackets = json::array();
    for (const auto& b : v.brackets) {
      brackets.push_back({{"low", bound_to_json(b.low)}, {"high", bound_to_json(b.high)}, {"points", b.points}});
    }
    j["variables"].push_back({{"variable", v.variable}, {"brackets", brackets}});
  }
  j["chronic_health"] = json::array();
  for (const auto& c : chronic) j["chronic_health"].push_back({{"flag", c.flag}, {"points", c.points}});
  return j.dump(2);
}

ScoringTable ScoringTable::from_json(std::string_view text) {
  ScoringTable table;
  try {
    const json j = json::parse(text);
    if (j.contains("max_score")) table.max_score = j.at("max_score").get<int>();
    for (const auto& v : j.value("variables", json::array())) {
      ScoredVariable sv;
      sv.variable = v.at("variable").get<std::string>();
      for (const auto& b : v.at("brackets")) {
        sv.brackets.push_back(
            {bound_from_json(b.at("low"), sv.variable), bound_from_json(b.at("high"), sv.variable), b.at("points").get<int>()});
      }
      table.variables.push_back(std::move(sv));
    }
    for (const auto& c : j.value("chronic_health", json::array())) {
      table.chronic.push_back({c.at("flag").get<std::string>(), c.at("points").get<int>()});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid scoring table: ") + e.what());
  }
  table.validate();
  return table;
}

ScoringTable load_scoring_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open scoring table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ScoringTable::from_json(buf.str());
}

void save_scoring_table(const ScoringTable& table, const std::filesystem::path& path) {
  table.validate();
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write scoring table " + path.string());
  out << table.to_json() << '\n';
}

ClinicalScore clinical_score(const PatientRecord& record, const VariableCatalog& catalog, const ScoringTable& table) {
  if (table.variables.empty() && table.chronic.empty()) fail(ErrorCode::kInvalidArgument, "clinical_score: empty scoring table");
  if (record.visits.empty()) fail(ErrorCode::kInvalidArgument, "clinical_score: patient '" + record.patient_id + "' has no visits");
  ClinicalScore score{record.patient_id, 0, {}};
  auto first_value = [&](const std::string& name) -> Observation {
    if (const auto i = catalog.longitudinal_index(name)) return record.visits.front().values.at(*i);
    if (const auto i = catalog.static_index(name)) return record.static_values.at(*i);
    return std::nullopt;
  };
  for (const auto& v : table.variables) {
    int points = 0;
    if (const auto value = first_value(v.variable)) {
      for (const auto& b : v.brackets) {
        if (*value >= b.low && *value < b.high) {
          points = b.points;
          break;
        }
      }
    }
    score.breakdown.emplace_back(v.variable, points);
    score.total += points;
  }
  for (const auto& c : table.chronic) {
    const auto value = first_value(c.flag);
    const int points = value && *value == 1.0 ? c.points : 0;
    score.breakdown.emplace_back(c.flag, points);
    score.total += points;
  }
  return score;
}

double clinical_risk(const ClinicalScore& score, const ScoringTable& table) {
  return (static_cast<double>(score.total) + 0.5) / (static_cast<double>(table.max_score) + 1.0);
}

void attach_clinical_risk(std::vector<FeatureSequence>& sequences, const Cohort& raw, const ScoringTable& table) {
  std::unordered_map<std::string, const PatientRecord*> by_id;
  for (const auto& r : raw.records) by_id[r.patient_id] = &r;
  for (auto& seq : sequences) {
    const auto it = by_id.find(seq.patient_id);
    if (it == by_id.end()) fail(ErrorCode::kInvalidArgument, "no raw record for patient '" + seq.patient_id + "'");
    seq.clinical_risk = clinical_risk(clinical_score(*it->second, raw.catalog, table), table);
  }
}

}  // namespace stattn
