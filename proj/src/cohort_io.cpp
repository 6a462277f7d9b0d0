#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "stattn/data.hpp"
#include "stattn/error.hpp"
#include "text_util.hpp"

namespace stattn {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kLabs: return "labs";
    case Modality::kVitals: return "vitals";
    case Modality::kDemographic: return "demographic";
    case Modality::kHistory: return "history";
    case Modality::kImaging: return "imaging";
  }
  return "unknown";
}

Modality parse_modality(std::string_view name) {
  if (name == "labs" || name == "lab") return Modality::kLabs;
  if (name == "vitals" || name == "vital") return Modality::kVitals;
  if (name == "demographic" || name == "demo") return Modality::kDemographic;
  if (name == "history" || name == "hist") return Modality::kHistory;
  if (name == "imaging" || name == "img") return Modality::kImaging;
  fail(ErrorCode::kInvalidArgument, "unknown modality '" + std::string(name) +
                                        "' (expected labs, vitals, demographic, history, imaging)");
}

ModalitySet all_modalities() {
  return {Modality::kLabs, Modality::kVitals, Modality::kDemographic, Modality::kHistory, Modality::kImaging};
}

ModalitySet parse_modality_list(std::string_view list) {
  ModalitySet out;
  for (const auto& token : text::split(list, ',')) {
    const auto name = text::trim(token);
    if (name.empty()) continue;
    if (name == "all") {
      auto all = all_modalities();
      out.insert(all.begin(), all.end());
    } else {
      out.insert(parse_modality(name));
    }
  }
  if (out.empty()) fail(ErrorCode::kInvalidArgument, "empty modality list");
  return out;
}

VariableInfo describe_variable(std::string_view header, Modality fallback) {
  VariableInfo info{std::string(header), fallback, VariableKind::kNumeric};
  const auto colon = header.find(':');
  if (colon != std::string_view::npos) info.modality = parse_modality(header.substr(0, colon));
  if (info.modality == Modality::kHistory) info.kind = VariableKind::kBinary;
  return info;
}

namespace {

std::optional<std::size_t> find_by_name(const std::vector<VariableInfo>& vars, std::string_view name) {
  for (std::size_t i = 0; i < vars.size(); ++i)
    if (vars[i].name == name) return i;
  return std::nullopt;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = text::split(line, ',');
    if (table.header.empty()) {
      table.header = std::move(fields);
      for (auto& h : table.header) h = std::string(text::trim(h));
      continue;
    }
    if (fields.size() != table.header.size()) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(table.header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) fail(ErrorCode::kParse, path.string() + ": missing header row");
  return table;
}

void require_leading_columns(const CsvTable& table, const std::filesystem::path& path,
                             std::initializer_list<std::string_view> names) {
  std::size_t i = 0;
  for (auto name : names) {
    if (table.header.size() <= i || table.header[i] != name) {
      fail(ErrorCode::kParse, path.string() + ": missing required column '" + std::string(name) + "' at position " +
                                  std::to_string(i + 1));
    }
    ++i;
  }
}

Observation parse_cell(const std::string& cell, const std::filesystem::path& path, std::size_t line,
                       const std::string& column) {
  const auto trimmed = text::trim(cell);
  if (trimmed.empty()) return std::nullopt;
  const auto value = text::parse_double(trimmed);
  if (!value) {
    fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line) + ": column '" + column +
                                "': cannot parse '" + std::string(trimmed) + "' as a number");
  }
  return value;
}

void write_cell(std::ostream& out, const Observation& v) {
  if (v) out << text::format_double(*v);
}

}  // namespace

std::optional<std::size_t> VariableCatalog::static_index(std::string_view name) const {
  return find_by_name(statics, name);
}

std::optional<std::size_t> VariableCatalog::longitudinal_index(std::string_view name) const {
  return find_by_name(longitudinal, name);
}

void Cohort::validate() const {
  std::unordered_set<std::string> seen;
  for (const auto& v : catalog.statics) {
    if (v.longitudinal()) fail(ErrorCode::kFormat, "static variable '" + v.name + "' has a longitudinal modality");
  }
  for (const auto& v : catalog.longitudinal) {
    if (!v.longitudinal()) fail(ErrorCode::kFormat, "visit variable '" + v.name + "' has a static modality");
  }
  for (const auto& r : records) {
    if (!seen.insert(r.patient_id).second) fail(ErrorCode::kFormat, "duplicate patient id '" + r.patient_id + "'");
    if (r.label != 0 && r.label != 1) fail(ErrorCode::kFormat, "patient '" + r.patient_id + "': label must be 0 or 1");
    if (r.static_values.size() != catalog.statics.size()) {
      fail(ErrorCode::kFormat, "patient '" + r.patient_id + "': static values do not match the catalog");
    }
    if (r.visits.empty()) fail(ErrorCode::kFormat, "patient '" + r.patient_id + "' has no visits");
    for (std::size_t k = 0; k < r.visits.size(); ++k) {
      if (r.visits[k].values.size() != catalog.longitudinal.size()) {
        fail(ErrorCode::kFormat, "patient '" + r.patient_id + "': visit values do not match the catalog");
      }
      if (k > 0 && r.visits[k].day_index <= r.visits[k - 1].day_index) {
        fail(ErrorCode::kFormat, "patient '" + r.patient_id + "': day_index not strictly increasing");
      }
    }
    for (std::size_t i = 0; i < catalog.statics.size(); ++i) {
      const auto& v = r.static_values[i];
      if (catalog.statics[i].kind == VariableKind::kBinary && v && *v != 0.0 && *v != 1.0) {
        fail(ErrorCode::kFormat, "patient '" + r.patient_id + "': binary variable '" + catalog.statics[i].name +
                                     "' must be 0 or 1");
      }
    }
  }
}

Cohort load_cohort(const std::filesystem::path& dir) {
  const auto static_path = dir / "static.csv";
  const auto visits_path = dir / "visits.csv";
  const CsvTable statics = read_csv(static_path);
  const CsvTable visits = read_csv(visits_path);
  require_leading_columns(statics, static_path, {"patient_id", "label"});
  require_leading_columns(visits, visits_path, {"patient_id", "day_index"});

  Cohort cohort;
  for (std::size_t c = 2; c < statics.header.size(); ++c) {
    cohort.catalog.statics.push_back(describe_variable(statics.header[c], Modality::kDemographic));
  }
  for (std::size_t c = 2; c < visits.header.size(); ++c) {
    cohort.catalog.longitudinal.push_back(describe_variable(visits.header[c], Modality::kLabs));
  }

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < statics.rows.size(); ++r) {
    const auto& row = statics.rows[r];
    const auto line = statics.line_numbers[r];
    PatientRecord rec;
    rec.patient_id = std::string(text::trim(row[0]));
    if (rec.patient_id.empty()) fail(ErrorCode::kParse, static_path.string() + ":" + std::to_string(line) + ": empty patient_id");
    const auto label = parse_cell(row[1], static_path, line, "label");
    if (!label || (*label != 0.0 && *label != 1.0)) {
      fail(ErrorCode::kParse, static_path.string() + ":" + std::to_string(line) + ": label must be 0 or 1");
    }
    rec.label = static_cast<int>(*label);
    for (std::size_t c = 2; c < row.size(); ++c) {
      rec.static_values.push_back(parse_cell(row[c], static_path, line, statics.header[c]));
    }
    if (!index.emplace(rec.patient_id, cohort.records.size()).second) {
      fail(ErrorCode::kParse, static_path.string() + ":" + std::to_string(line) + ": duplicate patient_id '" +
                                  rec.patient_id + "'");
    }
    cohort.records.push_back(std::move(rec));
  }

  for (std::size_t r = 0; r < visits.rows.size(); ++r) {
    const auto& row = visits.rows[r];
    const auto line = visits.line_numbers[r];
    const std::string id(text::trim(row[0]));
    const auto it = index.find(id);
    if (it == index.end()) {
      fail(ErrorCode::kParse, visits_path.string() + ":" + std::to_string(line) + ": patient '" + id +
                                  "' is not listed in static.csv");
    }
    const auto day = parse_cell(row[1], visits_path, line, "day_index");
    if (!day || *day != static_cast<double>(static_cast<int>(*day))) {
      fail(ErrorCode::kParse, visits_path.string() + ":" + std::to_string(line) + ": day_index must be an integer");
    }
    Visit visit{static_cast<int>(*day), {}};
    for (std::size_t c = 2; c < row.size(); ++c) {
      visit.values.push_back(parse_cell(row[c], visits_path, line, visits.header[c]));
    }
    cohort.records[it->second].visits.push_back(std::move(visit));
  }

  for (auto& rec : cohort.records) {
    std::stable_sort(rec.visits.begin(), rec.visits.end(),
                     [](const Visit& a, const Visit& b) { return a.day_index < b.day_index; });
  }
  cohort.validate();
  return cohort;
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  cohort.validate();
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "static.csv");
    if (!out) fail(ErrorCode::kIo, "cannot write " + (dir / "static.csv").string());
    out << "patient_id,label";
    for (const auto& v : cohort.catalog.statics) out << ',' << v.name;
    out << '\n';
    for (const auto& r : cohort.records) {
      out << r.patient_id << ',' << r.label;
      for (const auto& v : r.static_values) {
        out << ',';
        write_cell(out, v);
      }
      out << '\n';
    }
    if (!out) fail(ErrorCode::kIo, "failed writing static.csv");
  }
  {
    std::ofstream out(dir / "visits.csv");
    if (!out) fail(ErrorCode::kIo, "cannot write " + (dir / "visits.csv").string());
    out << "patient_id,day_index";
    for (const auto& v : cohort.catalog.longitudinal) out << ',' << v.name;
    out << '\n';
    for (const auto& r : cohort.records) {
      for (const auto& visit : r.visits) {
        out << r.patient_id << ',' << visit.day_index;
        for (const auto& v : visit.values) {
          out << ',';
          write_cell(out, v);
        }
        out << '\n';
      }
    }
    if (!out) fail(ErrorCode::kIo, "failed writing visits.csv");
  }
}

}  // namespace stattn
