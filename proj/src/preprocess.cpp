#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "stattn/data.hpp"
#include "stattn/error.hpp"

namespace stattn {
namespace {

using json = nlohmann::json;

// Restricts a cohort to the variables whose keep flag is set.
Cohort select_variables(const Cohort& cohort, const std::vector<bool>& keep_static,
                        const std::vector<bool>& keep_long) {
  Cohort out;
  for (std::size_t i = 0; i < cohort.catalog.statics.size(); ++i)
    if (keep_static[i]) out.catalog.statics.push_back(cohort.catalog.statics[i]);
  for (std::size_t i = 0; i < cohort.catalog.longitudinal.size(); ++i)
    if (keep_long[i]) out.catalog.longitudinal.push_back(cohort.catalog.longitudinal[i]);
  out.records.reserve(cohort.records.size());
  for (const auto& r : cohort.records) {
    PatientRecord rec{r.patient_id, {}, {}, r.label};
    for (std::size_t i = 0; i < r.static_values.size(); ++i)
      if (keep_static[i]) rec.static_values.push_back(r.static_values[i]);
    for (const auto& v : r.visits) {
      Visit visit{v.day_index, {}};
      for (std::size_t i = 0; i < v.values.size(); ++i)
        if (keep_long[i]) visit.values.push_back(v.values[i]);
      rec.visits.push_back(std::move(visit));
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

double scale_value(double x, double lo, double hi) {
  if (hi == lo) return 0.0;
  return (x - lo) / (hi - lo);
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

template <typename Fn>
void for_each_observation(const Cohort& cohort, bool longitudinal, std::size_t var, Fn fn) {
  for (const auto& r : cohort.records) {
    if (longitudinal) {
      for (const auto& v : r.visits)
        if (v.values[var]) fn(*v.values[var]);
    } else if (r.static_values[var]) {
      fn(*r.static_values[var]);
    }
  }
}

json catalog_to_json(const VariableCatalog& catalog) {
  auto vars = [](const std::vector<VariableInfo>& list) {
    json arr = json::array();
    for (const auto& v : list) {
      arr.push_back({{"name", v.name},
                     {"modality", std::string(modality_name(v.modality))},
                     {"kind", v.kind == VariableKind::kBinary ? "binary" : "numeric"}});
    }
    return arr;
  };
  return {{"statics", vars(catalog.statics)}, {"longitudinal", vars(catalog.longitudinal)}};
}

VariableCatalog catalog_from_json(const json& j) {
  auto vars = [](const json& arr) {
    std::vector<VariableInfo> list;
    for (const auto& v : arr) {
      VariableInfo info{v.at("name").get<std::string>(), parse_modality(v.at("modality").get<std::string>()),
                        v.at("kind").get<std::string>() == "binary" ? VariableKind::kBinary : VariableKind::kNumeric};
      list.push_back(std::move(info));
    }
    return list;
  };
  return {vars(j.at("statics")), vars(j.at("longitudinal"))};
}

json scaling_to_json(const ScalingTable& table) {
  json arr = json::array();
  for (const auto& e : table.entries) arr.push_back({{"variable", e.name}, {"min", e.min}, {"max", e.max}});
  return arr;
}

ScalingTable scaling_from_json(const json& arr) {
  ScalingTable table;
  for (const auto& e : arr) {
    table.entries.push_back({e.at("variable").get<std::string>(), e.at("min").get<double>(), e.at("max").get<double>()});
  }
  return table;
}

template <typename Fn>
auto parse_json_or_fail(std::string_view text, const char* what, Fn fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid ") + what + ": " + e.what());
  }
}

}  // namespace

Cohort prevalence_filter(const Cohort& cohort, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "prevalence threshold must lie in (0, 1]");
  }
  const auto& vars = cohort.catalog.longitudinal;
  const double n = static_cast<double>(cohort.records.size());
  std::vector<bool> keep(vars.size(), false);
  std::ostringstream coverage;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    std::size_t observed = 0;
    for (const auto& r : cohort.records) {
      if (std::any_of(r.visits.begin(), r.visits.end(), [i](const Visit& v) { return v.values[i].has_value(); })) {
        ++observed;
      }
    }
    const double fraction = n > 0 ? static_cast<double>(observed) / n : 0.0;
    keep[i] = fraction > threshold;
    coverage << ' ' << vars[i].name << '=' << fraction;
  }
  if (!vars.empty() && std::none_of(keep.begin(), keep.end(), [](bool b) { return b; })) {
    fail(ErrorCode::kInvalidArgument,
         "prevalence filter at threshold " + std::to_string(threshold) + " removes every longitudinal variable;" +
             " coverage:" + coverage.str());
  }
  return select_variables(cohort, std::vector<bool>(cohort.catalog.statics.size(), true), keep);
}

Cohort filter_modalities(const Cohort& cohort, const ModalitySet& keep) {
  std::vector<bool> keep_static, keep_long;
  for (const auto& v : cohort.catalog.statics) keep_static.push_back(keep.count(v.modality) > 0);
  for (const auto& v : cohort.catalog.longitudinal) keep_long.push_back(keep.count(v.modality) > 0);
  return select_variables(cohort, keep_static, keep_long);
}

const ScalingEntry* ScalingTable::find(std::string_view name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string ScalingTable::to_json() const { return scaling_to_json(*this).dump(2); }

ScalingTable ScalingTable::from_json(std::string_view text) {
  return parse_json_or_fail(text, "scaling table", [](const json& j) { return scaling_from_json(j); });
}

NormalizedCohort minmax_normalize(const Cohort& cohort) {
  NormalizedCohort out{cohort, {}};
  auto scale_var = [&](const VariableInfo& info, bool longitudinal, std::size_t var) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for_each_observation(cohort, longitudinal, var, [&](double x) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    });
    if (!std::isfinite(lo)) fail(ErrorCode::kInvalidArgument, "variable '" + info.name + "' has no observations");
    out.scaling.entries.push_back({info.name, lo, hi});
    for (auto& r : out.cohort.records) {
      if (longitudinal) {
        for (auto& v : r.visits)
          if (v.values[var]) v.values[var] = scale_value(*v.values[var], lo, hi);
      } else if (r.static_values[var]) {
        r.static_values[var] = scale_value(*r.static_values[var], lo, hi);
      }
    }
  };
  for (std::size_t i = 0; i < cohort.catalog.longitudinal.size(); ++i) {
    scale_var(cohort.catalog.longitudinal[i], true, i);
  }
  for (std::size_t i = 0; i < cohort.catalog.statics.size(); ++i) {
    if (cohort.catalog.statics[i].kind == VariableKind::kNumeric) scale_var(cohort.catalog.statics[i], false, i);
  }
  return out;
}

Cohort apply_scaling(const Cohort& cohort, const ScalingTable& table) {
  Cohort out = cohort;
  auto rescale = [](Observation& v, const ScalingEntry& e) {
    if (v) v = std::clamp(scale_value(*v, e.min, e.max), 0.0, 1.0);
  };
  auto entry_for = [&](const VariableInfo& info) -> const ScalingEntry& {
    const auto* e = table.find(info.name);
    if (!e) fail(ErrorCode::kInvalidArgument, "scaling table has no entry for '" + info.name + "'");
    return *e;
  };
  for (std::size_t i = 0; i < out.catalog.longitudinal.size(); ++i) {
    const auto& e = entry_for(out.catalog.longitudinal[i]);
    for (auto& r : out.records)
      for (auto& v : r.visits) rescale(v.values[i], e);
  }
  for (std::size_t i = 0; i < out.catalog.statics.size(); ++i) {
    if (out.catalog.statics[i].kind != VariableKind::kNumeric) continue;
    const auto& e = entry_for(out.catalog.statics[i]);
    for (auto& r : out.records) rescale(r.static_values[i], e);
  }
  return out;
}

ImputationTable cohort_medians(const Cohort& cohort) {
  ImputationTable table;
  for (std::size_t i = 0; i < cohort.catalog.longitudinal.size(); ++i) {
    std::vector<double> values;
    for_each_observation(cohort, true, i, [&](double x) { values.push_back(x); });
    table.longitudinal.push_back(median(std::move(values)));
  }
  for (std::size_t i = 0; i < cohort.catalog.statics.size(); ++i) {
    std::vector<double> values;
    if (cohort.catalog.statics[i].kind == VariableKind::kNumeric) {
      for_each_observation(cohort, false, i, [&](double x) { values.push_back(x); });
    }
    table.statics.push_back(median(std::move(values)));
  }
  return table;
}

std::string ImputationTable::to_json(const VariableCatalog& catalog) const {
  json j = {{"longitudinal", json::array()}, {"statics", json::array()}};
  for (std::size_t i = 0; i < longitudinal.size(); ++i) {
    j["longitudinal"].push_back({{"variable", catalog.longitudinal.at(i).name}, {"median", longitudinal[i]}});
  }
  for (std::size_t i = 0; i < statics.size(); ++i) {
    j["statics"].push_back({{"variable", catalog.statics.at(i).name}, {"median", statics[i]}});
  }
  return j.dump(2);
}

ImputationTable ImputationTable::from_json(std::string_view text, const VariableCatalog& catalog) {
  return parse_json_or_fail(text, "imputation table", [&](const json& j) {
    ImputationTable table;
    auto read = [](const json& arr, const std::vector<VariableInfo>& vars, std::vector<double>& out) {
      if (arr.size() != vars.size()) fail(ErrorCode::kFormat, "imputation table does not match the catalog");
      for (std::size_t i = 0; i < vars.size(); ++i) {
        if (arr[i].at("variable").get<std::string>() != vars[i].name) {
          fail(ErrorCode::kFormat, "imputation table variable order does not match the catalog");
        }
        out.push_back(arr[i].at("median").get<double>());
      }
    };
    read(j.at("longitudinal"), catalog.longitudinal, table.longitudinal);
    read(j.at("statics"), catalog.statics, table.statics);
    return table;
  });
}

PatientRecord forward_fill(const PatientRecord& record, const VariableCatalog& catalog,
                           const ImputationTable& medians) {
  if (record.visits.empty()) fail(ErrorCode::kInvalidArgument, "forward_fill: patient '" + record.patient_id + "' has no visits");
  if (medians.longitudinal.size() != catalog.longitudinal.size() || medians.statics.size() != catalog.statics.size()) {
    fail(ErrorCode::kShapeMismatch, "forward_fill: imputation table does not match the catalog");
  }
  PatientRecord out = record;
  for (std::size_t i = 0; i < catalog.longitudinal.size(); ++i) {
    Observation last;
    for (auto& v : out.visits) {
      if (v.values[i]) {
        last = v.values[i];
      } else {
        v.values[i] = last ? *last : medians.longitudinal[i];
      }
    }
  }
  for (std::size_t i = 0; i < catalog.statics.size(); ++i) {
    if (out.static_values[i]) continue;
    out.static_values[i] = catalog.statics[i].kind == VariableKind::kBinary ? 0.0 : medians.statics[i];
  }
  return out;
}

std::vector<std::string> feature_names(const VariableCatalog& catalog) {
  std::vector<std::string> names;
  for (const auto& v : catalog.longitudinal) names.push_back(v.name);
  for (const auto& v : catalog.statics)
    if (v.kind == VariableKind::kNumeric) names.push_back(v.name);
  for (const auto& v : catalog.statics)
    if (v.kind == VariableKind::kBinary) names.push_back(v.name);
  return names;
}

FeatureSequence assemble_features(const PatientRecord& record, const VariableCatalog& catalog) {
  if (record.static_values.size() != catalog.statics.size()) {
    fail(ErrorCode::kInvalidArgument, "assemble_features: patient '" + record.patient_id +
                                          "' static values do not match the catalog");
  }
  if (record.visits.empty()) fail(ErrorCode::kInvalidArgument, "assemble_features: patient '" + record.patient_id + "' has no visits");

  std::vector<double> static_block;
  auto take = [&](const Observation& v, const std::string& name) {
    if (!v) fail(ErrorCode::kInvalidArgument, "assemble_features: '" + name + "' is missing for patient '" + record.patient_id + "'");
    if (!(*v >= 0.0 && *v <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "assemble_features: '" + name + "' = " + std::to_string(*v) +
                                            " outside [0, 1] for patient '" + record.patient_id + "'");
    }
    return *v;
  };
  for (VariableKind kind : {VariableKind::kNumeric, VariableKind::kBinary}) {
    for (std::size_t i = 0; i < catalog.statics.size(); ++i) {
      if (catalog.statics[i].kind == kind) static_block.push_back(take(record.static_values[i], catalog.statics[i].name));
    }
  }

  const std::size_t steps = record.visits.size();
  const std::size_t width = catalog.longitudinal.size() + static_block.size();
  if (width == 0) fail(ErrorCode::kInvalidArgument, "assemble_features: no variables selected");
  std::vector<double> values;
  values.reserve(steps * width);
  for (const auto& v : record.visits) {
    if (v.values.size() != catalog.longitudinal.size()) {
      fail(ErrorCode::kInvalidArgument, "assemble_features: patient '" + record.patient_id +
                                            "' visit values do not match the catalog");
    }
    for (std::size_t i = 0; i < v.values.size(); ++i) values.push_back(take(v.values[i], catalog.longitudinal[i].name));
    values.insert(values.end(), static_block.begin(), static_block.end());
  }
  FeatureSequence seq;
  seq.matrix = Tensor({steps, width}, std::move(values));
  seq.mask.assign(steps, true);
  seq.feature_names = feature_names(catalog);
  seq.patient_id = record.patient_id;
  seq.label = record.label;
  return seq;
}

std::string PreprocessState::to_json() const {
  json j;
  j["catalog"] = catalog_to_json(catalog);
  j["scaling"] = scaling_to_json(scaling);
  j["medians"] = json::parse(medians.to_json(catalog));
  return j.dump(2);
}

PreprocessState PreprocessState::from_json(std::string_view text) {
  return parse_json_or_fail(text, "preprocessing state", [](const json& j) {
    PreprocessState state;
    state.catalog = catalog_from_json(j.at("catalog"));
    state.scaling = scaling_from_json(j.at("scaling"));
    state.medians = ImputationTable::from_json(j.at("medians").dump(), state.catalog);
    return state;
  });
}

PreparedCohort preprocess(const Cohort& cohort, const PreprocessOptions& options) {
  cohort.validate();
  Cohort selected = filter_modalities(prevalence_filter(cohort, options.prevalence_threshold), options.modalities);
  NormalizedCohort normalized = minmax_normalize(selected);
  PreparedCohort out;
  out.state.catalog = normalized.cohort.catalog;
  out.state.scaling = std::move(normalized.scaling);
  out.state.medians = cohort_medians(normalized.cohort);
  out.sequences.reserve(normalized.cohort.records.size());
  for (const auto& r : normalized.cohort.records) {
    out.sequences.push_back(assemble_features(forward_fill(r, out.state.catalog, out.state.medians), out.state.catalog));
  }
  return out;
}

std::vector<FeatureSequence> preprocess_with(const Cohort& cohort, const PreprocessState& state) {
  cohort.validate();
  std::vector<bool> keep_static(cohort.catalog.statics.size(), false);
  std::vector<bool> keep_long(cohort.catalog.longitudinal.size(), false);
  for (const auto& v : state.catalog.statics) {
    const auto idx = cohort.catalog.static_index(v.name);
    if (!idx) fail(ErrorCode::kInvalidArgument, "cohort lacks variable '" + v.name + "'");
    keep_static[*idx] = true;
  }
  for (const auto& v : state.catalog.longitudinal) {
    const auto idx = cohort.catalog.longitudinal_index(v.name);
    if (!idx) fail(ErrorCode::kInvalidArgument, "cohort lacks variable '" + v.name + "'");
    keep_long[*idx] = true;
  }
  Cohort selected = select_variables(cohort, keep_static, keep_long);
  // Reorder to the stored catalog order.
  Cohort ordered;
  ordered.catalog = state.catalog;
  for (const auto& r : selected.records) {
    PatientRecord rec{r.patient_id, {}, {}, r.label};
    for (const auto& v : state.catalog.statics) rec.static_values.push_back(r.static_values[*selected.catalog.static_index(v.name)]);
    for (const auto& visit : r.visits) {
      Visit out_visit{visit.day_index, {}};
      for (const auto& v : state.catalog.longitudinal) {
        out_visit.values.push_back(visit.values[*selected.catalog.longitudinal_index(v.name)]);
      }
      rec.visits.push_back(std::move(out_visit));
    }
    ordered.records.push_back(std::move(rec));
  }
  Cohort scaled = apply_scaling(ordered, state.scaling);
  std::vector<FeatureSequence> out;
  out.reserve(scaled.records.size());
  for (const auto& r : scaled.records) {
    out.push_back(assemble_features(forward_fill(r, state.catalog, state.medians), state.catalog));
  }
  return out;
}

}  // namespace stattn
