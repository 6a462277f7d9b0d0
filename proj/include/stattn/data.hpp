#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stattn/sequence.hpp"

namespace stattn {

// Column headers carry the modality as a prefix: lab:, vital:, demo:, hist:,
// img:. History variables are binary flags; labs and vitals are longitudinal;
// demographic and imaging variables are static numerics.
enum class Modality { kLabs, kVitals, kDemographic, kHistory, kImaging };

std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view name);
using ModalitySet = std::set<Modality>;
ModalitySet all_modalities();
// Comma-separated list of labs, vitals, demographic, history, imaging or "all".
ModalitySet parse_modality_list(std::string_view list);

enum class VariableKind { kNumeric, kBinary };

struct VariableInfo {
  std::string name;  // full column header, e.g. "lab:ferritin"
  Modality modality = Modality::kLabs;
  VariableKind kind = VariableKind::kNumeric;

  bool longitudinal() const { return modality == Modality::kLabs || modality == Modality::kVitals; }
};

// Infers the modality from the prefix; unprefixed names default to `fallback`.
VariableInfo describe_variable(std::string_view header, Modality fallback);

struct VariableCatalog {
  std::vector<VariableInfo> statics;       // static.csv columns after patient_id, label
  std::vector<VariableInfo> longitudinal;  // visits.csv columns after patient_id, day_index

  std::optional<std::size_t> static_index(std::string_view name) const;
  std::optional<std::size_t> longitudinal_index(std::string_view name) const;
};

using Observation = std::optional<double>;

struct Visit {
  int day_index = 0;
  std::vector<Observation> values;  // aligned with catalog.longitudinal
};

struct PatientRecord {
  std::string patient_id;
  std::vector<Observation> static_values;  // aligned with catalog.statics
  std::vector<Visit> visits;               // strictly increasing day_index
  int label = 0;                           // death by day 60
};

struct Cohort {
  std::vector<PatientRecord> records;
  VariableCatalog catalog;

  // Throws if any record disagrees with the catalog or breaks a record
  // invariant.
  void validate() const;
};

// --- file I/O -------------------------------------------------------------

// Reads <dir>/static.csv and <dir>/visits.csv. Visits are sorted by
// day_index; empty cells are missing values.
Cohort load_cohort(const std::filesystem::path& dir);
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

// --- preprocessing --------------------------------------------------------

// Keeps longitudinal variables observed at least once by more than
// `threshold` of the patients.
Cohort prevalence_filter(const Cohort& cohort, double threshold = 0.95);

Cohort filter_modalities(const Cohort& cohort, const ModalitySet& keep);

struct ScalingEntry {
  std::string name;
  double min = 0.0;
  double max = 0.0;
};

struct ScalingTable {
  std::vector<ScalingEntry> entries;

  const ScalingEntry* find(std::string_view name) const;
  std::string to_json() const;
  static ScalingTable from_json(std::string_view text);
};

struct NormalizedCohort {
  Cohort cohort;
  ScalingTable scaling;
};

// Cohort-wide min-max scaling of every numeric variable. Constant variables
// map to 0.
NormalizedCohort minmax_normalize(const Cohort& cohort);
// Rescales with stored statistics; values outside the stored range clip to
// [0, 1].
Cohort apply_scaling(const Cohort& cohort, const ScalingTable& table);

// Fallback values for entries that forward fill cannot reach: the median of
// every observed value of each numeric variable.
struct ImputationTable {
  std::vector<double> longitudinal;  // aligned with catalog.longitudinal
  std::vector<double> statics;       // aligned with catalog.statics

  std::string to_json(const VariableCatalog& catalog) const;
  static ImputationTable from_json(std::string_view text, const VariableCatalog& catalog);
};

ImputationTable cohort_medians(const Cohort& cohort);

// Missing longitudinal values take the last prior observation, or the cohort
// median before the first one. Missing static numerics take the median and
// missing binary flags become 0.
PatientRecord forward_fill(const PatientRecord& record, const VariableCatalog& catalog,
                           const ImputationTable& medians);

// Row per visit: [longitudinal | static numerics | binary flags], each block
// in catalog order.
FeatureSequence assemble_features(const PatientRecord& record, const VariableCatalog& catalog);
std::vector<std::string> feature_names(const VariableCatalog& catalog);

struct PreprocessOptions {
  double prevalence_threshold = 0.95;
  ModalitySet modalities = all_modalities();
};

// The statistics needed to reproduce preprocessing on new data.
struct PreprocessState {
  VariableCatalog catalog;
  ScalingTable scaling;
  ImputationTable medians;

  std::string to_json() const;
  static PreprocessState from_json(std::string_view text);
};

struct PreparedCohort {
  std::vector<FeatureSequence> sequences;
  PreprocessState state;
};

// prevalence filter -> modality filter -> normalize -> impute -> assemble.
PreparedCohort preprocess(const Cohort& cohort, const PreprocessOptions& options = {});
// Applies a stored state to a cohort (which must contain its variables).
std::vector<FeatureSequence> preprocess_with(const Cohort& cohort, const PreprocessState& state);

// Delimited text with one line per time step:
// patient_id,step,label,clinical_risk,<feature columns>. clinical_risk may be
// empty. Values are written in shortest round-trip form.
void write_sequences(const std::vector<FeatureSequence>& sequences, const std::filesystem::path& path);
std::vector<FeatureSequence> read_sequences(const std::filesystem::path& path);

// --- cross-validation splits ----------------------------------------------

struct Fold {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct FoldSplit {
  std::vector<Fold> folds;
  std::vector<std::pair<std::string, std::size_t>> assignment;  // patient -> test fold

  void validate() const;
};

struct LabeledId {
  std::string patient_id;
  int label = 0;
};

// Label-stratified k-fold split; val_fraction of each fold's training
// portion is held out (stratified) for validation. Independent of input order.
FoldSplit split_folds(std::vector<LabeledId> patients, std::size_t k = 5, double val_fraction = 0.2,
                      std::uint64_t seed = 0);

// --- synthetic cohorts ----------------------------------------------------

struct GeneratorConfig {
  std::size_t n_patients = 365;
  double length_mean = 10.0;
  double length_sd = 4.0;
  std::size_t length_min = 3;
  std::size_t length_max = 20;

  std::size_t n_labs = 24;
  std::size_t n_vitals = 4;
  // Extra lab variables recorded for only part of the cohort.
  std::size_t n_sparse_labs = 2;
  double sparse_coverage = 0.5;
  double missing_rate = 0.1;
  // Probability that two adjacent visits exchange their recorded values.
  double interleave_noise = 0.0;

  // Logit contributions of the planted signals.
  double severity_strength = 2.0;
  double drift_strength = 2.0;
  double motif_strength = 2.0;
  double long_range_strength = 2.0;
  double intercept = -0.8;
  // Scale of logistic noise added to the logit; 1 gives Bernoulli(sigmoid),
  // 0 a deterministic label.
  double label_noise = 1.0;

  std::string to_json() const;
  static GeneratorConfig from_json(std::string_view text);
  void validate() const;
};

struct SyntheticCohort {
  Cohort cohort;
  // Noise-free logit of each record's label (the generator's own rule).
  std::vector<double> true_logits;
};

SyntheticCohort generate_synthetic_cohort(const GeneratorConfig& config, std::uint64_t seed);

}  // namespace stattn
