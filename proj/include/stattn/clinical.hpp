#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stattn/data.hpp"

namespace stattn {

// Points awarded when low <= value < high. Bounds may be infinite.
struct Bracket {
  double low = 0.0;
  double high = 0.0;
  int points = 0;
};

struct ScoredVariable {
  std::string variable;
  std::vector<Bracket> brackets;  // sorted, contiguous, non-overlapping
};

struct ChronicRule {
  std::string flag;  // binary static variable
  int points = 0;
};

// Additive nomogram: per-variable bracket points on first-admission values,
// plus bonus points for chronic-health flags.
struct ScoringTable {
  std::vector<ScoredVariable> variables;
  std::vector<ChronicRule> chronic;
  int max_score = 71;

  void validate() const;
  int max_achievable() const;
  std::string to_json() const;
  static ScoringTable from_json(std::string_view text);
};

ScoringTable load_scoring_table(const std::filesystem::path& path);
void save_scoring_table(const ScoringTable& table, const std::filesystem::path& path);

struct ClinicalScore {
  std::string patient_id;
  int total = 0;
  std::vector<std::pair<std::string, int>> breakdown;
};

// Scores the first visit only. A scored variable that is missing or absent
// from the catalog contributes 0 points.
ClinicalScore clinical_score(const PatientRecord& record, const VariableCatalog& catalog, const ScoringTable& table);

// Monotone map of the total into (0, 1): (total + 0.5) / (max_score + 1).
double clinical_risk(const ClinicalScore& score, const ScoringTable& table);

// Sets FeatureSequence::clinical_risk for every sequence from the matching
// raw record of the cohort.
void attach_clinical_risk(std::vector<FeatureSequence>& sequences, const Cohort& raw, const ScoringTable& table);

}  // namespace stattn
