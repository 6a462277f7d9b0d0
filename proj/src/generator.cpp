#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "stattn/data.hpp"
#include "stattn/error.hpp"

namespace stattn {
namespace {

using json = nlohmann::json;

// Role of a variable in the planted signals.
enum class Role { kNone, kMotifLead, kMotifFollow, kEarly, kLate };

struct VariableSpec {
  const char* name;
  double mean;
  double sd;
  // Loading of the patient's latent severity (and its drift) on this variable.
  double severity_loading;
  Role role = Role::kNone;
};

// Lab panel of the reference cohort, with rough adult reference scales.
constexpr VariableSpec kLabs[] = {
    {"lab:fibrinogen", 450, 120, 0.5, Role::kMotifLead},
    {"lab:c_reactive_protein", 80, 50, 0.5, Role::kMotifLead},
    {"lab:prothrombin_inr", 1.1, 0.2, 0.4, Role::kMotifFollow},
    {"lab:prothrombin_time", 13, 2, 0.4, Role::kMotifFollow},
    {"lab:lactate_dehydrogenase", 350, 120, 0.5},
    {"lab:d_dimer", 1.5, 1.0, 0.4, Role::kMotifFollow},
    {"lab:albumin", 3.4, 0.5, -0.5, Role::kEarly},
    {"lab:ferritin", 900, 400, 0.5, Role::kMotifLead},
    {"lab:alanine_aminotransferase", 45, 25, 0.4},
    {"lab:aspartate_aminotransferase", 50, 25, 0.4},
    {"lab:chloride", 102, 4, 0.4},
    {"lab:protein", 6.5, 0.7, 0.4, Role::kEarly},
    {"lab:alkaline_phosphatase", 85, 30, 0.4},
    {"lab:bilirubin", 0.7, 0.3, 0.4},
    {"lab:calcium", 8.8, 0.5, 0.4, Role::kEarly},
    {"lab:creatinine", 1.0, 0.4, 0.5},
    {"lab:glucose", 130, 40, 0.4},
    {"lab:hematocrit", 38, 5, -0.4},
    {"lab:hemoglobin", 12.8, 1.8, 0.4, Role::kLate},
    {"lab:potassium", 4.2, 0.5, 0.4},
    {"lab:platelets", 250, 80, 0.4, Role::kLate},
    {"lab:erythrocytes", 4.3, 0.6, 0.4, Role::kLate},
    {"lab:sodium", 138, 4, 0.4},
    {"lab:leukocytes", 8.5, 3.0, 0.5},
};

constexpr VariableSpec kVitals[] = {
    {"vital:heart_rate", 85, 15, 0.5},
    {"vital:respiratory_rate", 20, 5, 0.5},
    {"vital:temperature", 37.2, 0.8, 0.4},
    {"vital:oxygen_saturation", 94, 3, -0.5},
};

constexpr VariableSpec kSparseLabs[] = {
    {"lab:interleukin_6", 40, 30, 0.4},
    {"lab:procalcitonin", 0.5, 0.4, 0.4},
};

constexpr const char* kHistory[] = {"hist:hypertension", "hist:obesity", "hist:hyperlipidemia",
                                    "hist:diabetes_mellitus"};

// Latent values are squashed into mean +/- kRange sd so that min-max scaling
// spreads them over the unit interval instead of compressing them around
// rare outliers.
constexpr double kRange = 2.5;
constexpr double kSquash = 0.6;
constexpr double kLoadingScale = 3.0;
constexpr double kMotifSpike = 3.0;
constexpr double kLongRangeShift = 2.5;
constexpr double kNoiseAutocorrelation = 0.7;
constexpr double kNoiseScale = 0.5;

VariableSpec spec_at(const VariableSpec* table, std::size_t table_size, std::size_t i, const char* prefix,
                     std::vector<std::string>& names) {
  if (i < table_size) {
    names.emplace_back(table[i].name);
    return table[i];
  }
  names.push_back(std::string(prefix) + std::to_string(i + 1));
  return {nullptr, 100.0, 20.0, 0.0, Role::kNone};
}

}  // namespace

std::string GeneratorConfig::to_json() const {
  json j = {{"n_patients", n_patients},
            {"length_mean", length_mean},
            {"length_sd", length_sd},
            {"length_min", length_min},
            {"length_max", length_max},
            {"n_labs", n_labs},
            {"n_vitals", n_vitals},
            {"n_sparse_labs", n_sparse_labs},
            {"sparse_coverage", sparse_coverage},
            {"missing_rate", missing_rate},
            {"interleave_noise", interleave_noise},
            {"severity_strength", severity_strength},
            {"drift_strength", drift_strength},
            {"motif_strength", motif_strength},
            {"long_range_strength", long_range_strength},
            {"intercept", intercept},
            {"label_noise", label_noise}};
  return j.dump(2);
}

GeneratorConfig GeneratorConfig::from_json(std::string_view text) {
  GeneratorConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid generator config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kParse, "generator config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    try {
      if (key == "n_patients") c.n_patients = it->get<std::size_t>();
      else if (key == "length_mean") c.length_mean = it->get<double>();
      else if (key == "length_sd") c.length_sd = it->get<double>();
      else if (key == "length_min") c.length_min = it->get<std::size_t>();
      else if (key == "length_max") c.length_max = it->get<std::size_t>();
      else if (key == "n_labs") c.n_labs = it->get<std::size_t>();
      else if (key == "n_vitals") c.n_vitals = it->get<std::size_t>();
      else if (key == "n_sparse_labs") c.n_sparse_labs = it->get<std::size_t>();
      else if (key == "sparse_coverage") c.sparse_coverage = it->get<double>();
      else if (key == "missing_rate") c.missing_rate = it->get<double>();
      else if (key == "interleave_noise") c.interleave_noise = it->get<double>();
      else if (key == "severity_strength") c.severity_strength = it->get<double>();
      else if (key == "drift_strength") c.drift_strength = it->get<double>();
      else if (key == "motif_strength") c.motif_strength = it->get<double>();
      else if (key == "long_range_strength") c.long_range_strength = it->get<double>();
      else if (key == "intercept") c.intercept = it->get<double>();
      else if (key == "label_noise") c.label_noise = it->get<double>();
      else fail(ErrorCode::kParse, "generator config: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      fail(ErrorCode::kParse, "generator config: bad value for '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

void GeneratorConfig::validate() const {
  if (n_patients == 0) fail(ErrorCode::kInvalidArgument, "generator: n_patients must be positive");
  if (n_labs + n_vitals == 0) fail(ErrorCode::kInvalidArgument, "generator: no longitudinal variables");
  if (length_min == 0 || length_min > length_max) fail(ErrorCode::kInvalidArgument, "generator: bad length bounds");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) fail(ErrorCode::kInvalidArgument, "generator: missing_rate must lie in [0, 1)");
  if (!(sparse_coverage >= 0.0 && sparse_coverage <= 1.0)) fail(ErrorCode::kInvalidArgument, "generator: sparse_coverage must lie in [0, 1]");
  if (!(interleave_noise >= 0.0 && interleave_noise <= 1.0)) fail(ErrorCode::kInvalidArgument, "generator: interleave_noise must lie in [0, 1]");
  if (!(label_noise >= 0.0) || !(length_sd >= 0.0)) fail(ErrorCode::kInvalidArgument, "generator: negative scale");
  const bool needs_carriers = motif_strength != 0.0 || long_range_strength != 0.0;
  if (needs_carriers && n_labs < std::size(kLabs)) {
    fail(ErrorCode::kInvalidArgument, "generator: planted signals need at least " + std::to_string(std::size(kLabs)) + " labs");
  }
  if (motif_strength != 0.0 && length_min < 3) fail(ErrorCode::kInvalidArgument, "generator: the motif needs length_min >= 3");
}

SyntheticCohort generate_synthetic_cohort(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto coin = [&](double p) { return unit(rng) < p; };

  SyntheticCohort out;
  Cohort& cohort = out.cohort;
  std::vector<std::string> names;
  std::vector<VariableSpec> specs;
  for (std::size_t i = 0; i < config.n_labs; ++i) specs.push_back(spec_at(kLabs, std::size(kLabs), i, "lab:lab_", names));
  for (std::size_t i = 0; i < config.n_vitals; ++i) specs.push_back(spec_at(kVitals, std::size(kVitals), i, "vital:vital_", names));
  for (std::size_t i = 0; i < config.n_sparse_labs; ++i) {
    specs.push_back(spec_at(kSparseLabs, std::size(kSparseLabs), i, "lab:sparse_", names));
  }
  for (const auto& n : names) cohort.catalog.longitudinal.push_back(describe_variable(n, Modality::kLabs));
  for (const char* n : {"demo:age", "img:rale"}) cohort.catalog.statics.push_back(describe_variable(n, Modality::kDemographic));
  for (const char* n : kHistory) cohort.catalog.statics.push_back(describe_variable(n, Modality::kHistory));

  const std::size_t n_long = specs.size();
  const std::size_t first_sparse = config.n_labs + config.n_vitals;
  const double innovation = std::sqrt(1.0 - kNoiseAutocorrelation * kNoiseAutocorrelation);

  for (std::size_t p = 0; p < config.n_patients; ++p) {
    PatientRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "P%04zu", p + 1);
    rec.patient_id = id;

    const double raw_len = std::round(config.length_mean + config.length_sd * normal(rng));
    const auto steps = static_cast<std::size_t>(std::clamp(raw_len, static_cast<double>(config.length_min),
                                                           static_cast<double>(config.length_max)));
    const double severity = normal(rng);
    // Drift of severity over the stay; positive means deterioration.
    const double drift = normal(rng);
    auto phase = [&](std::size_t t) { return steps > 1 ? static_cast<double>(t) / static_cast<double>(steps - 1) : 0.0; };

    // Latent standardized values: severity loading + AR(1) noise.
    std::vector<std::vector<double>> z(steps, std::vector<double>(n_long));
    for (std::size_t v = 0; v < n_long; ++v) {
      double e = normal(rng);
      for (std::size_t t = 0; t < steps; ++t) {
        if (t > 0) e = kNoiseAutocorrelation * e + innovation * normal(rng);
        z[t][v] = kLoadingScale * specs[v].severity_loading * (severity + 2.0 * drift * phase(t)) + kNoiseScale * e;
      }
    }
    std::vector<std::vector<bool>> pinned(steps, std::vector<bool>(n_long, false));
    auto mark = [&](std::size_t t, Role role, double shift) {
      for (std::size_t v = 0; v < n_long; ++v) {
        if (specs[v].role != role) continue;
        z[t][v] += shift;
        pinned[t][v] = true;
      }
    };

    double logit = config.intercept + config.severity_strength * severity + config.drift_strength * drift;

    if (config.motif_strength != 0.0) {
      // Half the patients have a flare: the lead block spikes, then the
      // follow block 1-2 visits later. A flare in that order carries more
      // risk than one in reverse order, which only order-aware models see.
      if (coin(0.5)) {
        const bool ordered = coin(0.5);
        const std::size_t gap = steps >= 4 && coin(0.5) ? 2 : 1;
        std::uniform_int_distribution<std::size_t> start_dist(0, steps - 1 - gap);
        const std::size_t start = start_dist(rng);
        mark(start, ordered ? Role::kMotifLead : Role::kMotifFollow, kMotifSpike);
        mark(start + gap, ordered ? Role::kMotifFollow : Role::kMotifLead, kMotifSpike);
        logit += config.motif_strength * (ordered ? 0.75 : 0.25);
      } else {
        logit -= config.motif_strength * 0.5;
      }
    }

    if (config.long_range_strength != 0.0) {
      // Sign interaction between a block at the first visit and another at
      // the last visit; each alone carries no information.
      const double early = coin(0.5) ? 1.0 : -1.0;
      const double late = coin(0.5) ? 1.0 : -1.0;
      mark(0, Role::kEarly, kLongRangeShift * early);
      mark(steps - 1, Role::kLate, kLongRangeShift * late);
      logit += config.long_range_strength * 0.5 * early * late;
    }

    out.true_logits.push_back(logit);
    if (config.label_noise > 0.0) {
      const double u = std::clamp(unit(rng), 1e-12, 1.0 - 1e-12);
      logit += config.label_noise * std::log(u / (1.0 - u));
    }
    rec.label = logit > 0.0 ? 1 : 0;

    std::vector<bool> has_sparse(n_long, true);
    for (std::size_t v = first_sparse; v < n_long; ++v) has_sparse[v] = coin(config.sparse_coverage);

    int day = 0;
    std::uniform_int_distribution<int> gap_days(1, 6);
    for (std::size_t t = 0; t < steps; ++t) {
      Visit visit{day, std::vector<Observation>(n_long)};
      day += gap_days(rng);
      for (std::size_t v = 0; v < n_long; ++v) {
        const bool observed = pinned[t][v] || (has_sparse[v] && !coin(config.missing_rate));
        if (observed) visit.values[v] = specs[v].mean + kRange * specs[v].sd * std::tanh(kSquash * z[t][v]);
      }
      rec.visits.push_back(std::move(visit));
    }
    // Short-term randomness: neighbouring visits may swap their records.
    for (std::size_t t = 0; t + 1 < steps; ++t) {
      if (config.interleave_noise > 0.0 && coin(config.interleave_noise)) {
        std::swap(rec.visits[t].values, rec.visits[t + 1].values);
      }
    }

    const double age = std::clamp(62.0 + 14.0 * (0.5 * severity + 0.85 * normal(rng)), 18.0, 100.0);
    const double rale = std::clamp(std::round(18.0 + 8.0 * (0.6 * severity + 0.8 * normal(rng))), 0.0, 48.0);
    rec.static_values.push_back(coin(config.missing_rate * 0.5) ? Observation{} : Observation{std::round(age)});
    rec.static_values.push_back(coin(config.missing_rate * 0.5) ? Observation{} : Observation{rale});
    for (std::size_t h = 0; h < std::size(kHistory); ++h) {
      const double prob = 1.0 / (1.0 + std::exp(-(-0.8 + 0.6 * severity)));
      rec.static_values.push_back(coin(prob) ? 1.0 : 0.0);
    }
    cohort.records.push_back(std::move(rec));
  }
  cohort.validate();
  return out;
}

}  // namespace stattn
