#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "helpers.hpp"
#include "stattn/data.hpp"
#include "stattn/error.hpp"
#include "stattn/metrics.hpp"

using namespace stattn;
using test_util::TempDir;
using test_util::write_file;

namespace {

const char* kStatic =
    "patient_id,label,demo:age,hist:obesity\n"
    "A,1,60,1\n"
    "B,0,,0\n";

const char* kVisits =
    "patient_id,day_index,lab:crp,vital:heart_rate\n"
    "A,0,1.5,80\n"
    "A,2,,82\n"
    "B,0,2.0,\n";

Cohort load_fixture(const char* statics, const char* visits) {
  TempDir dir;
  write_file(dir / "static.csv", statics);
  write_file(dir / "visits.csv", visits);
  return load_cohort(dir.path());
}

bool same_records(const PatientRecord& a, const PatientRecord& b) {
  if (a.patient_id != b.patient_id || a.label != b.label || a.static_values != b.static_values) return false;
  if (a.visits.size() != b.visits.size()) return false;
  for (std::size_t i = 0; i < a.visits.size(); ++i)
    if (a.visits[i].day_index != b.visits[i].day_index || a.visits[i].values != b.visits[i].values) return false;
  return true;
}

bool same_cohort(const Cohort& a, const Cohort& b) {
  if (a.records.size() != b.records.size()) return false;
  auto names = [](const std::vector<VariableInfo>& v) {
    std::vector<std::string> out;
    for (const auto& i : v) out.push_back(i.name);
    return out;
  };
  if (names(a.catalog.statics) != names(b.catalog.statics)) return false;
  if (names(a.catalog.longitudinal) != names(b.catalog.longitudinal)) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i)
    if (!same_records(a.records[i], b.records[i])) return false;
  return true;
}

GeneratorConfig small_generator(std::size_t n = 60) {
  GeneratorConfig c;
  c.n_patients = n;
  c.missing_rate = 0.3;
  return c;
}

// One longitudinal variable `lab:x`, one visit per value, single patient.
Cohort single_series(const std::vector<Observation>& series) {
  Cohort c;
  c.catalog.longitudinal.push_back(describe_variable("lab:x", Modality::kLabs));
  PatientRecord r;
  r.patient_id = "P";
  for (std::size_t t = 0; t < series.size(); ++t) r.visits.push_back({static_cast<int>(t), {series[t]}});
  c.records.push_back(r);
  return c;
}

std::vector<double> series_of(const PatientRecord& r) {
  std::vector<double> out;
  for (const auto& v : r.visits) out.push_back(v.values.at(0).value());
  return out;
}

double oracle_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<LabeledId> labeled(std::size_t n, std::size_t positives) {
  std::vector<LabeledId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"p" + std::to_string(i), i < positives ? 1 : 0});
  return out;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("load_cohort reads the two-patient fixture") {
  const Cohort c = load_fixture(kStatic, kVisits);
  REQUIRE(c.records.size() == 2);
  CHECK(c.records[0].patient_id == "A");
  CHECK(c.records[0].visits.size() == 2);
  CHECK(c.records[1].visits.size() == 1);
  CHECK(c.records[0].label == 1);
  CHECK_FALSE(c.records[1].static_values[0].has_value());
  CHECK(c.records[0].static_values[1] == 1.0);
  CHECK_FALSE(c.records[0].visits[1].values[0].has_value());
  CHECK(c.records[0].visits[1].values[1] == 82.0);
  CHECK(c.catalog.statics[1].kind == VariableKind::kBinary);
  CHECK(c.catalog.longitudinal[1].modality == Modality::kVitals);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("load_cohort sorts shuffled visit rows by day") {
  const Cohort c = load_fixture(kStatic,
                                "patient_id,day_index,lab:crp,vital:heart_rate\n"
                                "A,5,3,83\n"
                                "B,0,2.0,\n"
                                "A,0,1.5,80\n"
                                "A,2,,82\n");
  const auto& visits = c.records[0].visits;
  REQUIRE(visits.size() == 3);
  CHECK(visits[0].day_index == 0);
  CHECK(visits[1].day_index == 2);
  CHECK(visits[2].day_index == 5);
  CHECK(visits[2].values[0] == 3.0);
}

TEST_CASE("load_cohort rejects malformed files with their location") {
  try {
    load_fixture(kStatic, "patient_id,lab:crp\nA,1\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("day_index") != std::string::npos);
  }
  try {
    load_fixture(kStatic, "patient_id,day_index,lab:crp\nA,0,1\nA,1,abc\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(what.find(":3:") != std::string::npos);
    CHECK(what.find("lab:crp") != std::string::npos);
  }
  CHECK_THROWS_AS(load_fixture(kStatic, "patient_id,day_index,lab:crp\nA,0,1\nA,0,2\n"), Error);
  CHECK_THROWS_AS(load_fixture(kStatic, "patient_id,day_index,lab:crp\nZ,0,1\n"), Error);
  CHECK_THROWS_AS(load_fixture("patient_id,label\nA,2\n", "patient_id,day_index,lab:crp\nA,0,1\n"), Error);
  CHECK_THROWS_AS(load_cohort("/nonexistent/cohort"), Error);
}

TEST_CASE("write_cohort then load_cohort is the identity on a generated cohort") {
  const Cohort c = generate_synthetic_cohort(small_generator(), 3).cohort;
  TempDir dir;
  write_cohort(c, dir.path());
  const Cohort back = load_cohort(dir.path());
  CHECK(same_cohort(c, back));
}

TEST_CASE("prevalence filter examples") {
  Cohort c;
  c.catalog.longitudinal = {describe_variable("lab:always", Modality::kLabs), describe_variable("lab:half", Modality::kLabs)};
  for (int i = 0; i < 4; ++i) {
    PatientRecord r;
    r.patient_id = "p" + std::to_string(i);
    r.visits.push_back({0, {1.0, i % 2 ? Observation(2.0) : std::nullopt}});
    c.records.push_back(r);
  }
  const Cohort kept = prevalence_filter(c, 0.95);
  REQUIRE(kept.catalog.longitudinal.size() == 1);
  CHECK(kept.catalog.longitudinal[0].name == "lab:always");
  CHECK(kept.records[0].visits[0].values.size() == 1);
  CHECK(prevalence_filter(c, 0.4).catalog.longitudinal.size() == 2);
  // Exactly at the threshold is not "more than".
  CHECK(prevalence_filter(c, 0.5).catalog.longitudinal.size() == 1);

  c.catalog.longitudinal.resize(1);
  c.catalog.longitudinal[0].name = "lab:never";
  for (auto& r : c.records) r.visits[0].values = {std::nullopt};
  CHECK_THROWS_AS(prevalence_filter(c, 0.95), Error);
  CHECK_THROWS_AS(prevalence_filter(c, 0.0), Error);
}

TEST_CASE("prevalence filter matches a per-variable patient census and ignores order") {
  GeneratorConfig g = small_generator(200);
  g.n_sparse_labs = 3;
  g.sparse_coverage = 0.7;
  g.missing_rate = 0.6;
  const Cohort c = generate_synthetic_cohort(g, 11).cohort;
  for (double threshold : {0.5, 0.8, 0.95, 0.99}) {
    std::vector<std::string> expected;
    for (std::size_t v = 0; v < c.catalog.longitudinal.size(); ++v) {
      std::size_t patients = 0;
      for (const auto& r : c.records) {
        bool seen = false;
        for (const auto& visit : r.visits) seen = seen || visit.values[v].has_value();
        patients += seen;
      }
      if (static_cast<double>(patients) > threshold * static_cast<double>(c.records.size()))
        expected.push_back(c.catalog.longitudinal[v].name);
    }
    std::vector<std::string> actual;
    for (const auto& v : prevalence_filter(c, threshold).catalog.longitudinal) actual.push_back(v.name);
    CHECK(actual == expected);

    Cohort shuffled = c;
    std::mt19937_64 rng(5);
    std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
    std::vector<std::string> again;
    for (const auto& v : prevalence_filter(shuffled, threshold).catalog.longitudinal) again.push_back(v.name);
    CHECK(again == actual);
  }
}

TEST_CASE("minmax normalization examples") {
  const NormalizedCohort n = minmax_normalize(single_series({2.0, 4.0, 6.0}));
  CHECK(series_of(n.cohort.records[0]) == std::vector<double>{0.0, 0.5, 1.0});
  REQUIRE(n.scaling.find("lab:x"));
  CHECK(n.scaling.find("lab:x")->min == 2.0);
  CHECK(n.scaling.find("lab:x")->max == 6.0);

  const NormalizedCohort flat = minmax_normalize(single_series({7.0, 7.0, 7.0}));
  CHECK(series_of(flat.cohort.records[0]) == std::vector<double>{0.0, 0.0, 0.0});

  // Stored statistics clip values outside the original range.
  const Cohort wider = apply_scaling(single_series({0.0, 4.0, 9.0}), n.scaling);
  CHECK(series_of(wider.records[0]) == std::vector<double>{0.0, 0.5, 1.0});

  CHECK_THROWS_AS(minmax_normalize(single_series({std::nullopt})), Error);
  CHECK(ScalingTable::from_json(n.scaling.to_json()).entries.at(0).max == 6.0);
}

TEST_CASE("minmax normalization reaches both ends of every variable and is idempotent") {
  const Cohort c = generate_synthetic_cohort(small_generator(80), 7).cohort;
  const NormalizedCohort n = minmax_normalize(c);
  auto extrema = [](const Cohort& cohort, bool longitudinal, std::size_t var) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& r : cohort.records) {
      if (longitudinal) {
        for (const auto& v : r.visits)
          if (v.values[var]) lo = std::min(lo, *v.values[var]), hi = std::max(hi, *v.values[var]);
      } else if (r.static_values[var]) {
        lo = std::min(lo, *r.static_values[var]);
        hi = std::max(hi, *r.static_values[var]);
      }
    }
    return std::pair{lo, hi};
  };
  for (std::size_t v = 0; v < c.catalog.longitudinal.size(); ++v) {
    const auto [lo, hi] = extrema(n.cohort, true, v);
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
  }
  for (std::size_t v = 0; v < c.catalog.statics.size(); ++v) {
    const auto [lo, hi] = extrema(n.cohort, false, v);
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    if (c.catalog.statics[v].kind == VariableKind::kNumeric) CHECK(lo == 0.0);
  }
  const NormalizedCohort twice = minmax_normalize(n.cohort);
  CHECK(same_cohort(twice.cohort, n.cohort));
  CHECK(same_cohort(apply_scaling(c, n.scaling), n.cohort));
}

TEST_CASE("forward fill examples") {
  const Cohort c = single_series({1.0, std::nullopt, std::nullopt});
  const ImputationTable medians{{0.3}, {}};
  CHECK(series_of(forward_fill(c.records[0], c.catalog, medians)) == std::vector<double>{1.0, 1.0, 1.0});

  const Cohort full = single_series({0.2, 0.9, 0.1});
  CHECK(series_of(forward_fill(full.records[0], full.catalog, medians)) == std::vector<double>{0.2, 0.9, 0.1});

  const Cohort leading = single_series({std::nullopt, 0.4});
  CHECK(series_of(forward_fill(leading.records[0], leading.catalog, medians)) == std::vector<double>{0.3, 0.4});
}

TEST_CASE("leading gaps take the cohort median computed over the generated cohort") {
  const Cohort c = generate_synthetic_cohort(small_generator(50), 13).cohort;
  const ImputationTable medians = cohort_medians(c);
  for (std::size_t v = 0; v < c.catalog.longitudinal.size(); ++v) {
    std::vector<double> all;
    for (const auto& r : c.records)
      for (const auto& visit : r.visits)
        if (visit.values[v]) all.push_back(*visit.values[v]);
    CHECK(medians.longitudinal[v] == oracle_median(all));
  }
  for (const auto& r : c.records) {
    const PatientRecord filled = forward_fill(r, c.catalog, medians);
    for (std::size_t v = 0; v < c.catalog.longitudinal.size(); ++v) {
      Observation last;
      for (std::size_t t = 0; t < r.visits.size(); ++t) {
        const Observation& raw = r.visits[t].values[v];
        const double got = filled.visits[t].values[v].value();
        if (raw) {
          CHECK(got == *raw);
          last = raw;
        } else {
          CHECK(got == (last ? *last : medians.longitudinal[v]));
        }
      }
    }
    for (std::size_t s = 0; s < c.catalog.statics.size(); ++s) {
      const auto& raw = r.static_values[s];
      const double got = filled.static_values[s].value();
      if (raw) CHECK(got == *raw);
      else if (c.catalog.statics[s].kind == VariableKind::kBinary) CHECK(got == 0.0);
      else CHECK(got == medians.statics[s]);
    }
  }
}

TEST_CASE("assemble_features lays out longitudinal, static numeric and flag blocks") {
  GeneratorConfig g = small_generator(40);
  g.n_sparse_labs = 0;
  g.length_min = 3;
  const Cohort c = generate_synthetic_cohort(g, 17).cohort;
  CHECK(c.catalog.longitudinal.size() == 28);
  CHECK(c.catalog.statics.size() == 6);
  const NormalizedCohort n = minmax_normalize(c);
  const ImputationTable medians = cohort_medians(n.cohort);
  const PatientRecord& raw = n.cohort.records[0];
  PatientRecord three = raw;
  three.visits.resize(3);
  const FeatureSequence s = assemble_features(forward_fill(three, n.cohort.catalog, medians), n.cohort.catalog);
  CHECK(s.matrix.shape() == Shape{3, 34});
  CHECK(s.mask == std::vector<bool>{true, true, true});
  CHECK(s.feature_names.size() == 34);
  CHECK(s.feature_names[0].rfind("lab:", 0) == 0);
  CHECK(s.feature_names[28] == "demo:age");
  CHECK(s.feature_names[33].rfind("hist:", 0) == 0);
  for (std::size_t col = 28; col < 34; ++col) {
    CHECK(s.matrix.at(0, col) == s.matrix.at(1, col));
    CHECK(s.matrix.at(0, col) == s.matrix.at(2, col));
  }
  for (std::size_t col = 30; col < 34; ++col) CHECK((s.matrix.at(0, col) == 0.0 || s.matrix.at(0, col) == 1.0));

  PatientRecord broken = forward_fill(three, n.cohort.catalog, medians);
  broken.visits[1].values.pop_back();
  CHECK_THROWS_AS(assemble_features(broken, n.cohort.catalog), Error);
  PatientRecord gap = forward_fill(three, n.cohort.catalog, medians);
  gap.visits[2].values[0].reset();
  CHECK_THROWS_AS(assemble_features(gap, n.cohort.catalog), Error);
}

TEST_CASE("assembled column order follows the catalog under a random permutation") {
  GeneratorConfig g = small_generator(30);
  g.missing_rate = 0.0;
  g.n_sparse_labs = 0;
  Cohort c = minmax_normalize(generate_synthetic_cohort(g, 19).cohort).cohort;
  std::mt19937_64 rng(23);
  std::vector<std::size_t> perm(c.catalog.longitudinal.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);

  Cohort permuted = c;
  for (std::size_t i = 0; i < perm.size(); ++i) permuted.catalog.longitudinal[i] = c.catalog.longitudinal[perm[i]];
  for (std::size_t r = 0; r < c.records.size(); ++r)
    for (std::size_t t = 0; t < c.records[r].visits.size(); ++t)
      for (std::size_t i = 0; i < perm.size(); ++i)
        permuted.records[r].visits[t].values[i] = c.records[r].visits[t].values[perm[i]];

  const ImputationTable medians = cohort_medians(c);
  const ImputationTable permuted_medians = cohort_medians(permuted);
  const auto names = feature_names(permuted.catalog);
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(names[i] == c.catalog.longitudinal[perm[i]].name);
  for (std::size_t r = 0; r < c.records.size(); ++r) {
    const auto a = assemble_features(forward_fill(c.records[r], c.catalog, medians), c.catalog);
    const auto b = assemble_features(forward_fill(permuted.records[r], permuted.catalog, permuted_medians), permuted.catalog);
    for (std::size_t t = 0; t < a.length(); ++t) {
      for (std::size_t i = 0; i < perm.size(); ++i) CHECK(b.matrix.at(t, i) == a.matrix.at(t, perm[i]));
      for (std::size_t i = perm.size(); i < a.width(); ++i) CHECK(b.matrix.at(t, i) == a.matrix.at(t, i));
    }
  }
}

TEST_CASE("preprocess output lies in [0, 1] and does not depend on patient order") {
  const Cohort c = generate_synthetic_cohort(small_generator(120), 29).cohort;
  const PreparedCohort p = preprocess(c);
  CHECK(p.sequences.size() == c.records.size());
  // The two half-covered sparse labs fall to the prevalence filter.
  CHECK(p.sequences[0].width() == 34);
  for (const auto& s : p.sequences) {
    for (double v : s.matrix.data()) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  Cohort shuffled = c;
  std::mt19937_64 rng(31);
  std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
  std::map<std::string, std::vector<double>> by_id;
  for (const auto& s : p.sequences) by_id[s.patient_id] = test_util::values(s.matrix);
  for (const auto& s : preprocess(shuffled).sequences) CHECK(test_util::values(s.matrix) == by_id.at(s.patient_id));

  const PreprocessState state = PreprocessState::from_json(p.state.to_json());
  const auto again = preprocess_with(c, state);
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(test_util::values(again[i].matrix) == test_util::values(p.sequences[i].matrix));

  PreprocessOptions labs_only;
  labs_only.modalities = {Modality::kLabs};
  const PreparedCohort labs = preprocess(c, labs_only);
  for (const auto& name : labs.sequences[0].feature_names) CHECK(name.rfind("lab:", 0) == 0);
  CHECK(parse_modality_list("all") == all_modalities());
  CHECK_THROWS_AS(parse_modality_list("labs,genes"), Error);
}

TEST_CASE("sequence files round-trip exactly") {
  auto seqs = preprocess(generate_synthetic_cohort(small_generator(10), 37).cohort).sequences;
  seqs[0].clinical_risk = 0.1 + 0.2;
  TempDir dir;
  write_sequences(seqs, dir / "seq.csv");
  const auto back = read_sequences(dir / "seq.csv");
  REQUIRE(back.size() == seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    CHECK(back[i].patient_id == seqs[i].patient_id);
    CHECK(back[i].label == seqs[i].label);
    CHECK(back[i].clinical_risk == seqs[i].clinical_risk);
    CHECK(back[i].feature_names == seqs[i].feature_names);
    CHECK(back[i].mask == seqs[i].mask);
    CHECK(test_util::values(back[i].matrix) == test_util::values(seqs[i].matrix));
  }
}

TEST_CASE("split_folds stratifies ten patients perfectly") {
  const FoldSplit split = split_folds(labeled(10, 5), 5, 0.2, 1);
  REQUIRE(split.folds.size() == 5);
  std::set<std::string> tested;
  for (const auto& fold : split.folds) {
    CHECK(fold.test.size() == 2);
    int positives = 0;
    for (const auto& id : fold.test) positives += std::stoi(id.substr(1)) < 5;
    CHECK(positives == 1);
    for (const auto& id : fold.test) CHECK(tested.insert(id).second);
  }
  CHECK(tested.size() == 10);
  CHECK_NOTHROW(split.validate());
}

TEST_CASE("split_folds partitions, stratifies and carves out validation") {
  const auto patients = labeled(365, 73);
  const FoldSplit split = split_folds(patients, 5, 0.2, 42);
  CHECK_NOTHROW(split.validate());
  std::map<std::string, int> label;
  for (const auto& p : patients) label[p.patient_id] = p.label;
  const double global_rate = 73.0 / 365.0;
  std::map<std::string, int> test_count;
  for (const auto& fold : split.folds) {
    std::set<std::string> train(fold.train.begin(), fold.train.end());
    std::set<std::string> val(fold.validation.begin(), fold.validation.end());
    std::set<std::string> test(fold.test.begin(), fold.test.end());
    CHECK(train.size() + val.size() + test.size() == 365);
    for (const auto& id : test) {
      CHECK_FALSE(train.count(id));
      CHECK_FALSE(val.count(id));
      ++test_count[id];
    }
    for (const auto& id : val) CHECK_FALSE(train.count(id));
    int positives = 0;
    for (const auto& id : test) positives += label[id];
    CHECK(std::abs(positives - global_rate * static_cast<double>(test.size())) <= 1.0);
    const double portion = static_cast<double>(train.size() + val.size());
    CHECK(std::abs(static_cast<double>(val.size()) - 0.2 * portion) <= 2.0);
    int val_positives = 0;
    for (const auto& id : val) val_positives += label[id];
    CHECK(val_positives > 0);
  }
  CHECK(test_count.size() == 365);
  for (const auto& [id, n] : test_count) CHECK(n == 1);
}

TEST_CASE("split_folds is deterministic and independent of input order") {
  const auto patients = labeled(50, 20);
  const FoldSplit a = split_folds(patients, 5, 0.2, 9);
  const FoldSplit b = split_folds(patients, 5, 0.2, 9);
  auto reversed = patients;
  std::reverse(reversed.begin(), reversed.end());
  const FoldSplit c = split_folds(reversed, 5, 0.2, 9);
  const FoldSplit d = split_folds(patients, 5, 0.2, 10);
  bool differs = false;
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(a.folds[f].test == b.folds[f].test);
    CHECK(a.folds[f].train == b.folds[f].train);
    CHECK(a.folds[f].validation == b.folds[f].validation);
    CHECK(a.folds[f].test == c.folds[f].test);
    CHECK(a.folds[f].validation == c.folds[f].validation);
    differs = differs || a.folds[f].test != d.folds[f].test;
    int positives = 0;
    for (const auto& id : d.folds[f].test) positives += std::stoi(id.substr(1)) < 20;
    CHECK(positives == 4);
  }
  CHECK(differs);
}

TEST_CASE("split_folds rejects degenerate cohorts") {
  CHECK_THROWS_AS(split_folds(labeled(10, 0), 5, 0.2, 1), Error);
  CHECK_THROWS_AS(split_folds(labeled(10, 10), 5, 0.2, 1), Error);
  CHECK_THROWS_AS(split_folds(labeled(4, 2), 5, 0.2, 1), Error);
  auto dup = labeled(10, 5);
  dup[3].patient_id = dup[4].patient_id;
  CHECK_THROWS_AS(split_folds(dup, 5, 0.2, 1), Error);
}

TEST_CASE("generator default shape") {
  const SyntheticCohort s = generate_synthetic_cohort(GeneratorConfig{}, 1);
  const Cohort& c = s.cohort;
  CHECK(c.records.size() == 365);
  CHECK(s.true_logits.size() == 365);
  CHECK_NOTHROW(c.validate());
  double total = 0.0;
  int positives = 0;
  for (const auto& r : c.records) {
    CHECK(r.visits.size() >= 3);
    CHECK(r.visits.size() <= 20);
    total += static_cast<double>(r.visits.size());
    positives += r.label;
  }
  CHECK(total / 365.0 == doctest::Approx(10.0).epsilon(0.1));
  CHECK(positives > 40);
  CHECK(positives < 325);
  CHECK(preprocess(c).sequences[0].width() == 34);
}

TEST_CASE("generator ground-truth rule separates noise-free labels") {
  GeneratorConfig g;
  g.label_noise = 0.0;
  g.severity_strength = 4.0;
  g.motif_strength = 4.0;
  g.long_range_strength = 4.0;
  const SyntheticCohort s = generate_synthetic_cohort(g, 3);
  std::vector<int> labels;
  for (const auto& r : s.cohort.records) labels.push_back(r.label);
  CHECK(auc(s.true_logits, labels) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("generator without planted signal gives feature-independent labels") {
  GeneratorConfig g;
  g.severity_strength = g.drift_strength = g.motif_strength = g.long_range_strength = 0.0;
  g.intercept = 0.0;
  const SyntheticCohort s = generate_synthetic_cohort(g, 5);
  for (double logit : s.true_logits) CHECK(logit == 0.0);
  int positives = 0;
  for (const auto& r : s.cohort.records) positives += r.label;
  CHECK(std::abs(positives - 182.5) < 4 * std::sqrt(365 * 0.25));
}

TEST_CASE("generator is bitwise deterministic per seed") {
  TempDir a, b, c;
  write_cohort(generate_synthetic_cohort(GeneratorConfig{}, 8).cohort, a.path());
  write_cohort(generate_synthetic_cohort(GeneratorConfig{}, 8).cohort, b.path());
  write_cohort(generate_synthetic_cohort(GeneratorConfig{}, 9).cohort, c.path());
  CHECK(test_util::read_file(a / "visits.csv") == test_util::read_file(b / "visits.csv"));
  CHECK(test_util::read_file(a / "static.csv") == test_util::read_file(b / "static.csv"));
  CHECK(test_util::read_file(a / "visits.csv") != test_util::read_file(c / "visits.csv"));
}

TEST_CASE("generator config validation and round-trip") {
  GeneratorConfig g;
  g.n_patients = 0;
  CHECK_THROWS_AS(generate_synthetic_cohort(g, 1), Error);
  g = GeneratorConfig{};
  g.n_labs = 0;
  g.n_vitals = 0;
  CHECK_THROWS_AS(generate_synthetic_cohort(g, 1), Error);
  g = GeneratorConfig{};
  g.missing_rate = 1.0;
  CHECK_THROWS_AS(g.validate(), Error);

  g = GeneratorConfig{};
  g.n_patients = 17;
  g.interleave_noise = 0.25;
  g.motif_strength = 1.5;
  const GeneratorConfig back = GeneratorConfig::from_json(g.to_json());
  CHECK(back.to_json() == g.to_json());
  CHECK(back.n_patients == 17);
  CHECK_THROWS_AS(GeneratorConfig::from_json(R"({"n_patient": 3})"), Error);
}

TEST_CASE("interleave noise exchanges adjacent visits without changing the cohort shape") {
  GeneratorConfig g = small_generator(40);
  const Cohort plain = generate_synthetic_cohort(g, 4).cohort;
  g.interleave_noise = 0.5;
  const Cohort mixed = generate_synthetic_cohort(g, 4).cohort;
  CHECK_NOTHROW(mixed.validate());
  CHECK(mixed.records.size() == plain.records.size());
}

}  // TEST_SUITE
