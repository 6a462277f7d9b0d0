#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "stattn/data.hpp"
#include "stattn/error.hpp"

namespace stattn {

void FoldSplit::validate() const {
  std::unordered_map<std::string, int> test_count;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    std::unordered_set<std::string> seen;
    for (const auto* list : {&fold.train, &fold.validation, &fold.test}) {
      for (const auto& id : *list) {
        if (!seen.insert(id).second) {
          fail(ErrorCode::kInvalidArgument, "fold " + std::to_string(f) + ": patient '" + id + "' appears twice");
        }
      }
    }
    for (const auto& id : fold.test) ++test_count[id];
  }
  for (const auto& [id, fold] : assignment) {
    if (test_count[id] != 1) fail(ErrorCode::kInvalidArgument, "patient '" + id + "' is not tested exactly once");
  }
  if (test_count.size() != assignment.size()) fail(ErrorCode::kInvalidArgument, "test folds contain unassigned patients");
}

FoldSplit split_folds(std::vector<LabeledId> patients, std::size_t k, double val_fraction, std::uint64_t seed) {
  if (k < 2) fail(ErrorCode::kInvalidArgument, "split_folds: need at least 2 folds");
  if (patients.size() < k) {
    fail(ErrorCode::kInvalidArgument, "split_folds: " + std::to_string(patients.size()) + " patients for " +
                                          std::to_string(k) + " folds");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "split_folds: validation fraction must lie in (0, 1)");
  }
  std::sort(patients.begin(), patients.end(),
            [](const LabeledId& a, const LabeledId& b) { return a.patient_id < b.patient_id; });
  for (std::size_t i = 1; i < patients.size(); ++i) {
    if (patients[i].patient_id == patients[i - 1].patient_id) {
      fail(ErrorCode::kInvalidArgument, "split_folds: duplicate patient '" + patients[i].patient_id + "'");
    }
  }
  std::vector<std::string> pos, neg;
  for (const auto& p : patients) (p.label == 1 ? pos : neg).push_back(p.patient_id);
  if (pos.empty() || neg.empty()) fail(ErrorCode::kInvalidArgument, "split_folds: both classes must be present");

  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  // Round-robin over positives then negatives keeps every fold within one
  // patient of the global rate for each class.
  std::vector<std::vector<std::string>> fold_pos(k), fold_neg(k);
  FoldSplit split;
  std::size_t slot = 0;
  for (const auto& id : pos) {
    split.assignment.emplace_back(id, slot % k);
    fold_pos[slot++ % k].push_back(id);
  }
  for (const auto& id : neg) {
    split.assignment.emplace_back(id, slot % k);
    fold_neg[slot++ % k].push_back(id);
  }

  auto hold_out = [&](const std::vector<std::string>& ids) {
    if (ids.size() < 2) return std::size_t{0};
    const auto n = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(ids.size())));
    return std::clamp<std::size_t>(n, 1, ids.size() - 1);
  };

  for (std::size_t f = 0; f < k; ++f) {
    Fold fold;
    fold.test = fold_pos[f];
    fold.test.insert(fold.test.end(), fold_neg[f].begin(), fold_neg[f].end());
    for (const auto* by_class : {&fold_pos, &fold_neg}) {
      std::vector<std::string> rest;
      for (std::size_t g = 0; g < k; ++g)
        if (g != f) rest.insert(rest.end(), (*by_class)[g].begin(), (*by_class)[g].end());
      const std::size_t n_val = hold_out(rest);
      fold.validation.insert(fold.validation.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
      fold.train.insert(fold.train.end(), rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.validation.begin(), fold.validation.end());
    std::sort(fold.test.begin(), fold.test.end());
    split.folds.push_back(std::move(fold));
  }
  std::sort(split.assignment.begin(), split.assignment.end());
  split.validate();
  return split;
}

}  // namespace stattn
