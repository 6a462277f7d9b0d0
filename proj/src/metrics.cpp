#include "stattn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "stattn/error.hpp"

namespace stattn {
namespace {

struct TieGroup {
  double score;
  double positives;
  double negatives;
};

// Groups of equal scores, highest score first.
std::vector<TieGroup> tie_groups(std::span<const double> scores, std::span<const int> labels, double& total_pos,
                                 double& total_neg) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kShapeMismatch, "scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                                        std::to_string(labels.size()) + ")");
  }
  if (scores.empty()) fail(ErrorCode::kInvalidArgument, "empty scored set");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) fail(ErrorCode::kNumeric, "non-finite score at index " + std::to_string(i));
    if (labels[i] != 0 && labels[i] != 1) fail(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  total_pos = 0;
  total_neg = 0;
  std::vector<TieGroup> groups;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    TieGroup g{s, 0, 0};
    for (; k < order.size() && scores[order[k]] == s; ++k) {
      (labels[order[k]] == 1 ? g.positives : g.negatives) += 1;
    }
    total_pos += g.positives;
    total_neg += g.negatives;
    groups.push_back(g);
  }
  if (total_pos == 0 || total_neg == 0) {
    fail(ErrorCode::kInvalidArgument, "AUC needs at least one positive and one negative label");
  }
  return groups;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  double pos = 0, neg = 0;
  const auto groups = tie_groups(scores, labels, pos, neg);
  // Walk from the lowest score up, counting negatives strictly below.
  double below = 0;
  double credit = 0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    credit += it->positives * below + 0.5 * it->positives * it->negatives;
    below += it->negatives;
  }
  return credit / (pos * neg);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  double pos = 0, neg = 0;
  const auto groups = tie_groups(scores, labels, pos, neg);
  std::vector<RocPoint> curve;
  curve.reserve(groups.size() + 1);
  curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  double tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.positives;
    fp += g.negatives;
    curve.push_back({fp / neg, tp / pos, g.score});
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

}  // namespace stattn
