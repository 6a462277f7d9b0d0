#pragma once

#include <span>
#include <vector>

namespace stattn {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // scores >= threshold are called positive
};

// Mann-Whitney statistic: (concordant + 0.5 * tied) / (P * N). Labels are 0/1
// and both classes must be present.
double auc(std::span<const double> scores, std::span<const int> labels);

// One point per distinct score, swept from the highest threshold down,
// starting at (0, 0) and ending at (1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

double trapezoid_area(std::span<const RocPoint> curve);

}  // namespace stattn
