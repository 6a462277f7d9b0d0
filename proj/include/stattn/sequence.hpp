#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stattn/tensor.hpp"

namespace stattn {

// One preprocessed patient: a T x D matrix of values in [0, 1] with a
// validity mask over time steps.
struct FeatureSequence {
  Tensor matrix;
  std::vector<bool> mask;
  std::vector<std::string> feature_names;
  std::string patient_id;
  int label = 0;
  // Ranking statistic of the clinical baseline, mapped into (0, 1). Only set
  // when a scoring table was supplied during assembly.
  std::optional<double> clinical_risk;

  std::size_t length() const { return mask.size(); }
  std::size_t width() const { return matrix.cols(); }
};

// T x H latent feature map produced by an encoder. Masked rows are zero.
struct HiddenMap {
  Tensor values;
  std::vector<bool> mask;

  std::size_t length() const { return mask.size(); }
  std::size_t width() const { return values.cols(); }
};

}  // namespace stattn
