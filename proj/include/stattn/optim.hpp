#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stattn/tensor.hpp"

namespace stattn {

// p <- p - lr * grad(p), then zeroes the gradients. Every parameter must
// already hold a gradient.
void sgd_step(const ParamList& params, double lr);

void zero_grads(const ParamList& params);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;

  bool passed() const;
  double max_rel_error() const;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Denominator floor of the relative error, so entries whose analytic and
  // numeric gradients are both ~0 compare by absolute error.
  double denominator_floor = 1e-6;
};

// Compares the tape gradient of a scalar-valued function with central finite
// differences for every element of every parameter. The function is invoked
// repeatedly and must be deterministic. Parameter gradients are left zeroed.
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& loss_fn,
                           const ParamList& params,
                           const GradCheckOptions& options = {});

}  // namespace stattn
