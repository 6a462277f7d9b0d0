#include "stattn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "stattn/error.hpp"

namespace stattn {

void sgd_step(const ParamList& params, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorCode::kInvalidArgument, "sgd_step: learning rate must be finite and >= 0");
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) fail(ErrorCode::kInvalidArgument, "sgd_step: parameter '" + p.name + "' has no gradient");
  }
  for (const auto& p : params) {
    Tensor t = p.tensor;
    auto values = t.mutable_data();
    const auto g = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * g[i];
    t.zero_grad();
  }
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& loss_fn, const ParamList& params,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;
  if (params.empty()) return report;

  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.clear_grad();
  }
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    tape.backward(loss);
  }

  auto evaluate = [&] {
    Tape tape(false);
    return loss_fn(tape).item();
  };

  for (const auto& p : params) {
    Tensor t = p.tensor;
    GradCheckEntry entry{p.name};
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + options.step;
      const double up = evaluate();
      values[i] = original - options.step;
      const double down = evaluate();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.denominator_floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    }
    entry.passed = entry.max_rel_error <= options.tolerance;
    report.entries.push_back(std::move(entry));
  }
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  return report;
}

}  // namespace stattn
