#include "stattn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "stattn/error.hpp"

namespace stattn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

double* detail::TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad.data();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) fail(ErrorCode::kShapeMismatch, "tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (values.size() != shape_numel(shape)) {
    fail(ErrorCode::kShapeMismatch,
         "tensor of shape " + shape_string(shape) + " needs " + std::to_string(shape_numel(shape)) +
             " values, got " + std::to_string(values.size()));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) fail(ErrorCode::kInvalidArgument, "use of an undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() <= 1) return 1;
  if (s.size() == 2) return s[0];
  fail(ErrorCode::kShapeMismatch, "matrix view of rank-" + std::to_string(s.size()) + " tensor");
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  if (s.empty()) return 1;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  fail(ErrorCode::kShapeMismatch, "matrix view of rank-" + std::to_string(s.size()) + " tensor");
}

std::span<const double> Tensor::data() const {
  shape();
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  shape();
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  shape();
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  shape();
  return impl_->grad;
}

void Tensor::zero_grad() {
  shape();
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
  shape();
  impl_->grad.clear();
}

bool Tensor::all_finite() const {
  return std::all_of(data().begin(), data().end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::clone() const {
  return Tensor(shape(), impl_->data, impl_->requires_grad);
}

void Tape::record(const Tensor& output, BackwardFn backward) {
  if (!recording_) return;
  nodes_.push_back(Node{output.impl(), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorCode::kShapeMismatch,
         "backward needs a scalar loss, got shape " + (loss.defined() ? shape_string(loss.shape()) : "undefined"));
  }
  for (auto& node : nodes_) node.output->grad.clear();
  loss.impl()->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not on a path to the loss
    it->backward();
  }
}

}  // namespace stattn
