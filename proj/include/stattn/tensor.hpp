#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stattn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;

  // Returns the gradient buffer, allocating zeros on first use.
  double* grad_buffer();
};

}  // namespace detail

// Dense row-major array of doubles with an optional gradient slot. Copies
// share storage; use clone() for an independent value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  // Matrix view of the shape: rank 0 is 1x1, rank 1 is a 1xn row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();
  void clear_grad();

  bool all_finite() const;
  Tensor clone() const;

  // Identity of the underlying storage.
  const detail::TensorImpl* id() const noexcept { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedTensor>;

// Ordered record of differentiable operations. A tape and the tensors it
// references belong to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void record(const Tensor& output, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients of
  // leaf tensors accumulate across calls; intermediate gradients are reset
  // at the start of every call so repeated passes are reproducible.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn backward;
  };

  bool recording_;
  std::vector<Node> nodes_;
};

}  // namespace stattn
