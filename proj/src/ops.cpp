#include "stattn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stattn/error.hpp"

namespace stattn::ops {
namespace {

using ImplPtr = std::shared_ptr<detail::TensorImpl>;

bool tracks(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape.recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

Tensor make_output(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

// Gradient buffer of an input, or nullptr when the input is a constant.
double* grad_of(const ImplPtr& impl) {
  return impl->requires_grad ? impl->grad_buffer() : nullptr;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kShapeMismatch,
         std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void require_matrix(const char* op, const Tensor& x) {
  if (x.rank() > 2) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": expected rank <= 2, got " + shape_string(x.shape()));
  }
}

template <typename Forward, typename Derivative>
Tensor unary(Tape& tape, const Tensor& x, Forward forward, Derivative derivative) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = forward(in[i]);
  Tensor y = make_output(x.shape(), std::move(out), tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl(), derivative] {
      double* gx = grad_of(xi);
      const double* gy = yi->grad.data();
      for (std::size_t i = 0; i < yi->data.size(); ++i) gx[i] += gy[i] * derivative(xi->data[i], yi->data[i]);
    });
  }
  return y;
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    fail(ErrorCode::kShapeMismatch, "matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                                        shape_string(b.shape()) + " (" + std::to_string(k) + " vs " +
                                        std::to_string(b.rows()) + ")");
  }
  std::vector<double> c(m * n, 0.0);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ad[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  Tensor out = make_output({m, n}, std::move(c), tracks(tape, {&a, &b}));
  if (out.requires_grad()) {
    tape.record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, k, n] {
      const double* g = oi->grad.data();
      if (double* ga = grad_of(ai)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double* bp = bi->data.data() + p * n;
            const double* gi = g + i * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
            ga[i * k + p] += acc;
          }
      }
      if (double* gb = grad_of(bi)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai->data[i * k + p];
            if (aip == 0.0) continue;
            double* gbp = gb + p * n;
            const double* gi = g + i * n;
            for (std::size_t j = 0; j < n; ++j) gbp[j] += aip * gi[j];
          }
      }
    });
  }
  return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix("matmul_nt", a);
  require_matrix("matmul_nt", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    fail(ErrorCode::kShapeMismatch, "matmul_nt: inner dimensions disagree, " + shape_string(a.shape()) +
                                        " x " + shape_string(b.shape()) + "^T (" + std::to_string(k) + " vs " +
                                        std::to_string(b.cols()) + ")");
  }
  std::vector<double> c(m * n);
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double* ai = ad + i * k;
      const double* bj = bd + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = acc;
    }
  Tensor out = make_output({m, n}, std::move(c), tracks(tape, {&a, &b}));
  if (out.requires_grad()) {
    tape.record(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, k, n] {
      const double* g = oi->grad.data();
      double* ga = grad_of(ai);
      double* gb = grad_of(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          if (gij == 0.0) continue;
          if (ga) {
            const double* bj = bi->data.data() + j * k;
            double* gai = ga + i * k;
            for (std::size_t p = 0; p < k; ++p) gai[p] += gij * bj[p];
          }
          if (gb) {
            const double* a_row = ai->data.data() + i * k;
            double* gbj = gb + j * k;
            for (std::size_t p = 0; p < k; ++p) gbj[p] += gij * a_row[p];
          }
        }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  Tensor y = make_output(a.shape(), std::move(out), tracks(tape, {&a, &b}));
  if (y.requires_grad()) {
    tape.record(y, [ai = a.impl(), bi = b.impl(), yi = y.impl()] {
      const auto& g = yi->grad;
      if (double* ga = grad_of(ai))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (double* gb = grad_of(bi))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
  }
  return y;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  Tensor y = make_output(a.shape(), std::move(out), tracks(tape, {&a, &b}));
  if (y.requires_grad()) {
    tape.record(y, [ai = a.impl(), bi = b.impl(), yi = y.impl()] {
      const auto& g = yi->grad;
      if (double* ga = grad_of(ai))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (double* gb = grad_of(bi))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
  }
  return y;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const auto ad = a.data(), bd = b.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  Tensor y = make_output(a.shape(), std::move(out), tracks(tape, {&a, &b}));
  if (y.requires_grad()) {
    tape.record(y, [ai = a.impl(), bi = b.impl(), yi = y.impl()] {
      const auto& g = yi->grad;
      if (double* ga = grad_of(ai))
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bi->data[i];
      if (double* gb = grad_of(bi))
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ai->data[i];
    });
  }
  return y;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] * factor;
  Tensor y = make_output(x.shape(), std::move(out), tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl(), factor] {
      double* gx = grad_of(xi);
      for (std::size_t i = 0; i < yi->grad.size(); ++i) gx[i] += yi->grad[i] * factor;
    });
  }
  return y;
}

Tensor scale_by(Tape& tape, const Tensor& x, const Tensor& factor) {
  if (factor.numel() != 1) {
    fail(ErrorCode::kShapeMismatch, "scale_by: factor must be a scalar, got " + shape_string(factor.shape()));
  }
  const double s = factor.item();
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * xd[i];
  Tensor y = make_output(x.shape(), std::move(out), tracks(tape, {&x, &factor}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), si = factor.impl(), yi = y.impl()] {
      const auto& g = yi->grad;
      if (double* gx = grad_of(xi)) {
        const double s = si->data[0];
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += s * g[i];
      }
      if (double* gs = grad_of(si)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += xi->data[i] * g[i];
        gs[0] += acc;
      }
    });
  }
  return y;
}

Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  require_matrix("add_bias", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.rank() > 2 || bias.rows() != 1 || bias.cols() != n) {
    fail(ErrorCode::kShapeMismatch,
         "add_bias: bias " + shape_string(bias.shape()) + " does not match rows of " + shape_string(x.shape()));
  }
  const auto xd = x.data(), bd = bias.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xd[i * n + j] + bd[j];
  Tensor y = make_output(x.shape(), std::move(out), tracks(tape, {&x, &bias}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), bi = bias.impl(), yi = y.impl(), m, n] {
      const auto& g = yi->grad;
      if (double* gx = grad_of(xi))
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      if (double* gb = grad_of(bi))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    });
  }
  return y;
}

Tensor mul_rows(Tape& tape, const Tensor& x, const Tensor& s) {
  require_matrix("mul_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (s.numel() != m) {
    fail(ErrorCode::kShapeMismatch,
         "mul_rows: scale " + shape_string(s.shape()) + " does not match rows of " + shape_string(x.shape()));
  }
  const auto xd = x.data(), sd = s.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = sd[i] * xd[i * n + j];
  Tensor y = make_output(x.shape(), std::move(out), tracks(tape, {&x, &s}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), si = s.impl(), yi = y.impl(), m, n] {
      const auto& g = yi->grad;
      double* gx = grad_of(xi);
      double* gs = grad_of(si);
      for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (gx) gx[i * n + j] += si->data[i] * g[i * n + j];
          acc += xi->data[i * n + j] * g[i * n + j];
        }
        if (gs) gs[i] += acc;
      }
    });
  }
  return y;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  return unary(tape, x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary(tape, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return unary(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax(Tape& tape, const Tensor& x, int axis, const std::vector<bool>& mask) {
  require_matrix("softmax", x);
  if (axis != 0 && axis != 1) fail(ErrorCode::kInvalidArgument, "softmax: axis must be 0 or 1");
  const std::size_t m = x.rows(), n = x.cols();
  // Lanes are the independent slices being normalized; each has `len` entries
  // spaced `stride` apart.
  const std::size_t lanes = axis == 1 ? m : n;
  const std::size_t len = axis == 1 ? n : m;
  const std::size_t lane_step = axis == 1 ? n : 1;
  const std::size_t stride = axis == 1 ? 1 : n;
  if (!mask.empty() && mask.size() != len) {
    fail(ErrorCode::kShapeMismatch, "softmax: mask length " + std::to_string(mask.size()) +
                                        " does not match reduced axis length " + std::to_string(len));
  }
  if (!mask.empty() && std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    fail(ErrorCode::kInvalidArgument, "softmax: every entry along the reduced axis is masked");
  }
  const auto xd = x.data();
  if (!std::all_of(xd.begin(), xd.end(), [](double v) { return std::isfinite(v); })) {
    fail(ErrorCode::kNumeric, "softmax: non-finite input");
  }
  auto live = [&](std::size_t k) { return mask.empty() || mask[k]; };

  std::vector<double> out(xd.size(), 0.0);
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    const std::size_t base = lane * lane_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k)
      if (live(k)) mx = std::max(mx, xd[base + k * stride]);
    double total = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      if (!live(k)) continue;
      const double e = std::exp(xd[base + k * stride] - mx);
      out[base + k * stride] = e;
      total += e;
    }
    const double inv = 1.0 / total;
    for (std::size_t k = 0; k < len; ++k) out[base + k * stride] *= inv;
  }
  Tensor y = make_output(x.shape(), std::move(out), tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl(), lanes, len, lane_step, stride] {
      double* gx = grad_of(xi);
      const auto& g = yi->grad;
      const auto& yd = yi->data;
      for (std::size_t lane = 0; lane < lanes; ++lane) {
        const std::size_t base = lane * lane_step;
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += yd[base + k * stride] * g[base + k * stride];
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t idx = base + k * stride;
          gx[idx] += yd[idx] * (g[idx] - dot);
        }
      }
    });
  }
  return y;
}

Tensor row(Tape& tape, const Tensor& x, std::size_t r) {
  require_matrix("row", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (r >= m) fail(ErrorCode::kShapeMismatch, "row: index " + std::to_string(r) + " out of range for " + shape_string(x.shape()));
  const auto xd = x.data();
  std::vector<double> out(xd.begin() + static_cast<std::ptrdiff_t>(r * n),
                          xd.begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
  Tensor y = make_output({1, n}, std::move(out), tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl(), r, n] {
      double* gx = grad_of(xi) + r * n;
      for (std::size_t j = 0; j < n; ++j) gx[j] += yi->grad[j];
    });
  }
  return y;
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    fail(ErrorCode::kShapeMismatch, "slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                        ") invalid for " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  const auto xd = x.data();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xd[i * n + begin + j];
  Tensor y = make_output({m, w}, std::move(out), tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl(), m, n, w, begin] {
      double* gx = grad_of(xi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) gx[i * n + begin + j] += yi->grad[i * w + j];
    });
  }
  return y;
}

Tensor concat_rows(Tape& tape, std::span<const Tensor> parts) {
  if (parts.empty()) fail(ErrorCode::kInvalidArgument, "concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t total_rows = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != n) {
      fail(ErrorCode::kShapeMismatch, "concat_rows: column mismatch " + shape_string(parts.front().shape()) +
                                          " vs " + shape_string(p.shape()));
    }
    total_rows += p.rows();
    any_grad = any_grad || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(total_rows * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor y = make_output({total_rows, n}, std::move(out), tape.recording() && any_grad);
  if (y.requires_grad()) {
    std::vector<ImplPtr> inputs;
    inputs.reserve(parts.size());
    for (const auto& p : parts) inputs.push_back(p.impl());
    tape.record(y, [inputs = std::move(inputs), yi = y.impl()] {
      std::size_t offset = 0;
      for (const auto& in : inputs) {
        const std::size_t len = in->data.size();
        if (double* g = grad_of(in))
          for (std::size_t i = 0; i < len; ++i) g[i] += yi->grad[offset + i];
        offset += len;
      }
    });
  }
  return y;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    fail(ErrorCode::kShapeMismatch, "reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  Tensor y = make_output(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()),
                         tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl()] {
      double* gx = grad_of(xi);
      for (std::size_t i = 0; i < yi->grad.size(); ++i) gx[i] += yi->grad[i];
    });
  }
  return y;
}

Tensor transpose(Tape& tape, const Tensor& x) {
  require_matrix("transpose", x);
  const std::size_t m = x.rows(), n = x.cols();
  const auto xd = x.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xd[i * n + j];
  Tensor y = make_output({n, m}, std::move(out), tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl(), m, n] {
      double* gx = grad_of(xi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += yi->grad[j * m + i];
    });
  }
  return y;
}

Tensor tile(Tape& tape, const Tensor& x, std::size_t row_reps, std::size_t col_reps) {
  require_matrix("tile", x);
  if (row_reps == 0 || col_reps == 0) fail(ErrorCode::kInvalidArgument, "tile: repetitions must be positive");
  const std::size_t m = x.rows(), n = x.cols();
  const std::size_t out_cols = n * col_reps;
  const auto xd = x.data();
  std::vector<double> out(m * row_reps * out_cols);
  for (std::size_t bi = 0; bi < row_reps; ++bi)
    for (std::size_t i = 0; i < m; ++i) {
      double* dst = out.data() + (bi * m + i) * out_cols;
      for (std::size_t bj = 0; bj < col_reps; ++bj)
        std::copy(xd.begin() + static_cast<std::ptrdiff_t>(i * n),
                  xd.begin() + static_cast<std::ptrdiff_t>((i + 1) * n), dst + bj * n);
    }
  Tensor y = make_output({m * row_reps, out_cols}, std::move(out), tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl(), m, n, row_reps, col_reps, out_cols] {
      double* gx = grad_of(xi);
      for (std::size_t bi = 0; bi < row_reps; ++bi)
        for (std::size_t i = 0; i < m; ++i) {
          const double* src = yi->grad.data() + (bi * m + i) * out_cols;
          for (std::size_t bj = 0; bj < col_reps; ++bj)
            for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += src[bj * n + j];
        }
    });
  }
  return y;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor y = make_output(Shape{}, {acc}, tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl()] {
      double* gx = grad_of(xi);
      const double g = yi->grad[0];
      for (std::size_t i = 0; i < xi->data.size(); ++i) gx[i] += g;
    });
  }
  return y;
}

Tensor masked_mean_rows(Tape& tape, const Tensor& x, const std::vector<bool>& mask) {
  require_matrix("masked_mean_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (mask.size() != m) {
    fail(ErrorCode::kShapeMismatch, "masked_mean_rows: mask length " + std::to_string(mask.size()) +
                                        " does not match " + shape_string(x.shape()));
  }
  const auto live = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (live == 0) fail(ErrorCode::kInvalidArgument, "masked_mean_rows: every row is masked");
  const double inv = 1.0 / static_cast<double>(live);
  const auto xd = x.data();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += xd[i * n + j];
  }
  for (auto& v : out) v *= inv;
  Tensor y = make_output({1, n}, std::move(out), tracks(tape, {&x}));
  if (y.requires_grad()) {
    tape.record(y, [xi = x.impl(), yi = y.impl(), mask, m, n, inv] {
      double* gx = grad_of(xi);
      for (std::size_t i = 0; i < m; ++i) {
        if (!mask[i]) continue;
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += yi->grad[j] * inv;
      }
    });
  }
  return y;
}

Tensor bce_with_logits(Tape& tape, const Tensor& logit, double label) {
  if (logit.numel() != 1) {
    fail(ErrorCode::kShapeMismatch, "bce_with_logits: logit must hold one value, got " + shape_string(logit.shape()));
  }
  const double z = logit.item();
  const double loss = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  Tensor y = make_output(Shape{}, {loss}, tracks(tape, {&logit}));
  if (y.requires_grad()) {
    tape.record(y, [li = logit.impl(), yi = y.impl(), label] {
      grad_of(li)[0] += yi->grad[0] * (stable_sigmoid(li->data[0]) - label);
    });
  }
  return y;
}

}  // namespace stattn::ops
