#include <algorithm>
#include <cmath>
#include <string>

#include "stattn/error.hpp"
#include "stattn/ops.hpp"

namespace stattn::ops {
namespace {

double logistic(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

bool any_requires_grad(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  return tape.recording() &&
         std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

double* grad_or_null(const std::shared_ptr<detail::TensorImpl>& impl) {
  return impl->requires_grad ? impl->grad_buffer() : nullptr;
}

// A contiguous pass of the recurrence starting from a zero state.
struct Run {
  std::size_t first = 0;
  std::size_t last = 0;
  bool emit_every_step = false;
};

// Per-step activations kept for the backward pass.
struct StepCache {
  std::size_t t = 0;
  std::vector<double> h_prev, c_prev, gates, tanh_c;  // gates: i, f, g, o
};

struct RunCache {
  Run run;
  std::vector<StepCache> steps;
};

}  // namespace

Tensor lstm_scan(Tape& tape, const Tensor& proj, const Tensor& w_hidden, const Tensor& bias,
                 const std::vector<bool>& mask, std::size_t window) {
  const std::size_t steps = proj.rows();
  const std::size_t h = w_hidden.cols();
  if (proj.rank() != 2 || proj.cols() != 4 * h || w_hidden.rows() != 4 * h || bias.numel() != 4 * h) {
    fail(ErrorCode::kShapeMismatch, "lstm_scan: projection " + shape_string(proj.shape()) + ", recurrent weights " +
                                        shape_string(w_hidden.shape()) + ", bias " + shape_string(bias.shape()));
  }
  if (mask.size() != steps) fail(ErrorCode::kShapeMismatch, "lstm_scan: mask length does not match sequence");

  std::vector<Run> runs;
  if (window == 0) {
    runs.push_back({0, steps - 1, true});
  } else {
    for (std::size_t p = 0; p < steps; ++p)
      if (mask[p]) runs.push_back({p + 1 >= window ? p + 1 - window : 0, p, false});
  }

  const double* px = proj.data().data();
  const double* wh = w_hidden.data().data();
  const double* b = bias.data().data();
  std::vector<double> out(steps * h, 0.0);
  std::vector<RunCache> caches(runs.size());
  std::vector<double> hs(h), cs(h), pre(4 * h);

  for (std::size_t r = 0; r < runs.size(); ++r) {
    const Run& run = runs[r];
    caches[r].run = run;
    std::fill(hs.begin(), hs.end(), 0.0);
    std::fill(cs.begin(), cs.end(), 0.0);
    for (std::size_t t = run.first; t <= run.last; ++t) {
      if (!mask[t]) continue;
      StepCache step{t, hs, cs, std::vector<double>(4 * h), std::vector<double>(h)};
      for (std::size_t k = 0; k < 4 * h; ++k) {
        double acc = px[t * 4 * h + k] + b[k];
        const double* wrow = wh + k * h;
        for (std::size_t j = 0; j < h; ++j) acc += wrow[j] * hs[j];
        pre[k] = acc;
      }
      double* g = step.gates.data();
      for (std::size_t j = 0; j < h; ++j) {
        g[j] = logistic(pre[j]);
        g[h + j] = logistic(pre[h + j]);
        g[2 * h + j] = std::tanh(pre[2 * h + j]);
        g[3 * h + j] = logistic(pre[3 * h + j]);
        cs[j] = g[h + j] * cs[j] + g[j] * g[2 * h + j];
        step.tanh_c[j] = std::tanh(cs[j]);
        hs[j] = g[3 * h + j] * step.tanh_c[j];
      }
      if (run.emit_every_step) std::copy(hs.begin(), hs.end(), out.begin() + static_cast<std::ptrdiff_t>(t * h));
      caches[r].steps.push_back(std::move(step));
    }
    if (!run.emit_every_step) std::copy(hs.begin(), hs.end(), out.begin() + static_cast<std::ptrdiff_t>(run.last * h));
  }

  Tensor y({steps, h}, std::move(out), any_requires_grad(tape, {&proj, &w_hidden, &bias}));
  if (y.requires_grad()) {
    tape.record(y, [pi = proj.impl(), wi = w_hidden.impl(), bi = bias.impl(), yi = y.impl(),
                    caches = std::move(caches), h] {
      double* gp = grad_or_null(pi);
      double* gw = grad_or_null(wi);
      double* gb = grad_or_null(bi);
      const double* wh = wi->data.data();
      const double* gy = yi->grad.data();
      std::vector<double> dh(h), dc(h), dpre(4 * h);
      for (const auto& cache : caches) {
        std::fill(dh.begin(), dh.end(), 0.0);
        std::fill(dc.begin(), dc.end(), 0.0);
        if (!cache.run.emit_every_step)
          for (std::size_t j = 0; j < h; ++j) dh[j] = gy[cache.run.last * h + j];
        for (auto it = cache.steps.rbegin(); it != cache.steps.rend(); ++it) {
          const StepCache& s = *it;
          if (cache.run.emit_every_step)
            for (std::size_t j = 0; j < h; ++j) dh[j] += gy[s.t * h + j];
          const double* g = s.gates.data();
          for (std::size_t j = 0; j < h; ++j) {
            const double i_g = g[j], f_g = g[h + j], c_g = g[2 * h + j], o_g = g[3 * h + j];
            const double tc = s.tanh_c[j];
            const double dcell = dc[j] + dh[j] * o_g * (1.0 - tc * tc);
            dpre[j] = dcell * c_g * i_g * (1.0 - i_g);
            dpre[h + j] = dcell * s.c_prev[j] * f_g * (1.0 - f_g);
            dpre[2 * h + j] = dcell * i_g * (1.0 - c_g * c_g);
            dpre[3 * h + j] = dh[j] * tc * o_g * (1.0 - o_g);
            dc[j] = dcell * f_g;
          }
          std::fill(dh.begin(), dh.end(), 0.0);
          for (std::size_t k = 0; k < 4 * h; ++k) {
            const double d = dpre[k];
            if (gp) gp[s.t * 4 * h + k] += d;
            if (gb) gb[k] += d;
            const double* wrow = wh + k * h;
            double* gwrow = gw ? gw + k * h : nullptr;
            for (std::size_t j = 0; j < h; ++j) {
              dh[j] += wrow[j] * d;
              if (gwrow) gwrow[j] += d * s.h_prev[j];
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor attention_context(Tape& tape, const Tensor& values, const Tensor& coupling, const Tensor& value,
                         const std::vector<bool>& mask, Tensor* weights) {
  const std::size_t steps = values.rows();
  const std::size_t h = values.cols();
  if (values.rank() != 2 || value.shape() != values.shape() || coupling.rows() != h || coupling.cols() != h ||
      mask.size() != steps) {
    fail(ErrorCode::kShapeMismatch, "attention_context: values " + shape_string(values.shape()) + ", coupling " +
                                        shape_string(coupling.shape()) + ", value " + shape_string(value.shape()));
  }
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    fail(ErrorCode::kInvalidArgument, "attention_context: every time step is masked");
  }
  if (!values.all_finite() || !coupling.all_finite() || !value.all_finite()) {
    fail(ErrorCode::kNumeric, "attention_context: non-finite input");
  }
  const std::size_t n = steps * h;
  const double* f = values.data().data();
  const double* cp = coupling.data().data();
  const double* v = value.data().data();

  // Work on the live positions only, packed in order; packed index q maps to
  // coordinate q % h.
  std::vector<std::size_t> live;
  for (std::size_t t = 0; t < steps; ++t)
    if (mask[t])
      for (std::size_t i = 0; i < h; ++i) live.push_back(t * h + i);
  const std::size_t m = live.size();
  std::vector<double> fl(m), vl(m);
  for (std::size_t q = 0; q < m; ++q) {
    fl[q] = f[live[q]];
    vl[q] = v[live[q]];
  }
  // scaled[i][q] = coupling[i, q % h] * fl[q]
  std::vector<double> scaled(h * m);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t q = 0; q < m; ++q) scaled[i * m + q] = cp[i * h + q % h] * fl[q];

  std::vector<double> attn(m * m);
  std::vector<double> ctx(m);
  for (std::size_t p = 0; p < m; ++p) {
    const double fp = fl[p];
    const double* row_scaled = scaled.data() + (p % h) * m;
    double* a = attn.data() + p * m;
    double mx = fp * row_scaled[0];
    for (std::size_t q = 0; q < m; ++q) {
      a[q] = fp * row_scaled[q];
      mx = std::max(mx, a[q]);
    }
    double total = 0.0;
    for (std::size_t q = 0; q < m; ++q) {
      a[q] = std::exp(a[q] - mx);
      total += a[q];
    }
    const double inv = 1.0 / total;
    double acc = 0.0;
    for (std::size_t q = 0; q < m; ++q) {
      a[q] *= inv;
      acc += a[q] * vl[q];
    }
    ctx[p] = acc;
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t p = 0; p < m; ++p) out[live[p]] = ctx[p];
  if (weights) {
    std::vector<double> full(n * n, 0.0);
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = 0; q < m; ++q) full[live[p] * n + live[q]] = attn[p * m + q];
    *weights = Tensor({n, n}, std::move(full));
  }

  Tensor y({steps, h}, std::move(out), any_requires_grad(tape, {&values, &coupling, &value}));
  if (y.requires_grad()) {
    tape.record(y, [fi = values.impl(), ci = coupling.impl(), vi = value.impl(), yi = y.impl(), attn = std::move(attn),
                    live = std::move(live), fl = std::move(fl), vl = std::move(vl), ctx = std::move(ctx), h] {
      double* gf = grad_or_null(fi);
      double* gc = grad_or_null(ci);
      double* gv = grad_or_null(vi);
      const double* cp = ci->data.data();
      const double* gy = yi->grad.data();
      const std::size_t m = live.size();
      std::vector<double> dfl(m, 0.0), dvl(m, 0.0), dcp(h * h, 0.0), ds(m);
      for (std::size_t p = 0; p < m; ++p) {
        const double g = gy[live[p]];
        if (g == 0.0) continue;
        const double fp = fl[p];
        const std::size_t i = p % h;
        const double* a = attn.data() + p * m;
        const double* crow = cp + i * h;
        double* dcrow = dcp.data() + i * h;
        // ds[q] is d(loss)/d(score[p, q])
        for (std::size_t q = 0; q < m; ++q) {
          dvl[q] += g * a[q];
          ds[q] = g * a[q] * (vl[q] - ctx[p]);
        }
        double dfp = 0.0;
        for (std::size_t base = 0; base < m; base += h) {
          for (std::size_t j = 0; j < h; ++j) {
            const std::size_t q = base + j;
            const double w = ds[q] * crow[j];
            dfp += w * fl[q];
            dfl[q] += w * fp;
            dcrow[j] += ds[q] * fp * fl[q];
          }
        }
        dfl[p] += dfp;
      }
      for (std::size_t q = 0; q < m; ++q) {
        if (gf) gf[live[q]] += dfl[q];
        if (gv) gv[live[q]] += dvl[q];
      }
      if (gc)
        for (std::size_t k = 0; k < h * h; ++k) gc[k] += dcp[k];
    });
  }
  return y;
}

}  // namespace stattn::ops
