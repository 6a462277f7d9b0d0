#include "stattn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "stattn/error.hpp"
#include "stattn/ops.hpp"

namespace stattn {
namespace {

Tensor uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor(std::move(shape), std::move(values), true);
}

void require_live_step(const char* op, const std::vector<bool>& mask) {
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    fail(ErrorCode::kInvalidArgument, std::string(op) + ": every time step is masked");
  }
}

void require_inputs(const char* op, const Tensor& inputs, const std::vector<bool>& mask, std::size_t width) {
  if (inputs.rank() != 2) fail(ErrorCode::kShapeMismatch, std::string(op) + ": inputs must be [T x D]");
  if (inputs.rows() != mask.size()) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": mask length " + std::to_string(mask.size()) +
                                        " does not match " + shape_string(inputs.shape()));
  }
  if (inputs.cols() != width) {
    fail(ErrorCode::kShapeMismatch, std::string(op) + ": input width " + std::to_string(inputs.cols()) +
                                        " does not match parameter width " + std::to_string(width));
  }
}

// One cell update given the precomputed input projection x * W^T.
LstmState step_from_projection(Tape& tape, const Tensor& x_proj, const LstmState& state,
                               const LstmCellParams& params) {
  const std::size_t h = params.hidden_size();
  Tensor pre = ops::add_bias(tape, ops::add(tape, x_proj, ops::matmul_nt(tape, state.h, params.w_hidden)), params.bias);
  Tensor in_gate = ops::sigmoid(tape, ops::slice_cols(tape, pre, 0, h));
  Tensor forget_gate = ops::sigmoid(tape, ops::slice_cols(tape, pre, h, 2 * h));
  Tensor candidate = ops::tanh(tape, ops::slice_cols(tape, pre, 2 * h, 3 * h));
  Tensor out_gate = ops::sigmoid(tape, ops::slice_cols(tape, pre, 3 * h, 4 * h));
  Tensor c = ops::add(tape, ops::mul(tape, forget_gate, state.c), ops::mul(tape, in_gate, candidate));
  Tensor hidden = ops::mul(tape, out_gate, ops::tanh(tape, c));
  return {hidden, c};
}

}  // namespace

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

LstmCellParams LstmCellParams::init(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  if (input_size == 0 || hidden_size == 0) fail(ErrorCode::kInvalidArgument, "LSTM sizes must be positive");
  LstmCellParams p;
  p.w_input = uniform({4 * hidden_size, input_size}, input_size, rng);
  p.w_hidden = uniform({4 * hidden_size, hidden_size}, hidden_size, rng);
  p.bias = uniform({4 * hidden_size}, hidden_size, rng);
  auto b = p.bias.mutable_data();
  std::fill(b.begin() + static_cast<std::ptrdiff_t>(hidden_size),
            b.begin() + static_cast<std::ptrdiff_t>(2 * hidden_size), 1.0);
  return p;
}

LstmCellParams LstmCellParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  return {Tensor::zeros({4 * hidden_size, input_size}, true), Tensor::zeros({4 * hidden_size, hidden_size}, true),
          Tensor::zeros({4 * hidden_size}, true)};
}

void LstmCellParams::append_to(ParamList& params, const std::string& prefix) const {
  params.push_back({prefix + "w_input", w_input});
  params.push_back({prefix + "w_hidden", w_hidden});
  params.push_back({prefix + "bias", bias});
}

LstmState LstmState::zeros(std::size_t hidden_size) {
  return {Tensor::zeros({1, hidden_size}), Tensor::zeros({1, hidden_size})};
}

JointAttnParams JointAttnParams::init(std::size_t hidden_size, std::size_t attn_dim, Rng& rng) {
  if (attn_dim == 0) fail(ErrorCode::kInvalidArgument, "attention width must be positive");
  JointAttnParams p;
  p.w_query = uniform({hidden_size, attn_dim}, hidden_size, rng);
  p.w_key = uniform({hidden_size, attn_dim}, hidden_size, rng);
  p.w_value = uniform({hidden_size, hidden_size}, hidden_size, rng);
  p.gamma = Tensor::scalar(0.0, true);
  return p;
}

void JointAttnParams::append_to(ParamList& params, const std::string& prefix) const {
  params.push_back({prefix + "w_query", w_query});
  params.push_back({prefix + "w_key", w_key});
  params.push_back({prefix + "w_value", w_value});
  params.push_back({prefix + "gamma", gamma});
}

TemporalAttnParams TemporalAttnParams::init(std::size_t hidden_size, Rng& rng) {
  return {uniform({hidden_size}, hidden_size, rng), Tensor::scalar(0.0, true)};
}

void TemporalAttnParams::append_to(ParamList& params, const std::string& prefix) const {
  params.push_back({prefix + "w_score", w_score});
  params.push_back({prefix + "bias", bias});
}

MlpParams MlpParams::init(std::size_t hidden_size, Rng& rng) {
  const std::size_t mid = std::max<std::size_t>(1, hidden_size / 2);
  MlpParams p;
  p.w1 = uniform({mid, hidden_size}, hidden_size, rng);
  p.b1 = uniform({mid}, hidden_size, rng);
  p.w2 = uniform({1, mid}, mid, rng);
  p.b2 = uniform({}, mid, rng);
  return p;
}

void MlpParams::append_to(ParamList& params, const std::string& prefix) const {
  params.push_back({prefix + "w1", w1});
  params.push_back({prefix + "b1", b1});
  params.push_back({prefix + "w2", w2});
  params.push_back({prefix + "b2", b2});
}

LstmState lstm_cell_step(Tape& tape, const Tensor& x, const LstmState& state, const LstmCellParams& params) {
  if (x.numel() != params.input_size()) {
    fail(ErrorCode::kShapeMismatch, "lstm_cell_step: input " + shape_string(x.shape()) + " vs input size " +
                                        std::to_string(params.input_size()));
  }
  const std::size_t h = params.hidden_size();
  if (state.h.numel() != h || state.c.numel() != h) {
    fail(ErrorCode::kShapeMismatch, "lstm_cell_step: state does not match hidden size " + std::to_string(h));
  }
  Tensor x_row = x.rank() == 2 ? x : ops::reshape(tape, x, {1, x.numel()});
  LstmState s{state.h.rank() == 2 ? state.h : ops::reshape(tape, state.h, {1, h}),
              state.c.rank() == 2 ? state.c : ops::reshape(tape, state.c, {1, h})};
  return step_from_projection(tape, ops::matmul_nt(tape, x_row, params.w_input), s, params);
}

HiddenMap stacked_lstm_forward(Tape& tape, const Tensor& inputs, const std::vector<bool>& mask,
                               std::span<const LstmCellParams> layers) {
  if (layers.empty()) fail(ErrorCode::kInvalidArgument, "stacked_lstm_forward: no layers");
  if (mask.empty()) fail(ErrorCode::kInvalidArgument, "stacked_lstm_forward: empty sequence");
  require_inputs("stacked_lstm_forward", inputs, mask, layers.front().input_size());

  Tensor current = inputs;
  for (const auto& layer : layers) {
    if (current.cols() != layer.input_size()) {
      fail(ErrorCode::kShapeMismatch, "stacked_lstm_forward: layer input width mismatch");
    }
    current = ops::lstm_scan(tape, ops::matmul_nt(tape, current, layer.w_input), layer.w_hidden, layer.bias, mask);
  }
  return {current, mask};
}

HiddenMap local_lstm_forward(Tape& tape, const Tensor& inputs, const std::vector<bool>& mask, std::size_t window,
                             const LstmCellParams& params) {
  if (window == 0) fail(ErrorCode::kInvalidArgument, "local_lstm_forward: window must be >= 1");
  if (mask.empty()) fail(ErrorCode::kInvalidArgument, "local_lstm_forward: empty sequence");
  require_inputs("local_lstm_forward", inputs, mask, params.input_size());

  Tensor proj = ops::matmul_nt(tape, inputs, params.w_input);
  return {ops::lstm_scan(tape, proj, params.w_hidden, params.bias, mask, window), mask};
}

HiddenMap joint_spatiotemporal_attention(Tape& tape, const HiddenMap& f, const JointAttnParams& params,
                                         Tensor* weights) {
  const std::size_t steps = f.length();
  const std::size_t h = f.width();
  if (f.values.rows() != steps) fail(ErrorCode::kShapeMismatch, "joint attention: mask does not match map");
  if (params.w_query.rows() != h || params.w_key.rows() != h || params.w_value.rows() != h ||
      params.w_value.cols() != h || params.w_query.cols() != params.w_key.cols()) {
    fail(ErrorCode::kShapeMismatch, "joint attention: parameters do not match hidden width " + std::to_string(h));
  }
  require_live_step("joint attention", f.mask);

  // score[(t,i),(s,j)] = f[t,i] * f[s,j] * (w_query[i,:] . w_key[j,:])
  Tensor coupling = ops::matmul_nt(tape, params.w_query, params.w_key);
  Tensor value = ops::matmul(tape, f.values, params.w_value);
  Tensor context = ops::attention_context(tape, f.values, coupling, value, f.mask, weights);
  return {ops::add(tape, f.values, ops::scale_by(tape, context, params.gamma)), f.mask};
}

HiddenMap temporal_attention(Tape& tape, const HiddenMap& f, const TemporalAttnParams& params, Tensor* weights) {
  const std::size_t h = f.width();
  if (params.w_score.numel() != h) {
    fail(ErrorCode::kShapeMismatch, "temporal attention: score vector does not match hidden width " + std::to_string(h));
  }
  require_live_step("temporal attention", f.mask);
  const auto live = static_cast<double>(std::count(f.mask.begin(), f.mask.end(), true));
  Tensor scores = ops::add_bias(tape, ops::matmul_nt(tape, f.values, params.w_score), params.bias);
  Tensor alpha = ops::softmax(tape, scores, 0, f.mask);
  if (weights) *weights = alpha;
  return {ops::mul_rows(tape, f.values, ops::scale(tape, alpha, live)), f.mask};
}

Tensor mlp_logit(Tape& tape, const HiddenMap& f, const MlpParams& params) {
  Tensor pooled = ops::masked_mean_rows(tape, f.values, f.mask);
  Tensor hidden = ops::tanh(tape, ops::add_bias(tape, ops::matmul_nt(tape, pooled, params.w1), params.b1));
  return ops::add_bias(tape, ops::matmul_nt(tape, hidden, params.w2), params.b2);
}

}  // namespace stattn
