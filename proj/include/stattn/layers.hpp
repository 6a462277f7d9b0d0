#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "stattn/sequence.hpp"
#include "stattn/tensor.hpp"

namespace stattn {

using Rng = std::mt19937_64;

// Gate blocks are stacked in the order input, forget, candidate, output.
struct LstmCellParams {
  Tensor w_input;   // [4H x D]
  Tensor w_hidden;  // [4H x H]
  Tensor bias;      // [4H]

  std::size_t input_size() const { return w_input.cols(); }
  std::size_t hidden_size() const { return w_hidden.cols(); }

  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); forget-gate bias set to 1.
  static LstmCellParams init(std::size_t input_size, std::size_t hidden_size, Rng& rng);
  static LstmCellParams zeros(std::size_t input_size, std::size_t hidden_size);
  void append_to(ParamList& params, const std::string& prefix) const;
};

struct LstmState {
  Tensor h;  // [1 x H]
  Tensor c;  // [1 x H]

  static LstmState zeros(std::size_t hidden_size);
};

struct StackedLstmConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_size = 32;
};

struct LocalLstmConfig {
  std::size_t window = 6;
  std::size_t hidden_size = 32;
};

struct JointAttnParams {
  Tensor w_query;  // [H x d_a]
  Tensor w_key;    // [H x d_a]
  Tensor w_value;  // [H x H]
  Tensor gamma;    // scalar

  static JointAttnParams init(std::size_t hidden_size, std::size_t attn_dim, Rng& rng);
  void append_to(ParamList& params, const std::string& prefix) const;
};

struct TemporalAttnParams {
  Tensor w_score;  // [H]
  Tensor bias;     // scalar

  static TemporalAttnParams init(std::size_t hidden_size, Rng& rng);
  void append_to(ParamList& params, const std::string& prefix) const;
};

// H -> max(1, H/2) -> 1 with tanh between; the logit is squashed by sigmoid.
struct MlpParams {
  Tensor w1;  // [H2 x H]
  Tensor b1;  // [H2]
  Tensor w2;  // [1 x H2]
  Tensor b2;  // scalar

  static MlpParams init(std::size_t hidden_size, Rng& rng);
  void append_to(ParamList& params, const std::string& prefix) const;
};

LstmState lstm_cell_step(Tape& tape, const Tensor& x, const LstmState& state, const LstmCellParams& params);

// Returns the top layer's hidden state at every time step. Masked steps carry
// the state through unchanged and emit zero rows.
HiddenMap stacked_lstm_forward(Tape& tape, const Tensor& inputs, const std::vector<bool>& mask,
                               std::span<const LstmCellParams> layers);

// Row p is the final hidden state of a fresh zero-state LSTM run over input
// rows max(0, p - window + 1) .. p. Windows at the start are truncated.
HiddenMap local_lstm_forward(Tape& tape, const Tensor& inputs, const std::vector<bool>& mask,
                             std::size_t window, const LstmCellParams& params);

// f' = f + gamma * a(f) over the T*H positions of the map. Position (t, h)
// has query f[t,h] * w_query[h,:] and key f[t,h] * w_key[h,:]; its output is
// the softmax-weighted average, over every unmasked source position, of the
// value map f * w_value. When `weights` is non-null it receives the
// [T*H x T*H] attention matrix.
HiddenMap joint_spatiotemporal_attention(Tape& tape, const HiddenMap& f, const JointAttnParams& params,
                                         Tensor* weights = nullptr);

// One softmax weight per time step, shared by every feature of that step and
// rescaled by the number of unmasked steps.
HiddenMap temporal_attention(Tape& tape, const HiddenMap& f, const TemporalAttnParams& params,
                             Tensor* weights = nullptr);

// Mask-aware mean pool followed by the MLP; returns the [1 x 1] logit.
Tensor mlp_logit(Tape& tape, const HiddenMap& f, const MlpParams& params);

double sigmoid(double logit);

}  // namespace stattn
