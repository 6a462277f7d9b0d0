#pragma once

#include <span>
#include <vector>

#include "stattn/tensor.hpp"

// Differentiable primitives. Every op takes the tape it records onto; when
// the tape is not recording, outputs carry no gradient requirement.
//
// Binary elementwise ops require identical shapes. The only implicit
// broadcast is scale_by (scalar tensor times tensor); bias addition and row
// scaling are explicit ops.
namespace stattn::ops {

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// a * b^T
Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double factor);
Tensor scale_by(Tape& tape, const Tensor& x, const Tensor& factor);

// x [m x n] plus bias [n] added to every row.
Tensor add_bias(Tape& tape, const Tensor& x, const Tensor& bias);
// Row r of x [m x n] multiplied by s[r], s shaped [m x 1] or [m].
Tensor mul_rows(Tape& tape, const Tensor& x, const Tensor& s);

Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor tanh(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);

// Softmax of a rank <= 2 tensor along axis 0 (down columns) or 1 (across
// rows). With a non-empty mask (length of the reduced axis), masked-out
// entries get weight exactly 0 and are excluded from normalization; at least
// one entry must survive. Rejects non-finite input.
Tensor softmax(Tape& tape, const Tensor& x, int axis,
               const std::vector<bool>& mask = {});

Tensor row(Tape& tape, const Tensor& x, std::size_t r);
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_rows(Tape& tape, std::span<const Tensor> parts);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
Tensor transpose(Tape& tape, const Tensor& x);
// Block-repeats x [m x n] into [m*row_reps x n*col_reps].
Tensor tile(Tape& tape, const Tensor& x, std::size_t row_reps, std::size_t col_reps);

Tensor sum(Tape& tape, const Tensor& x);
// Mean over the rows of x [m x n] whose mask entry is true, as [1 x n].
Tensor masked_mean_rows(Tape& tape, const Tensor& x, const std::vector<bool>& mask);

// Binary cross-entropy of sigmoid(logit) against label, from the logit for
// numerical stability. logit must hold one element.
Tensor bce_with_logits(Tape& tape, const Tensor& logit, double label);

// LSTM recurrence over a precomputed input projection proj [T x 4H] (gate
// order input, forget, candidate, output). Masked steps leave the state
// untouched and produce zero rows.
//
// window == 0: one pass from a zero state; row t is the hidden state after
// step t. window > 0: row p is the final hidden state of a fresh zero-state
// pass over steps max(0, p - window + 1)..p.
Tensor lstm_scan(Tape& tape, const Tensor& proj, const Tensor& w_hidden, const Tensor& bias,
                 const std::vector<bool>& mask, std::size_t window = 0);

// Attention context over the T*H scalar positions of values [T x H], position
// (t, i) flattened as t * H + i. The score between positions p = (t, i) and
// q = (s, j) is values[p] * values[q] * coupling[i, j]; each unmasked p takes
// a softmax over unmasked q and returns the weighted sum of value[q]
// (value is [T x H] too). Rows of masked time steps are zero. When weights is
// non-null it receives the [TH x TH] weight matrix (no gradient).
Tensor attention_context(Tape& tape, const Tensor& values, const Tensor& coupling, const Tensor& value,
                         const std::vector<bool>& mask, Tensor* weights = nullptr);

}  // namespace stattn::ops
