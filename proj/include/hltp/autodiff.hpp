#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "hltp/tensor.hpp"

namespace hltp::ad {

struct Node;
using Var = std::shared_ptr<Node>;

/// One tape node. Nodes are created in topological order (parents always have
/// smaller ids), so the backward pass is a sort by id — deterministic across
/// runs regardless of allocator behaviour.
struct Node {
  Tensor val;
  Tensor grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& g() {
    if (grad.numel() == 0) grad = Tensor(val.shape());
    return grad;
  }
};

Var constant(Tensor t);
Var constant_scalar(double v);
/// Leaf with requires_grad set; long-lived for model parameters.
Var leaf(Tensor t);

/// Runs reverse-mode accumulation from a scalar root.
void backward(const Var& root);

// ---- elementwise binary (same shape, or either side a 1-element scalar) ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);

// ---- unary ----
Var neg(const Var& a);
Var exp_(const Var& a);
Var log_(const Var& a);
Var sqrt_(const Var& a);
Var tanh_(const Var& a);
Var sigmoid_(const Var& a);
Var elu_(const Var& a);
Var relu_(const Var& a);
Var softplus_(const Var& a);
Var leaky_relu_(const Var& a, double slope);

// ---- structure ----
Var matmul(const Var& a, const Var& b);
Var linear(const Var& x, const Var& w, const Var& b);  // x·w + row-broadcast b
Var transpose(const Var& a);
Var slice_cols(const Var& a, std::size_t c0, std::size_t c1);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var select_row(const Var& a, std::size_t r);           // -> [1 x c]
Var repeat_row(const Var& v, std::size_t n);           // [1 x c] -> [n x c]
Var reshape(const Var& a, std::vector<std::size_t> shape);

// ---- reductions ----
Var sum_all(const Var& a);    // -> [1]
Var mean_all(const Var& a);   // -> [1]
Var sum_rows(const Var& a);   // [r x c] -> [1 x c]

/// Column-wise (axis=0) or row-wise (axis=1) softmax with entries excluded by
/// `mask` (0 = excluded) receiving exactly zero probability. `mask` indexes the
/// normalization axis.
Var masked_softmax(const Var& x, const Tensor& mask, int axis);

/// Zeroes rows whose mask entry is 0 (gradient blocked on those rows).
Var zero_rows(const Var& x, const Tensor& row_mask);

/// s [a x (t*block)] scaled per (row, frame) by h [a x t], broadcast over the
/// `block` channels of each frame.
Var mul_block_rows(const Var& s, const Var& h, std::size_t block);

/// Row-wise layer norm with affine parameters (gamma, beta of length cols).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Per-channel normalization over the valid rows of z [a x (t*channels)],
/// channels laid out frame-major. Statistics exclude rows with mask 0; those
/// rows are zeroed in the output.
Var masked_channel_norm(const Var& z, const Tensor& row_mask, std::size_t channels,
                        const Var& gamma, const Var& beta, double eps = 1e-5);

/// Inverted dropout; call only in training mode.
Var dropout(const Var& x, double p, std::mt19937_64& rng);

/// Shift-window score map. Slides an l x d window over the q and k maps in
/// lockstep (z steps per axis), accumulates the elementwise window products
/// back onto the canvas, normalizes each cell by its coverage count, and
/// scales by the learnable map w_a. Cells never covered stay zero.
struct ShiftWindow {
  std::size_t len_x = 0, len_y = 0;      // window dims (l, d)
  std::size_t stride_x = 0, stride_y = 0;
};
Var swa_shift_scores(const Var& q, const Var& k, const Var& w_a, const ShiftWindow& win);

/// Detaches a value from the tape (constant copy).
Var detach(const Var& a);

}  // namespace hltp::ad
