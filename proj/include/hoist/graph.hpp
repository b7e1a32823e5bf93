#pragma once

#include <functional>
#include <vector>

#include "hoist/tensor.hpp"

namespace hoist {

// Eager reverse-mode tape. Ops compute their value on construction and record
// a backward closure; backward() replays them in reverse. Node handles are
// plain indices into the tape.
class Graph {
 public:
  using Val = int;

  Val leaf(Tensor value, bool requires_grad = false);

  const Tensor& val(Val v) const { return nodes_[static_cast<size_t>(v)].value; }
  const Tensor& grad(Val v) const { return nodes_[static_cast<size_t>(v)].grad; }
  bool needs_grad(Val v) const { return nodes_[static_cast<size_t>(v)].needs_grad; }

  // y = a + b (same shape)
  Val add(Val a, Val b);
  // y = a * b elementwise
  Val mul(Val a, Val b);
  // y = alpha * a
  Val scale(Val a, double alpha);
  // y = a(M,K) @ b(K,N)
  Val matmul(Val a, Val b);
  // y = a(M,K) @ b(N,K)^T
  Val matmul_nt(Val a, Val b);
  // y = x(M,K) @ w(K,N) + bias(N) per row
  Val linear(Val x, Val w, Val bias);
  // NHWC conv over leading T frames, zero "same" padding, given stride.
  Val conv2d(Val x, Val w, Val bias, int stride);
  Val gelu(Val x);
  Val sigmoid(Val x);
  Val relu(Val x);
  // Nearest-neighbour spatial upsample of (T,H,W,C) by integer factor.
  Val upsample_nearest(Val x, int factor);
  // x(T,H,W,C) + emb rows 0..T-1 of table(Tmax,C), broadcast over H,W.
  Val add_temporal(Val x, Val table);
  // Row-wise softmax with an optional constant additive bias (e.g. {0,-inf}).
  Val softmax_rows(Val logits, const Tensor* bias = nullptr);
  Val reshape(Val x, std::vector<int> shape);
  // One row of a (R,S) matrix as a rank-1 value.
  Val slice_row(Val x, int row);
  // Scalar: sum of all elements.
  Val sum(Val x);
  // Scalar: sum_i coeff_i * scalar_i.
  Val weighted_sum(const std::vector<Val>& scalars, const std::vector<double>& coeffs);

  // Mean binary cross-entropy on probabilities in [0,1]; gt is constant.
  Val bce_mean(Val pred, const Tensor& gt);
  // Numerically fused sigmoid + BCE on raw logits.
  Val bce_with_logits_mean(Val logits, const Tensor& gt);
  // 1 - (2*sum(p*g)+eps) / (sum(p)+sum(g)+eps)
  Val dice_loss(Val pred, const Tensor& gt, double eps);
  // Per-row softmax cross-entropy, row weights applied, averaged over rows.
  Val cross_entropy_rows(Val logits, const std::vector<int>& targets,
                         const std::vector<double>& row_weights);
  // Soft dilation: per frame, noisy-or over a (2r+1)^2 window. Input
  // (N,T,H,W) probabilities; equals binary dilation on {0,1} inputs.
  Val dilate_noisy_or(Val x, int radius);

  void backward(Val loss);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void()> back;  // empty for leaves
  };

  Val push(Tensor value, bool needs_grad, std::function<void()> back);
  Tensor& grad_buf(Val v);

  std::vector<Node> nodes_;
};

}  // namespace hoist
