#include "hoist/graph.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "hoist/kernels.hpp"

namespace hoist {

namespace ker = hoist::kernels;

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "(";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape_[i]);
  }
  return s + ")";
}

Graph::Val Graph::push(Tensor value, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Val>(nodes_.size() - 1);
}

Tensor& Graph::grad_buf(Val v) {
  Node& n = nodes_[static_cast<size_t>(v)];
  if (n.grad.numel() != n.value.numel()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

Graph::Val Graph::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Graph::Val Graph::add(Val a, Val b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (!ta.same_shape(tb)) throw std::invalid_argument("add: shape mismatch");
  Tensor out(ta.shape());
  ker::add(ta.data(), tb.data(), out.data(), ta.numel());
  bool ng = needs_grad(a) || needs_grad(b);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, a, b, y] {
      const Tensor& gy = grad(y);
      if (needs_grad(a)) ker::axpy(1.0, gy.data(), grad_buf(a).data(), gy.numel());
      if (needs_grad(b)) ker::axpy(1.0, gy.data(), grad_buf(b).data(), gy.numel());
    };
  return y;
}

Graph::Val Graph::mul(Val a, Val b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (!ta.same_shape(tb)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out(ta.shape());
  ker::mul(ta.data(), tb.data(), out.data(), ta.numel());
  bool ng = needs_grad(a) || needs_grad(b);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, a, b, y] {
      const Tensor& gy = grad(y);
      const int64_t n = gy.numel();
      if (needs_grad(a)) {
        double* ga = grad_buf(a).data();
        const double* tb2 = val(b).data();
        const double* g = gy.data();
        for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * tb2[i];
      }
      if (needs_grad(b)) {
        double* gb = grad_buf(b).data();
        const double* ta2 = val(a).data();
        const double* g = gy.data();
        for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * ta2[i];
      }
    };
  return y;
}

Graph::Val Graph::scale(Val a, double alpha) {
  Tensor out(val(a).shape());
  const double* x = val(a).data();
  double* o = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] = alpha * x[i];
  bool ng = needs_grad(a);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, a, y, alpha] {
      ker::axpy(alpha, grad(y).data(), grad_buf(a).data(), grad(y).numel());
    };
  return y;
}

Graph::Val Graph::matmul(Val a, Val b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0))
    throw std::invalid_argument("matmul: bad shapes " + ta.shape_str() + " x " + tb.shape_str());
  const int M = ta.dim(0), K = ta.dim(1), N = tb.dim(1);
  Tensor out({M, N});
  ker::matmul(ta.data(), tb.data(), out.data(), M, K, N);
  bool ng = needs_grad(a) || needs_grad(b);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, a, b, y, M, K, N] {
      const Tensor& gy = grad(y);
      if (needs_grad(a)) ker::matmul_nt(gy.data(), val(b).data(), grad_buf(a).data(), M, N, K, true);
      if (needs_grad(b)) ker::matmul_tn(val(a).data(), gy.data(), grad_buf(b).data(), K, M, N, true);
    };
  return y;
}

Graph::Val Graph::matmul_nt(Val a, Val b) {
  const Tensor& ta = val(a);
  const Tensor& tb = val(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(1))
    throw std::invalid_argument("matmul_nt: bad shapes");
  const int M = ta.dim(0), K = ta.dim(1), N = tb.dim(0);
  Tensor out({M, N});
  ker::matmul_nt(ta.data(), tb.data(), out.data(), M, K, N);
  bool ng = needs_grad(a) || needs_grad(b);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, a, b, y, M, K, N] {
      const Tensor& gy = grad(y);  // (M,N)
      if (needs_grad(a)) ker::matmul(gy.data(), val(b).data(), grad_buf(a).data(), M, N, K, true);
      if (needs_grad(b)) ker::matmul_tn(gy.data(), val(a).data(), grad_buf(b).data(), N, M, K, true);
    };
  return y;
}

Graph::Val Graph::linear(Val x, Val w, Val bias) {
  const Tensor& tx = val(x);
  const Tensor& tw = val(w);
  const Tensor& tb = val(bias);
  if (tx.rank() != 2 || tw.rank() != 2 || tx.dim(1) != tw.dim(0) || tb.dim(0) != tw.dim(1))
    throw std::invalid_argument("linear: bad shapes");
  const int M = tx.dim(0), K = tx.dim(1), N = tw.dim(1);
  Tensor out({M, N});
  ker::matmul(tx.data(), tw.data(), out.data(), M, K, N);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) out(i, j) += tb(j);
  bool ng = needs_grad(x) || needs_grad(w) || needs_grad(bias);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, w, bias, y, M, K, N] {
      const Tensor& gy = grad(y);
      if (needs_grad(x)) ker::matmul_nt(gy.data(), val(w).data(), grad_buf(x).data(), M, N, K, true);
      if (needs_grad(w)) ker::matmul_tn(val(x).data(), gy.data(), grad_buf(w).data(), K, M, N, true);
      if (needs_grad(bias)) {
        Tensor& gb = grad_buf(bias);
        for (int i = 0; i < M; ++i)
          for (int j = 0; j < N; ++j) gb(j) += gy(i, j);
      }
    };
  return y;
}

Graph::Val Graph::conv2d(Val x, Val w, Val bias, int stride) {
  const Tensor& tx = val(x);
  const Tensor& tw = val(w);
  if (tx.rank() != 4 || tw.rank() != 4 || tx.dim(3) != tw.dim(2))
    throw std::invalid_argument("conv2d: bad shapes");
  const int T = tx.dim(0), H = tx.dim(1), W = tx.dim(2), Ci = tx.dim(3);
  const int kh = tw.dim(0), kw = tw.dim(1), Co = tw.dim(3);
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  Tensor out({T, Ho, Wo, Co});
  ker::conv2d(tx.data(), tw.data(), val(bias).data(), out.data(), T, H, W, Ci, kh, kw, Co, stride);
  bool ng = needs_grad(x) || needs_grad(w) || needs_grad(bias);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, w, bias, y, T, H, W, Ci, kh, kw, Co, stride] {
      const Tensor& gy = grad(y);
      if (needs_grad(x))
        ker::conv2d_grad_input(gy.data(), val(w).data(), grad_buf(x).data(), T, H, W, Ci, kh, kw,
                               Co, stride, true);
      if (needs_grad(w) || needs_grad(bias))
        ker::conv2d_grad_weights(gy.data(), val(x).data(), grad_buf(w).data(),
                                 needs_grad(bias) ? grad_buf(bias).data() : nullptr, T, H, W, Ci,
                                 kh, kw, Co, stride, true);
    };
  return y;
}

Graph::Val Graph::gelu(Val x) {
  Tensor out(val(x).shape());
  ker::gelu(val(x).data(), out.data(), out.numel());
  bool ng = needs_grad(x);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, y] {
      ker::gelu_backward(val(x).data(), grad(y).data(), grad_buf(x).data(), grad(y).numel(), true);
    };
  return y;
}

Graph::Val Graph::sigmoid(Val x) {
  Tensor out(val(x).shape());
  ker::sigmoid(val(x).data(), out.data(), out.numel());
  bool ng = needs_grad(x);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, y] {
      ker::sigmoid_backward(val(y).data(), grad(y).data(), grad_buf(x).data(), grad(y).numel(),
                            true);
    };
  return y;
}

Graph::Val Graph::relu(Val x) {
  Tensor out(val(x).shape());
  const double* in = val(x).data();
  double* o = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] = in[i] > 0 ? in[i] : 0.0;
  bool ng = needs_grad(x);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, y] {
      const double* in = val(x).data();
      const double* g = grad(y).data();
      double* gx = grad_buf(x).data();
      for (int64_t i = 0; i < grad(y).numel(); ++i)
        if (in[i] > 0) gx[i] += g[i];
    };
  return y;
}

Graph::Val Graph::upsample_nearest(Val x, int factor) {
  const Tensor& tx = val(x);
  if (tx.rank() != 4) throw std::invalid_argument("upsample_nearest: rank != 4");
  const int T = tx.dim(0), H = tx.dim(1), W = tx.dim(2), C = tx.dim(3);
  Tensor out({T, H * factor, W * factor, C});
  for (int t = 0; t < T; ++t)
    for (int y0 = 0; y0 < H * factor; ++y0)
      for (int x0 = 0; x0 < W * factor; ++x0)
        std::memcpy(&out(t, y0, x0, 0), &tx(t, y0 / factor, x0 / factor, 0),
                    sizeof(double) * static_cast<size_t>(C));
  bool ng = needs_grad(x);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, y, T, H, W, C, factor] {
      const Tensor& gy = grad(y);
      Tensor& gx = grad_buf(x);
      for (int t = 0; t < T; ++t)
        for (int y0 = 0; y0 < H * factor; ++y0)
          for (int x0 = 0; x0 < W * factor; ++x0)
            for (int c = 0; c < C; ++c) gx(t, y0 / factor, x0 / factor, c) += gy(t, y0, x0, c);
    };
  return y;
}

Graph::Val Graph::add_temporal(Val x, Val table) {
  const Tensor& tx = val(x);
  const Tensor& tt = val(table);
  if (tx.rank() != 4 || tt.rank() != 2 || tx.dim(3) != tt.dim(1))
    throw std::invalid_argument("add_temporal: bad shapes");
  const int T = tx.dim(0), H = tx.dim(1), W = tx.dim(2), C = tx.dim(3);
  if (T > tt.dim(0)) throw std::invalid_argument("add_temporal: clip longer than embedding table");
  Tensor out = tx;
  for (int t = 0; t < T; ++t)
    for (int y0 = 0; y0 < H; ++y0)
      for (int x0 = 0; x0 < W; ++x0)
        for (int c = 0; c < C; ++c) out(t, y0, x0, c) += tt(t, c);
  bool ng = needs_grad(x) || needs_grad(table);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, table, y, T, H, W, C] {
      const Tensor& gy = grad(y);
      if (needs_grad(x)) ker::axpy(1.0, gy.data(), grad_buf(x).data(), gy.numel());
      if (needs_grad(table)) {
        Tensor& gt = grad_buf(table);
        for (int t = 0; t < T; ++t)
          for (int y0 = 0; y0 < H; ++y0)
            for (int x0 = 0; x0 < W; ++x0)
              for (int c = 0; c < C; ++c) gt(t, c) += gy(t, y0, x0, c);
      }
    };
  return y;
}

Graph::Val Graph::softmax_rows(Val logits, const Tensor* bias) {
  const Tensor& tz = val(logits);
  if (tz.rank() != 2) throw std::invalid_argument("softmax_rows: rank != 2");
  const int R = tz.dim(0), S = tz.dim(1);
  if (bias && !(bias->rank() == 2 && bias->dim(0) == R && bias->dim(1) == S))
    throw std::invalid_argument("softmax_rows: bias shape mismatch");
  Tensor out({R, S});
  ker::softmax_rows(tz.data(), bias ? bias->data() : nullptr, out.data(), R, S);
  bool ng = needs_grad(logits);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, logits, y, R, S] {
      ker::softmax_rows_backward(val(y).data(), grad(y).data(), grad_buf(logits).data(), R, S,
                                 true);
    };
  return y;
}

Graph::Val Graph::reshape(Val x, std::vector<int> shape) {
  const Tensor& tx = val(x);
  if (Tensor::numel_of(shape) != tx.numel()) throw std::invalid_argument("reshape: numel mismatch");
  Tensor out = Tensor::from(std::move(shape),
                            std::vector<double>(tx.data(), tx.data() + tx.numel()));
  bool ng = needs_grad(x);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, y] {
      ker::axpy(1.0, grad(y).data(), grad_buf(x).data(), grad(y).numel());
    };
  return y;
}

Graph::Val Graph::slice_row(Val x, int row) {
  const Tensor& tx = val(x);
  if (tx.rank() != 2 || row < 0 || row >= tx.dim(0))
    throw std::invalid_argument("slice_row: bad row");
  const int S = tx.dim(1);
  Tensor out({S});
  std::memcpy(out.data(), tx.data() + static_cast<int64_t>(row) * S,
              sizeof(double) * static_cast<size_t>(S));
  bool ng = needs_grad(x);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, y, row, S] {
      const double* g = grad(y).data();
      double* gx = grad_buf(x).data() + static_cast<int64_t>(row) * S;
      for (int i = 0; i < S; ++i) gx[i] += g[i];
    };
  return y;
}

Graph::Val Graph::sum(Val x) {
  double s = ker::sum(val(x).data(), val(x).numel());
  bool ng = needs_grad(x);
  Val y = push(Tensor::scalar(s), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, y] {
      const double g = grad(y)[0];
      double* gx = grad_buf(x).data();
      for (int64_t i = 0; i < val(x).numel(); ++i) gx[i] += g;
    };
  return y;
}

Graph::Val Graph::weighted_sum(const std::vector<Val>& scalars, const std::vector<double>& coeffs) {
  if (scalars.size() != coeffs.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  double total = 0.0;
  bool ng = false;
  for (size_t i = 0; i < scalars.size(); ++i) {
    if (val(scalars[i]).numel() != 1) throw std::invalid_argument("weighted_sum: non-scalar input");
    total += coeffs[i] * val(scalars[i])[0];
    ng = ng || needs_grad(scalars[i]);
  }
  Val y = push(Tensor::scalar(total), ng, nullptr);
  if (ng) {
    std::vector<Val> vs = scalars;
    std::vector<double> cs = coeffs;
    nodes_.back().back = [this, vs, cs, y] {
      const double g = grad(y)[0];
      for (size_t i = 0; i < vs.size(); ++i)
        if (needs_grad(vs[i])) grad_buf(vs[i])[0] += g * cs[i];
    };
  }
  return y;
}

Graph::Val Graph::bce_mean(Val pred, const Tensor& gt) {
  const Tensor& p = val(pred);
  if (!p.same_shape(gt)) throw std::invalid_argument("bce_mean: shape mismatch");
  const int64_t n = p.numel();
  const double eps = 1e-12;
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double pi = p[i];
    if (pi < 0.0 || pi > 1.0) throw std::invalid_argument("bce_mean: prediction outside [0,1]");
    loss += gt[i] > 0.5 ? -std::log(pi > eps ? pi : eps)
                        : -std::log(1.0 - pi > eps ? 1.0 - pi : eps);
  }
  loss /= static_cast<double>(n);
  bool ng = needs_grad(pred);
  Val y = push(Tensor::scalar(loss), ng, nullptr);
  if (ng) {
    Tensor g = gt;
    nodes_.back().back = [this, pred, y, g, n, eps] {
      const double gy = grad(y)[0] / static_cast<double>(n);
      const double* p2 = val(pred).data();
      double* gp = grad_buf(pred).data();
      for (int64_t i = 0; i < n; ++i) {
        if (g[i] > 0.5) {
          if (p2[i] > eps) gp[i] += gy * (-1.0 / p2[i]);
        } else {
          if (1.0 - p2[i] > eps) gp[i] += gy * (1.0 / (1.0 - p2[i]));
        }
      }
    };
  }
  return y;
}

Graph::Val Graph::bce_with_logits_mean(Val logits, const Tensor& gt) {
  const Tensor& z = val(logits);
  if (!z.same_shape(gt)) throw std::invalid_argument("bce_with_logits_mean: shape mismatch");
  const int64_t n = z.numel();
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double zi = z[i];
    loss += (zi > 0 ? zi : 0.0) - zi * gt[i] + std::log1p(std::exp(-std::fabs(zi)));
  }
  loss /= static_cast<double>(n);
  bool ng = needs_grad(logits);
  Val y = push(Tensor::scalar(loss), ng, nullptr);
  if (ng) {
    Tensor g = gt;
    nodes_.back().back = [this, logits, y, g, n] {
      const double gy = grad(y)[0] / static_cast<double>(n);
      const double* z2 = val(logits).data();
      double* gz = grad_buf(logits).data();
      for (int64_t i = 0; i < n; ++i) gz[i] += gy * (1.0 / (1.0 + std::exp(-z2[i])) - g[i]);
    };
  }
  return y;
}

Graph::Val Graph::dice_loss(Val pred, const Tensor& gt, double eps) {
  const Tensor& p = val(pred);
  if (!p.same_shape(gt)) throw std::invalid_argument("dice_loss: shape mismatch");
  const int64_t n = p.numel();
  double inter = 0.0, psum = 0.0, gsum = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double pi = p[i];
    if (pi < 0.0 || pi > 1.0) throw std::invalid_argument("dice_loss: prediction outside [0,1]");
    inter += pi * gt[i];
    psum += pi;
    gsum += gt[i];
  }
  const double denom = psum + gsum + eps;
  const double loss = 1.0 - (2.0 * inter + eps) / denom;
  bool ng = needs_grad(pred);
  Val y = push(Tensor::scalar(loss), ng, nullptr);
  if (ng) {
    Tensor g = gt;
    nodes_.back().back = [this, pred, y, g, n, inter, denom, eps] {
      const double gy = grad(y)[0];
      const double num = 2.0 * inter + eps;
      const double* gp0 = g.data();
      double* gp = grad_buf(pred).data();
      // d/dp_i [1 - num/denom] = -(2*g_i*denom - num) / denom^2
      const double inv2 = 1.0 / (denom * denom);
      for (int64_t i = 0; i < n; ++i) gp[i] += gy * (-(2.0 * gp0[i] * denom - num) * inv2);
    };
  }
  return y;
}

Graph::Val Graph::cross_entropy_rows(Val logits, const std::vector<int>& targets,
                                     const std::vector<double>& row_weights) {
  const Tensor& z = val(logits);
  if (z.rank() != 2) throw std::invalid_argument("cross_entropy_rows: rank != 2");
  const int R = z.dim(0), C = z.dim(1);
  if (static_cast<int>(targets.size()) != R || static_cast<int>(row_weights.size()) != R)
    throw std::invalid_argument("cross_entropy_rows: target size mismatch");
  Tensor probs({R, C});
  ker::softmax_rows(z.data(), nullptr, probs.data(), R, C);
  double loss = 0.0;
  for (int r = 0; r < R; ++r) {
    double pr = probs(r, targets[static_cast<size_t>(r)]);
    loss += row_weights[static_cast<size_t>(r)] * (-std::log(pr > 1e-300 ? pr : 1e-300));
  }
  loss /= static_cast<double>(R);
  bool ng = needs_grad(logits);
  Val y = push(Tensor::scalar(loss), ng, nullptr);
  if (ng) {
    std::vector<int> tg = targets;
    std::vector<double> wt = row_weights;
    Tensor pr = probs;
    nodes_.back().back = [this, logits, y, tg, wt, pr, R, C] {
      const double gy = grad(y)[0] / static_cast<double>(R);
      Tensor& gz = grad_buf(logits);
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) {
          double delta = (c == tg[static_cast<size_t>(r)]) ? 1.0 : 0.0;
          gz(r, c) += gy * wt[static_cast<size_t>(r)] * (pr(r, c) - delta);
        }
    };
  }
  return y;
}

Graph::Val Graph::dilate_noisy_or(Val x, int radius) {
  const Tensor& tx = val(x);
  if (tx.rank() != 4) throw std::invalid_argument("dilate_noisy_or: rank != 4");
  const int N = tx.dim(0), T = tx.dim(1), H = tx.dim(2), W = tx.dim(3);
  Tensor out({N, T, H, W});
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int yy = 0; yy < H; ++yy)
        for (int xx = 0; xx < W; ++xx) {
          double neg = 1.0;
          for (int dy = -radius; dy <= radius; ++dy) {
            const int y2 = yy + dy;
            if (y2 < 0 || y2 >= H) continue;
            for (int dx = -radius; dx <= radius; ++dx) {
              const int x2 = xx + dx;
              if (x2 < 0 || x2 >= W) continue;
              neg *= 1.0 - tx(n, t, y2, x2);
            }
          }
          out(n, t, yy, xx) = 1.0 - neg;
        }
  bool ng = needs_grad(x);
  Val y = push(std::move(out), ng, nullptr);
  if (ng)
    nodes_.back().back = [this, x, y, N, T, H, W, radius] {
      const Tensor& gy = grad(y);
      const Tensor& tx2 = val(x);
      const Tensor& ty = val(y);
      Tensor& gx = grad_buf(x);
      // d out(c) / d x(p) = prod_{q in win(c), q != p} (1 - x(q))
      //                   = (1 - out(c)) / (1 - x(p))   when x(p) < 1.
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t)
          for (int yy = 0; yy < H; ++yy)
            for (int xx = 0; xx < W; ++xx) {
              const double g = gy(n, t, yy, xx);
              if (g == 0.0) continue;
              const double neg = 1.0 - ty(n, t, yy, xx);
              for (int dy = -radius; dy <= radius; ++dy) {
                const int y2 = yy + dy;
                if (y2 < 0 || y2 >= H) continue;
                for (int dx = -radius; dx <= radius; ++dx) {
                  const int x2 = xx + dx;
                  if (x2 < 0 || x2 >= W) continue;
                  const double xi = tx2(n, t, y2, x2);
                  const double rest = (1.0 - xi) > 1e-12 ? neg / (1.0 - xi) : 0.0;
                  gx(n, t, y2, x2) += g * rest;
                }
              }
            }
    };
  return y;
}

void Graph::backward(Val loss) {
  Node& top = nodes_[static_cast<size_t>(loss)];
  if (top.value.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  grad_buf(loss)[0] = 1.0;
  for (int i = loss; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.needs_grad || !n.back) continue;
    if (n.grad.numel() != n.value.numel()) continue;  // no grad reached this node
    n.back();
  }
}

}  // namespace hoist
