#include "hoist/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hoist::kernels {

namespace {

inline void matmul_row(const double* arow, const double* b, double* crow, int K, int N, bool acc) {
  if (!acc) std::fill(crow, crow + N, 0.0);
  for (int k = 0; k < K; ++k) {
    const double av = arow[k];
    const double* brow = b + static_cast<int64_t>(k) * N;
    for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
  }
}

inline void matmul_nt_row(const double* arow, const double* b, double* crow, int K, int N,
                          bool acc) {
  for (int j = 0; j < N; ++j) {
    const double* brow = b + static_cast<int64_t>(j) * K;
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += arow[k] * brow[k];
    crow[j] = acc ? crow[j] + s : s;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* crow, int i, int M, int K,
                          int N, bool acc) {
  // c(i,j) = sum_k a(k,i) * b(k,j)
  if (!acc) std::fill(crow, crow + N, 0.0);
  for (int k = 0; k < K; ++k) {
    const double av = a[static_cast<int64_t>(k) * M + i];
    const double* brow = b + static_cast<int64_t>(k) * N;
    for (int j = 0; j < N; ++j) crow[j] += av * brow[j];
  }
}

inline void softmax_row(const double* z, const double* bias, double* y, int S) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < S; ++s) {
    double v = bias ? z[s] + bias[s] : z[s];
    if (v > mx) mx = v;
  }
  double denom = 0.0;
  for (int s = 0; s < S; ++s) {
    double v = bias ? z[s] + bias[s] : z[s];
    double e = std::isinf(v) && v < 0 ? 0.0 : std::exp(v - mx);
    y[s] = e;
    denom += e;
  }
  double inv = 1.0 / denom;
  for (int s = 0; s < S; ++s) y[s] *= inv;
}

inline void conv2d_point(const double* in, const double* w, const double* b, double* out, int t,
                         int yo, int xo, int H, int W, int Ci, int kh, int kw, int Co,
                         int stride) {
  const int ph = kh / 2, pw = kw / 2;
  const double* inT = in + static_cast<int64_t>(t) * H * W * Ci;
  for (int co = 0; co < Co; ++co) out[co] = b ? b[co] : 0.0;
  for (int ky = 0; ky < kh; ++ky) {
    const int yi = yo * stride + ky - ph;
    if (yi < 0 || yi >= H) continue;
    for (int kx = 0; kx < kw; ++kx) {
      const int xi = xo * stride + kx - pw;
      if (xi < 0 || xi >= W) continue;
      const double* px = inT + (static_cast<int64_t>(yi) * W + xi) * Ci;
      const double* wk = w + (static_cast<int64_t>(ky) * kw + kx) * Ci * Co;
      for (int ci = 0; ci < Ci; ++ci) {
        const double v = px[ci];
        const double* wrow = wk + static_cast<int64_t>(ci) * Co;
        for (int co = 0; co < Co; ++co) out[co] += v * wrow[co];
      }
    }
  }
}

inline void conv2d_grad_input_point(const double* dout, const double* w, double* din, int t,
                                    int yi, int xi, int H, int W, int Ci, int kh, int kw, int Co,
                                    int stride, bool acc) {
  const int ph = kh / 2, pw = kw / 2;
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  const double* doutT = dout + static_cast<int64_t>(t) * Ho * Wo * Co;
  if (!acc) std::fill(din, din + Ci, 0.0);
  for (int ky = 0; ky < kh; ++ky) {
    const int ynum = yi - ky + ph;
    if (ynum % stride != 0) continue;
    const int yo = ynum / stride;
    if (yo < 0 || yo >= Ho) continue;
    for (int kx = 0; kx < kw; ++kx) {
      const int xnum = xi - kx + pw;
      if (xnum % stride != 0) continue;
      const int xo = xnum / stride;
      if (xo < 0 || xo >= Wo) continue;
      const double* gr = doutT + (static_cast<int64_t>(yo) * Wo + xo) * Co;
      const double* wk = w + (static_cast<int64_t>(ky) * kw + kx) * Ci * Co;
      for (int ci = 0; ci < Ci; ++ci) {
        const double* wrow = wk + static_cast<int64_t>(ci) * Co;
        double s = 0.0;
        for (int co = 0; co < Co; ++co) s += gr[co] * wrow[co];
        din[ci] += s;
      }
    }
  }
}

inline double gelu_one(double x) { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244)); }

inline double gelu_grad_one(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
  const double pdf = 0.3989422804014326779 * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

constexpr int kSumChunks = 64;

}  // namespace

void matmul(const double* a, const double* b, double* c, int M, int K, int N, bool acc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i)
    matmul_row(a + static_cast<int64_t>(i) * K, b, c + static_cast<int64_t>(i) * N, K, N, acc);
}

void matmul_nt(const double* a, const double* b, double* c, int M, int K, int N, bool acc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i)
    matmul_nt_row(a + static_cast<int64_t>(i) * K, b, c + static_cast<int64_t>(i) * N, K, N, acc);
}

void matmul_tn(const double* a, const double* b, double* c, int M, int K, int N, bool acc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i)
    matmul_tn_row(a, b, c + static_cast<int64_t>(i) * N, i, M, K, N, acc);
}

void softmax_rows(const double* logits, const double* bias, double* out, int R, int S) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < R; ++r)
    softmax_row(logits + static_cast<int64_t>(r) * S, bias ? bias + static_cast<int64_t>(r) * S : nullptr,
                out + static_cast<int64_t>(r) * S, S);
}

void softmax_rows_backward(const double* y, const double* dy, double* dz, int R, int S, bool acc) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < R; ++r) {
    const double* yr = y + static_cast<int64_t>(r) * S;
    const double* dyr = dy + static_cast<int64_t>(r) * S;
    double* dzr = dz + static_cast<int64_t>(r) * S;
    double inner = 0.0;
    for (int s = 0; s < S; ++s) inner += yr[s] * dyr[s];
    for (int s = 0; s < S; ++s) {
      double g = yr[s] * (dyr[s] - inner);
      dzr[s] = acc ? dzr[s] + g : g;
    }
  }
}

void conv2d(const double* in, const double* w, const double* b, double* out, int T, int H, int W,
            int Ci, int kh, int kw, int Co, int stride) {
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  const int64_t rows = static_cast<int64_t>(T) * Ho * Wo;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const int t = static_cast<int>(r / (static_cast<int64_t>(Ho) * Wo));
    const int rem = static_cast<int>(r % (static_cast<int64_t>(Ho) * Wo));
    conv2d_point(in, w, b, out + r * Co, t, rem / Wo, rem % Wo, H, W, Ci, kh, kw, Co, stride);
  }
}

void conv2d_grad_input(const double* dout, const double* w, double* din, int T, int H, int W,
                       int Ci, int kh, int kw, int Co, int stride, bool acc) {
  const int64_t rows = static_cast<int64_t>(T) * H * W;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const int t = static_cast<int>(r / (static_cast<int64_t>(H) * W));
    const int rem = static_cast<int>(r % (static_cast<int64_t>(H) * W));
    conv2d_grad_input_point(dout, w, din + r * Ci, t, rem / W, rem % W, H, W, Ci, kh, kw, Co,
                            stride, acc);
  }
}

void conv2d_grad_weights(const double* dout, const double* in, double* dw, double* db, int T,
                         int H, int W, int Ci, int kh, int kw, int Co, int stride, bool acc) {
  const int ph = kh / 2, pw = kw / 2;
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  const int64_t wsize = static_cast<int64_t>(kh) * kw * Ci * Co;
#pragma omp parallel for schedule(static)
  for (int64_t idx = 0; idx < wsize; ++idx) {
    const int co = static_cast<int>(idx % Co);
    const int ci = static_cast<int>((idx / Co) % Ci);
    const int kx = static_cast<int>((idx / (static_cast<int64_t>(Co) * Ci)) % kw);
    const int ky = static_cast<int>(idx / (static_cast<int64_t>(Co) * Ci * kw));
    double s = 0.0;
    for (int t = 0; t < T; ++t) {
      const double* inT = in + static_cast<int64_t>(t) * H * W * Ci;
      const double* doutT = dout + static_cast<int64_t>(t) * Ho * Wo * Co;
      for (int yo = 0; yo < Ho; ++yo) {
        const int yi = yo * stride + ky - ph;
        if (yi < 0 || yi >= H) continue;
        for (int xo = 0; xo < Wo; ++xo) {
          const int xi = xo * stride + kx - pw;
          if (xi < 0 || xi >= W) continue;
          s += doutT[(static_cast<int64_t>(yo) * Wo + xo) * Co + co] *
               inT[(static_cast<int64_t>(yi) * W + xi) * Ci + ci];
        }
      }
    }
    dw[idx] = acc ? dw[idx] + s : s;
  }
  if (db) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < Co; ++co) {
      double s = 0.0;
      const int64_t n = static_cast<int64_t>(T) * Ho * Wo;
      for (int64_t r = 0; r < n; ++r) s += dout[r * Co + co];
      db[co] = acc ? db[co] + s : s;
    }
  }
}

void sigmoid(const double* x, double* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void sigmoid_backward(const double* y, const double* dy, double* dx, int64_t n, bool acc) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    double g = dy[i] * y[i] * (1.0 - y[i]);
    dx[i] = acc ? dx[i] + g : g;
  }
}

void gelu(const double* x, double* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_backward(const double* x, const double* dy, double* dx, int64_t n, bool acc) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    double g = dy[i] * gelu_grad_one(x[i]);
    dx[i] = acc ? dx[i] + g : g;
  }
}

void add(const double* a, const double* b, double* c, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* c, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Fixed 64-way chunking keeps the reduction order independent of the thread
// count, so sums are reproducible run to run.
double sum(const double* x, int64_t n) {
  if (n == 0) return 0.0;
  double partial[kSumChunks] = {0.0};
  const int64_t chunk = (n + kSumChunks - 1) / kSumChunks;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < kSumChunks; ++c) {
    const int64_t lo = c * chunk, hi = std::min<int64_t>(n, lo + chunk);
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += x[i];
    partial[c] = s;
  }
  double total = 0.0;
  for (int c = 0; c < kSumChunks; ++c) total += partial[c];
  return total;
}

double dot(const double* a, const double* b, int64_t n) {
  if (n == 0) return 0.0;
  double partial[kSumChunks] = {0.0};
  const int64_t chunk = (n + kSumChunks - 1) / kSumChunks;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < kSumChunks; ++c) {
    const int64_t lo = c * chunk, hi = std::min<int64_t>(n, lo + chunk);
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += a[i] * b[i];
    partial[c] = s;
  }
  double total = 0.0;
  for (int c = 0; c < kSumChunks; ++c) total += partial[c];
  return total;
}

namespace serial {

void matmul(const double* a, const double* b, double* c, int M, int K, int N, bool acc) {
  for (int i = 0; i < M; ++i)
    matmul_row(a + static_cast<int64_t>(i) * K, b, c + static_cast<int64_t>(i) * N, K, N, acc);
}

void matmul_nt(const double* a, const double* b, double* c, int M, int K, int N, bool acc) {
  for (int i = 0; i < M; ++i)
    matmul_nt_row(a + static_cast<int64_t>(i) * K, b, c + static_cast<int64_t>(i) * N, K, N, acc);
}

void matmul_tn(const double* a, const double* b, double* c, int M, int K, int N, bool acc) {
  for (int i = 0; i < M; ++i)
    matmul_tn_row(a, b, c + static_cast<int64_t>(i) * N, i, M, K, N, acc);
}

void softmax_rows(const double* logits, const double* bias, double* out, int R, int S) {
  for (int r = 0; r < R; ++r)
    softmax_row(logits + static_cast<int64_t>(r) * S, bias ? bias + static_cast<int64_t>(r) * S : nullptr,
                out + static_cast<int64_t>(r) * S, S);
}

void conv2d(const double* in, const double* w, const double* b, double* out, int T, int H, int W,
            int Ci, int kh, int kw, int Co, int stride) {
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  for (int t = 0; t < T; ++t)
    for (int yo = 0; yo < Ho; ++yo)
      for (int xo = 0; xo < Wo; ++xo)
        conv2d_point(in, w, b,
                     out + ((static_cast<int64_t>(t) * Ho + yo) * Wo + xo) * Co, t, yo, xo, H, W,
                     Ci, kh, kw, Co, stride);
}

void conv2d_grad_input(const double* dout, const double* w, double* din, int T, int H, int W,
                       int Ci, int kh, int kw, int Co, int stride, bool acc) {
  for (int t = 0; t < T; ++t)
    for (int yi = 0; yi < H; ++yi)
      for (int xi = 0; xi < W; ++xi)
        conv2d_grad_input_point(dout, w,
                                din + ((static_cast<int64_t>(t) * H + yi) * W + xi) * Ci, t, yi,
                                xi, H, W, Ci, kh, kw, Co, stride, acc);
}

void conv2d_grad_weights(const double* dout, const double* in, double* dw, double* db, int T,
                         int H, int W, int Ci, int kh, int kw, int Co, int stride, bool acc) {
  const int ph = kh / 2, pw = kw / 2;
  const int Ho = (H + stride - 1) / stride, Wo = (W + stride - 1) / stride;
  const int64_t wsize = static_cast<int64_t>(kh) * kw * Ci * Co;
  for (int64_t idx = 0; idx < wsize; ++idx) {
    const int co = static_cast<int>(idx % Co);
    const int ci = static_cast<int>((idx / Co) % Ci);
    const int kx = static_cast<int>((idx / (static_cast<int64_t>(Co) * Ci)) % kw);
    const int ky = static_cast<int>(idx / (static_cast<int64_t>(Co) * Ci * kw));
    double s = 0.0;
    for (int t = 0; t < T; ++t) {
      const double* inT = in + static_cast<int64_t>(t) * H * W * Ci;
      const double* doutT = dout + static_cast<int64_t>(t) * Ho * Wo * Co;
      for (int yo = 0; yo < Ho; ++yo) {
        const int yi = yo * stride + ky - ph;
        if (yi < 0 || yi >= H) continue;
        for (int xo = 0; xo < Wo; ++xo) {
          const int xi = xo * stride + kx - pw;
          if (xi < 0 || xi >= W) continue;
          s += doutT[(static_cast<int64_t>(yo) * Wo + xo) * Co + co] *
               inT[(static_cast<int64_t>(yi) * W + xi) * Ci + ci];
        }
      }
    }
    dw[idx] = acc ? dw[idx] + s : s;
  }
  if (db) {
    for (int co = 0; co < Co; ++co) {
      double s = 0.0;
      const int64_t n = static_cast<int64_t>(T) * Ho * Wo;
      for (int64_t r = 0; r < n; ++r) s += dout[r * Co + co];
      db[co] = acc ? db[co] + s : s;
    }
  }
}

void sigmoid(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void gelu(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

double sum(const double* x, int64_t n) {
  double partial[kSumChunks] = {0.0};
  if (n == 0) return 0.0;
  const int64_t chunk = (n + kSumChunks - 1) / kSumChunks;
  for (int c = 0; c < kSumChunks; ++c) {
    const int64_t lo = c * chunk, hi = std::min<int64_t>(n, lo + chunk);
    double s = 0.0;
    for (int64_t i = lo; i < hi; ++i) s += x[i];
    partial[c] = s;
  }
  double total = 0.0;
  for (int c = 0; c < kSumChunks; ++c) total += partial[c];
  return total;
}

}  // namespace serial

}  // namespace hoist::kernels
