#pragma once

#include <cstdint>

// Raw compute kernels behind the tensor graph. Every kernel in hoist::kernels
// is OpenMP-parallel over independent output elements, so results are
// bit-identical to the serial twins in hoist::kernels::serial regardless of
// thread count. Tests compare the two families; tools/bench times them.

namespace hoist::kernels {

// c = a(M,K) * b(K,N), row-major. acc: add into c instead of overwrite.
void matmul(const double* a, const double* b, double* c, int M, int K, int N, bool acc = false);

// c = a(M,K) * b(N,K)^T -> (M,N)
void matmul_nt(const double* a, const double* b, double* c, int M, int K, int N, bool acc = false);

// c = a(K,M)^T * b(K,N) -> (M,N)
void matmul_tn(const double* a, const double* b, double* c, int M, int K, int N, bool acc = false);

// Row-wise softmax over S columns. bias may be null; entries of -inf knock
// locations out of the support. Every row must keep at least one finite entry.
void softmax_rows(const double* logits, const double* bias, double* out, int R, int S);

// dL/dz for z -> softmax(z): dz = y * (dy - sum(dy * y)).
void softmax_rows_backward(const double* y, const double* dy, double* dz, int R, int S, bool acc);

// 2D convolution over T independent frames, NHWC layout, zero padding
// (kh/2, kw/2), arbitrary stride.
void conv2d(const double* in, const double* w, const double* b, double* out, int T, int H, int W,
            int Ci, int kh, int kw, int Co, int stride);
void conv2d_grad_input(const double* dout, const double* w, double* din, int T, int H, int W,
                       int Ci, int kh, int kw, int Co, int stride, bool acc);
void conv2d_grad_weights(const double* dout, const double* in, double* dw, double* db, int T,
                         int H, int W, int Ci, int kh, int kw, int Co, int stride, bool acc);

// Elementwise maps with derivative-given-input companions.
void sigmoid(const double* x, double* y, int64_t n);
void sigmoid_backward(const double* y, const double* dy, double* dx, int64_t n, bool acc);
void gelu(const double* x, double* y, int64_t n);
void gelu_backward(const double* x, const double* dy, double* dx, int64_t n, bool acc);

void add(const double* a, const double* b, double* c, int64_t n);
void mul(const double* a, const double* b, double* c, int64_t n);
void axpy(double alpha, const double* x, double* y, int64_t n);  // y += alpha*x

// Deterministic sum: fixed chunking independent of thread count.
double sum(const double* x, int64_t n);
double dot(const double* a, const double* b, int64_t n);

namespace serial {
void matmul(const double* a, const double* b, double* c, int M, int K, int N, bool acc = false);
void matmul_nt(const double* a, const double* b, double* c, int M, int K, int N, bool acc = false);
void matmul_tn(const double* a, const double* b, double* c, int M, int K, int N, bool acc = false);
void softmax_rows(const double* logits, const double* bias, double* out, int R, int S);
void conv2d(const double* in, const double* w, const double* b, double* out, int T, int H, int W,
            int Ci, int kh, int kw, int Co, int stride);
void conv2d_grad_input(const double* dout, const double* w, double* din, int T, int H, int W,
                       int Ci, int kh, int kw, int Co, int stride, bool acc);
void conv2d_grad_weights(const double* dout, const double* in, double* dw, double* db, int T,
                         int H, int W, int Ci, int kh, int kw, int Co, int stride, bool acc);
void sigmoid(const double* x, double* y, int64_t n);
void gelu(const double* x, double* y, int64_t n);
double sum(const double* x, int64_t n);
}  // namespace serial

}  // namespace hoist::kernels
