// Times the OpenMP kernels against their serial reference twins.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hoist/kernels.hpp"
#include "hoist/rng.hpp"

namespace ker = hoist::kernels;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<double> random_vec(size_t n, hoist::Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %.2fx\n", name, serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: not enabled in this build\n");
#endif
  hoist::Rng rng(42);

  {
    const int M = 256, K = 256, N = 256;
    auto a = random_vec(static_cast<size_t>(M) * K, rng);
    auto b = random_vec(static_cast<size_t>(K) * N, rng);
    std::vector<double> c(static_cast<size_t>(M) * N);
    report("matmul 256^3",
           time_ms([&] { ker::serial::matmul(a.data(), b.data(), c.data(), M, K, N); }, 5),
           time_ms([&] { ker::matmul(a.data(), b.data(), c.data(), M, K, N); }, 5));
  }
  {
    const int M = 2304, K = 64, N = 64;
    auto a = random_vec(static_cast<size_t>(M) * K, rng);
    auto b = random_vec(static_cast<size_t>(N) * K, rng);
    std::vector<double> c(static_cast<size_t>(M) * N);
    report("matmul_nt 2304x64x64",
           time_ms([&] { ker::serial::matmul_nt(a.data(), b.data(), c.data(), M, K, N); }, 10),
           time_ms([&] { ker::matmul_nt(a.data(), b.data(), c.data(), M, K, N); }, 10));
  }
  {
    const int T = 4, H = 96, W = 96, Ci = 16, Co = 32;
    auto in = random_vec(static_cast<size_t>(T) * H * W * Ci, rng);
    auto w = random_vec(static_cast<size_t>(3) * 3 * Ci * Co, rng);
    auto b = random_vec(Co, rng);
    std::vector<double> out(static_cast<size_t>(T) * 48 * 48 * Co);
    report("conv2d 3x3 s2 16->32",
           time_ms([&] { ker::serial::conv2d(in.data(), w.data(), b.data(), out.data(), T, H, W,
                                             Ci, 3, 3, Co, 2); },
                   5),
           time_ms([&] { ker::conv2d(in.data(), w.data(), b.data(), out.data(), T, H, W, Ci, 3,
                                     3, Co, 2); },
                   5));
  }
  {
    const int R = 64, S = 4096;
    auto z = random_vec(static_cast<size_t>(R) * S, rng);
    std::vector<double> y(static_cast<size_t>(R) * S);
    report("softmax 64x4096",
           time_ms([&] { ker::serial::softmax_rows(z.data(), nullptr, y.data(), R, S); }, 20),
           time_ms([&] { ker::softmax_rows(z.data(), nullptr, y.data(), R, S); }, 20));
  }
  {
    const size_t n = 1 << 22;
    auto x = random_vec(n, rng);
    std::vector<double> y(n);
    report("gelu 4M",
           time_ms([&] { ker::serial::gelu(x.data(), y.data(), static_cast<int64_t>(n)); }, 5),
           time_ms([&] { ker::gelu(x.data(), y.data(), static_cast<int64_t>(n)); }, 5));
  }
  {
    const size_t n = 1 << 22;
    auto x = random_vec(n, rng);
    volatile double sink = 0.0;
    report("sum 4M",
           time_ms([&] { sink = ker::serial::sum(x.data(), static_cast<int64_t>(n)); }, 10),
           time_ms([&] { sink = ker::sum(x.data(), static_cast<int64_t>(n)); }, 10));
    (void)sink;
  }
  return 0;
}
