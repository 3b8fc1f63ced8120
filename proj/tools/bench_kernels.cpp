// Serial vs parallel kernel timing. The parallel variants only distribute
// whole output rows, so both paths produce identical bits; this tool is for
// judging whether the distribution pays off at a given size.
#include <array>
#include <chrono>
#include <cstdio>
#include <vector>

#include "vqacoin/kernels.hpp"
#include "vqacoin/rng.hpp"

using namespace vqacoin;

namespace {

double bench(void (*fn)(const double*, const double*, double*, size_t, size_t, size_t, bool),
             const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& c,
             size_t m, size_t k, size_t n, int reps) {
  fn(a.data(), b.data(), c.data(), m, k, n, false);  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn(a.data(), b.data(), c.data(), m, k, n, false);
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return dt / reps * 1e3;
}

double bench_softmax(void (*fn)(const double*, double*, size_t, size_t, size_t, size_t),
                     const std::vector<double>& x, std::vector<double>& y, size_t slices,
                     size_t len, int reps) {
  fn(x.data(), y.data(), slices, len, 1, len);
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn(x.data(), y.data(), slices, len, 1, len);
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return dt / reps * 1e3;
}

}  // namespace

int main() {
  std::printf("%-28s %12s %12s %8s\n", "kernel", "serial (ms)", "parallel (ms)", "speedup");

  Rng rng(7);
  for (auto [m, k, n] : std::vector<std::array<size_t, 3>>{
           {64, 64, 64}, {128, 128, 128}, {256, 256, 256}, {512, 512, 512}}) {
    std::vector<double> a(m * k), b(k * n), c(m * n);
    for (double& v : a) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    int reps = m <= 128 ? 50 : 10;
    double ts = bench(kernels::serial::matmul, a, b, c, m, k, n, reps);
    double tp = bench(kernels::parallel::matmul, a, b, c, m, k, n, reps);
    char label[64];
    std::snprintf(label, sizeof label, "matmul %zux%zux%zu", m, k, n);
    std::printf("%-28s %12.3f %12.3f %7.2fx\n", label, ts, tp, ts / tp);
  }

  for (auto [slices, len] : std::vector<std::array<size_t, 2>>{{256, 256}, {1024, 1024}}) {
    std::vector<double> x(slices * len), y(slices * len);
    for (double& v : x) v = rng.uniform(-5, 5);
    double ts = bench_softmax(kernels::serial::softmax_slices, x, y, slices, len, 50);
    double tp = bench_softmax(kernels::parallel::softmax_slices, x, y, slices, len, 50);
    char label[64];
    std::snprintf(label, sizeof label, "softmax %zux%zu", slices, len);
    std::printf("%-28s %12.3f %12.3f %7.2fx\n", label, ts, tp, ts / tp);
  }
  return 0;
}
