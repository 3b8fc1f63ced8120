#include "vqacoin/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vqacoin::kernels {

namespace {

std::atomic<Exec> g_exec{
#ifdef _OPENMP
    Exec::parallel
#else
    Exec::serial
#endif
};
std::atomic<Precision> g_prec{Precision::f64};

// One output row of c[m x n] = a[m x k] * b[k x n]. Serial, parallel, and
// f32 paths all route through this so per-row results are identical by
// construction.
template <class T>
void matmul_row(const T* a, const T* b, T* c, size_t i, size_t k, size_t n, bool acc) {
  T* ci = c + i * n;
  if (!acc) std::fill(ci, ci + n, T(0));
  const T* ai = a + i * k;
  for (size_t kk = 0; kk < k; ++kk) {
    T aik = ai[kk];
    const T* bk = b + kk * n;
    for (size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
  }
}

template <class T>
void matmul_impl(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
  for (size_t i = 0; i < m; ++i) matmul_row(a, b, c, i, k, n, acc);
}

// c[m x p] = a[m x n] * b^T where b is [p x n]; both operands walk rows
template <class T>
void matmul_nt_row(const T* a, const T* b, T* c, size_t i, size_t n, size_t p, bool acc) {
  const T* ai = a + i * n;
  T* ci = c + i * p;
  for (size_t j = 0; j < p; ++j) {
    const T* bj = b + j * n;
    T s = 0;
    for (size_t kk = 0; kk < n; ++kk) s += ai[kk] * bj[kk];
    ci[j] = acc ? ci[j] + s : s;
  }
}

// c[k x n] = a^T * b with a [m x k], b [m x n]; one output row of c per call
template <class T>
void matmul_tn_row(const T* a, const T* b, T* c, size_t row, size_t m, size_t k, size_t n, bool acc) {
  T* cr = c + row * n;
  if (!acc) std::fill(cr, cr + n, T(0));
  for (size_t i = 0; i < m; ++i) {
    T av = a[i * k + row];
    const T* bi = b + i * n;
    for (size_t j = 0; j < n; ++j) cr[j] += av * bi[j];
  }
}

template <class T>
inline T apply_unary(Unary op, T x) {
  switch (op) {
    case Unary::relu: return x > T(0) ? x : T(0);
    case Unary::relu_mask: return x > T(0) ? T(1) : T(0);
    case Unary::sigmoid: return T(1) / (T(1) + std::exp(-x));
    case Unary::tanh: return std::tanh(x);
    case Unary::exp: return std::exp(x);
    case Unary::log: return std::log(x);
    case Unary::sqrt: return std::sqrt(x);
    case Unary::recip: return T(1) / x;
    case Unary::neg: return -x;
  }
  return x;
}

template <class T>
inline T apply_binary(Binary op, T a, T b) {
  switch (op) {
    case Binary::add: return a + b;
    case Binary::sub: return a - b;
    case Binary::mul: return a * b;
  }
  return a;
}

template <class T>
void softmax_one_slice(const T* x, T* y, size_t len, size_t estride) {
  T mx = -std::numeric_limits<T>::infinity();
  for (size_t i = 0; i < len; ++i) {
    T v = x[i * estride];
    if (v > T(kMaskThreshold) && v > mx) mx = v;
  }
  // caller guarantees at least one live entry (checked at the op layer)
  T denom = 0;
  for (size_t i = 0; i < len; ++i) {
    T v = x[i * estride];
    T e = v > T(kMaskThreshold) ? std::exp(v - mx) : T(0);
    y[i * estride] = e;
    denom += e;
  }
  T inv = T(1) / denom;
  for (size_t i = 0; i < len; ++i) y[i * estride] *= inv;
}

// f32 emulation scratch. Reused across calls; thread_local keeps kernel entry
// points safe to call from parallel eval loops.
thread_local std::vector<float> f32_a, f32_b, f32_c;

void narrow(const double* x, std::vector<float>& dst, size_t n) {
  dst.resize(n);
  for (size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(x[i]);
}

void widen(const std::vector<float>& src, double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = static_cast<double>(src[i]);
}

bool use_parallel(size_t work) {
#ifdef _OPENMP
  return g_exec.load() == Exec::parallel && work >= 1;
#else
  (void)work;
  return false;
#endif
}

}  // namespace

void set_execution(Exec e) { g_exec.store(e); }
Exec execution() { return g_exec.load(); }
void set_precision(Precision p) { g_prec.store(p); }
Precision precision() { return g_prec.load(); }

namespace serial {

void matmul(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc) {
  matmul_impl(a, b, c, m, k, n, acc);
}

void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t p, bool acc) {
  for (size_t i = 0; i < m; ++i) matmul_nt_row(a, b, c, i, n, p, acc);
}

void matmul_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc) {
  for (size_t row = 0; row < k; ++row) matmul_tn_row(a, b, c, row, m, k, n, acc);
}

void unary(Unary op, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = apply_unary(op, x[i]);
}

void binary(Binary op, const double* a, const double* b, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = apply_binary(op, a[i], b[i]);
}

void scale(const double* x, double* y, size_t n, double c) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] * c;
}

void axpy(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum(const double* x, size_t n) {
  double s = 0;
  for (size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void softmax_slices(const double* x, double* y, size_t n_slices, size_t len,
                    size_t elem_stride, size_t slice_stride) {
  for (size_t s = 0; s < n_slices; ++s) {
    softmax_one_slice(x + s * slice_stride, y + s * slice_stride, len, elem_stride);
  }
}

void reduce_slices(const double* x, double* out, size_t n_out, size_t len,
                   size_t elem_stride, size_t out_stride, bool acc) {
  for (size_t j = 0; j < n_out; ++j) {
    const double* base = x + j * out_stride;
    double s = 0;
    for (size_t i = 0; i < len; ++i) s += base[i * elem_stride];
    out[j] = acc ? out[j] + s : s;
  }
}

}  // namespace serial

namespace parallel {

void matmul(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(m); ++i) {
    matmul_row(a, b, c, static_cast<size_t>(i), k, n, acc);
  }
#else
  serial::matmul(a, b, c, m, k, n, acc);
#endif
}

void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t p, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(m); ++i) {
    matmul_nt_row(a, b, c, static_cast<size_t>(i), n, p, acc);
  }
#else
  serial::matmul_nt(a, b, c, m, n, p, acc);
#endif
}

void matmul_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long row = 0; row < static_cast<long>(k); ++row) {
    matmul_tn_row(a, b, c, static_cast<size_t>(row), m, k, n, acc);
  }
#else
  serial::matmul_tn(a, b, c, m, k, n, acc);
#endif
}

void unary(Unary op, const double* x, double* y, size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i) y[i] = apply_unary(op, x[i]);
#else
  serial::unary(op, x, y, n);
#endif
}

void binary(Binary op, const double* a, const double* b, double* y, size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(n); ++i) y[i] = apply_binary(op, a[i], b[i]);
#else
  serial::binary(op, a, b, y, n);
#endif
}

void softmax_slices(const double* x, double* y, size_t n_slices, size_t len,
                    size_t elem_stride, size_t slice_stride) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long s = 0; s < static_cast<long>(n_slices); ++s) {
    softmax_one_slice(x + s * slice_stride, y + s * slice_stride, len, elem_stride);
  }
#else
  serial::softmax_slices(x, y, n_slices, len, elem_stride, slice_stride);
#endif
}

void reduce_slices(const double* x, double* out, size_t n_out, size_t len,
                   size_t elem_stride, size_t out_stride, bool acc) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long j = 0; j < static_cast<long>(n_out); ++j) {
    const double* base = x + j * out_stride;
    double s = 0;
    for (size_t i = 0; i < len; ++i) s += base[i * elem_stride];
    out[j] = acc ? out[j] + s : s;
  }
#else
  serial::reduce_slices(x, out, n_out, len, elem_stride, out_stride, acc);
#endif
}

}  // namespace parallel

void matmul(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc) {
  if (g_prec.load() == Precision::f32) {
    narrow(a, f32_a, m * k);
    narrow(b, f32_b, k * n);
    narrow(c, f32_c, m * n);  // only read when acc
    matmul_impl<float>(f32_a.data(), f32_b.data(), f32_c.data(), m, k, n, acc);
    widen(f32_c, c, m * n);
    return;
  }
  if (use_parallel(m * k * n >= kMatmulParallelMinWork ? m : 0)) {
    parallel::matmul(a, b, c, m, k, n, acc);
  } else {
    serial::matmul(a, b, c, m, k, n, acc);
  }
}

void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t p, bool acc) {
  if (g_prec.load() == Precision::f32) {
    narrow(a, f32_a, m * n);
    narrow(b, f32_b, p * n);
    narrow(c, f32_c, m * p);
    for (size_t i = 0; i < m; ++i) matmul_nt_row<float>(f32_a.data(), f32_b.data(), f32_c.data(), i, n, p, acc);
    widen(f32_c, c, m * p);
    return;
  }
  if (use_parallel(m * n * p >= kMatmulParallelMinWork ? m : 0)) {
    parallel::matmul_nt(a, b, c, m, n, p, acc);
  } else {
    serial::matmul_nt(a, b, c, m, n, p, acc);
  }
}

void matmul_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc) {
  if (g_prec.load() == Precision::f32) {
    narrow(a, f32_a, m * k);
    narrow(b, f32_b, m * n);
    narrow(c, f32_c, k * n);
    for (size_t row = 0; row < k; ++row) matmul_tn_row<float>(f32_a.data(), f32_b.data(), f32_c.data(), row, m, k, n, acc);
    widen(f32_c, c, k * n);
    return;
  }
  if (use_parallel(m * k * n >= kMatmulParallelMinWork ? k : 0)) {
    parallel::matmul_tn(a, b, c, m, k, n, acc);
  } else {
    serial::matmul_tn(a, b, c, m, k, n, acc);
  }
}

void unary(Unary op, const double* x, double* y, size_t n) {
  if (g_prec.load() == Precision::f32) {
    narrow(x, f32_a, n);
    for (size_t i = 0; i < n; ++i) f32_a[i] = apply_unary(op, f32_a[i]);
    widen(f32_a, y, n);
    return;
  }
  if (use_parallel(n >= kElemwiseParallelMinWork ? n : 0)) {
    parallel::unary(op, x, y, n);
  } else {
    serial::unary(op, x, y, n);
  }
}

void binary(Binary op, const double* a, const double* b, double* y, size_t n) {
  if (g_prec.load() == Precision::f32) {
    narrow(a, f32_a, n);
    narrow(b, f32_b, n);
    for (size_t i = 0; i < n; ++i) f32_a[i] = apply_binary(op, f32_a[i], f32_b[i]);
    widen(f32_a, y, n);
    return;
  }
  if (use_parallel(n >= kElemwiseParallelMinWork ? n : 0)) {
    parallel::binary(op, a, b, y, n);
  } else {
    serial::binary(op, a, b, y, n);
  }
}

void scale(const double* x, double* y, size_t n, double c) {
  if (g_prec.load() == Precision::f32) {
    float cf = static_cast<float>(c);
    for (size_t i = 0; i < n; ++i) y[i] = static_cast<double>(static_cast<float>(x[i]) * cf);
    return;
  }
  serial::scale(x, y, n, c);
}

void axpy(double alpha, const double* x, double* y, size_t n) {
  serial::axpy(alpha, x, y, n);
}

double sum(const double* x, size_t n) {
  if (g_prec.load() == Precision::f32) {
    float s = 0;
    for (size_t i = 0; i < n; ++i) s += static_cast<float>(x[i]);
    return static_cast<double>(s);
  }
  return serial::sum(x, n);
}

void softmax_slices(const double* x, double* y, size_t n_slices, size_t len,
                    size_t elem_stride, size_t slice_stride) {
  if (g_prec.load() == Precision::f32) {
    size_t n = (n_slices - 1) * slice_stride + (len - 1) * elem_stride + 1;
    narrow(x, f32_a, n);
    f32_b.assign(n, 0.0f);
    for (size_t s = 0; s < n_slices; ++s) {
      softmax_one_slice<float>(f32_a.data() + s * slice_stride, f32_b.data() + s * slice_stride, len, elem_stride);
    }
    widen(f32_b, y, n);
    return;
  }
  if (use_parallel(n_slices * len >= kSliceParallelMinWork ? n_slices : 0)) {
    parallel::softmax_slices(x, y, n_slices, len, elem_stride, slice_stride);
  } else {
    serial::softmax_slices(x, y, n_slices, len, elem_stride, slice_stride);
  }
}

void reduce_slices(const double* x, double* out, size_t n_out, size_t len,
                   size_t elem_stride, size_t out_stride, bool acc) {
  if (use_parallel(n_out * len >= kSliceParallelMinWork ? n_out : 0)) {
    parallel::reduce_slices(x, out, n_out, len, elem_stride, out_stride, acc);
  } else {
    serial::reduce_slices(x, out, n_out, len, elem_stride, out_stride, acc);
  }
}

}  // namespace vqacoin::kernels
