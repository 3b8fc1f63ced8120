#pragma once

#include <cstddef>
#include <cstdint>

namespace vqacoin::kernels {

/// Which implementation the dispatching entry points use. The serial
/// functions are the reference; the parallel ones split work across OpenMP
/// threads over independent output elements only, so both produce
/// bit-identical results and the choice never changes numerics.
enum class Exec { serial, parallel };
void set_execution(Exec e);
Exec execution();

/// f64 is the default everywhere; f32 reruns every kernel in float
/// arithmetic (inputs rounded to float, float accumulation, result widened
/// back). Storage stays double either way.
enum class Precision { f64, f32 };
void set_precision(Precision p);
Precision precision();

// Work thresholds below which the parallel dispatch falls back to the serial
// loop. Fixed constants: the serial/parallel decision may change timing but
// never results.
inline constexpr size_t kMatmulParallelMinWork = 1u << 15;
inline constexpr size_t kElemwiseParallelMinWork = 1u << 16;
inline constexpr size_t kSliceParallelMinWork = 1u << 14;

enum class Unary : uint8_t { relu, relu_mask, sigmoid, tanh, exp, log, sqrt, recip, neg };
enum class Binary : uint8_t { add, sub, mul };

namespace serial {
// c[m x n] = a[m x k] * b[k x n]; acc adds into c instead of overwriting
void matmul(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc);
// c[m x p] = a[m x n] * b[p x n]^T
void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t p, bool acc);
// c[k x n] = a[m x k]^T * b[m x n]
void matmul_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc);
void unary(Unary op, const double* x, double* y, size_t n);
void binary(Binary op, const double* a, const double* b, double* y, size_t n);
void scale(const double* x, double* y, size_t n, double c);
void axpy(double alpha, const double* x, double* y, size_t n);  // y += alpha * x
double sum(const double* x, size_t n);
// y[slice s] = softmax(x[slice s]); entries <= mask_threshold() produce exact 0
void softmax_slices(const double* x, double* y, size_t n_slices, size_t len,
                    size_t elem_stride, size_t slice_stride);
// out[j] = sum over slices of strided input (generic axis reduction)
void reduce_slices(const double* x, double* out, size_t n_out, size_t len,
                   size_t elem_stride, size_t out_stride, bool acc);
}  // namespace serial

namespace parallel {
void matmul(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc);
void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t p, bool acc);
void matmul_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc);
void unary(Unary op, const double* x, double* y, size_t n);
void binary(Binary op, const double* a, const double* b, double* y, size_t n);
void softmax_slices(const double* x, double* y, size_t n_slices, size_t len,
                    size_t elem_stride, size_t slice_stride);
void reduce_slices(const double* x, double* out, size_t n_out, size_t len,
                   size_t elem_stride, size_t out_stride, bool acc);
}  // namespace parallel

// Dispatching entry points (honor execution() and precision()).
void matmul(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc = false);
void matmul_nt(const double* a, const double* b, double* c, size_t m, size_t n, size_t p, bool acc = false);
void matmul_tn(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool acc = false);
void unary(Unary op, const double* x, double* y, size_t n);
void binary(Binary op, const double* a, const double* b, double* y, size_t n);
void scale(const double* x, double* y, size_t n, double c);
void axpy(double alpha, const double* x, double* y, size_t n);
double sum(const double* x, size_t n);
void softmax_slices(const double* x, double* y, size_t n_slices, size_t len,
                    size_t elem_stride, size_t slice_stride);
void reduce_slices(const double* x, double* out, size_t n_out, size_t len,
                   size_t elem_stride, size_t out_stride, bool acc = false);

/// Additive mask sentinel: positions at or below the detection threshold are
/// treated as masked and produce exact zeros from softmax.
inline constexpr double kMaskSentinel = -1e30;
inline constexpr double kMaskThreshold = -5e29;

}  // namespace vqacoin::kernels
