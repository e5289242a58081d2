#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops behind the tensor/loss machinery. Every entry has
// a scalar reference implementation; the hot entries additionally have AVX2
// variants selected at runtime (cpuid, overridable). Scalar kernels reduce in
// index order; AVX2 kernels reduce in a fixed lane order, so each backend is
// bit-deterministic run-to-run but the two backends may differ in the last
// few ulps (FMA, lane-tree sums). Equivalence between backends is enforced by
// tests at 1e-12 relative.
namespace shapeprior::kernels {

enum class Backend { kAuto, kScalar, kAvx2 };

struct KernelTable {
  const char* name;

  // C[m x n] += A[m x k] * B[k x n], all row-major.
  void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k, int n);
  // C[m x k] += A[m x n] * B[k x n]^T  (rows of A dotted with rows of B).
  void (*gemm_nt)(const double* a, const double* b, double* c, int m, int n, int k);
  // C[k x n] += A[m x k]^T * B[m x n].
  void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k, int n);

  void (*relu_fwd)(const double* x, double* y, std::size_t n);
  // dx += dy where y > 0
  void (*relu_bwd)(const double* y, const double* dy, double* dx, std::size_t n);
  void (*sigmoid_fwd)(const double* x, double* y, std::size_t n);
  // dx += dy * y * (1 - y)
  void (*sigmoid_bwd)(const double* y, const double* dy, double* dx, std::size_t n);

  // One Adam update with precomputed bias corrections bc1 = 1-beta1^t,
  // bc2 = 1-beta2^t. p -= lr * (m/bc1) / (sqrt(v/bc2) + eps).
  void (*adam_update)(double* p, const double* g, double* m, double* v, std::size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2);

  double (*reduce_sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_sq)(const double* x, std::size_t n);
  // out[j] += sum_i a[i*n + j]
  void (*col_sum)(const double* a, double* out, int m, int n);

  // sum_py = sum p[i]*y[i], sum_p = sum p[i]; y is 0/1.
  void (*dice_sums)(const double* p, const std::uint8_t* y, std::size_t n,
                    double* sum_py, double* sum_p);
  // dp[i] += g * (a - 2*y[i]*b) / b^2   (soft-dice backward; a = 2*sum_py+eps, b = sum_p+sum_y+eps)
  void (*dice_bwd)(const std::uint8_t* y, double a, double b, double g,
                   double* dp, std::size_t n);
  // sum of stable per-element BCE terms: max(l,0) - l*y + log1p(exp(-|l|))
  double (*bce_logits_sum)(const double* logit, const std::uint8_t* y, std::size_t n);
  // dl[i] += g * (sigmoid(l[i]) - y[i])
  void (*bce_logits_bwd)(const double* logit, const std::uint8_t* y, double g,
                         double* dl, std::size_t n);
};

// Stable sigmoid used by both backends. Input is clamped to [-700, 700] so the
// result stays strictly inside (0, 1) in double precision (lower bound ~1e-304,
// upper bound 1 - 2^-53).
double stable_sigmoid(double x);

const KernelTable& scalar_table();
bool avx2_supported();           // compiled in AND cpu supports AVX2+FMA
const KernelTable& avx2_table(); // valid only if avx2_supported()

// Active table. Defaults to kAuto resolved on first use; honors the
// SHAPEPRIOR_KERNEL environment variable ("scalar" or "avx2") when set.
const KernelTable& active();
void set_backend(Backend b); // throws std::invalid_argument if unavailable
Backend resolved_backend();

} // namespace shapeprior::kernels
