#include "shapeprior/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace shapeprior::kernels {
namespace {

inline double hsum(__m256d v) {
  // fixed reduction tree: (l0+h0) + (l1+h1)
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// 4x8 register tile, k innermost. B panel (k x 8 doubles) stays cache-hot
// because j is the inner block loop for a fixed row block of A.
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  const int m4 = m & ~3;
  const int n8 = n & ~7;
  for (int i0 = 0; i0 < m4; i0 += 4) {
    const double* a0 = a + static_cast<std::size_t>(i0) * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    for (int j0 = 0; j0 < n8; j0 += 8) {
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
      __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
      const double* bp = b + j0;
      for (int p = 0; p < k; ++p, bp += n) {
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        __m256d av;
        av = _mm256_broadcast_sd(a0 + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a1 + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a2 + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a3 + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
      }
      double* cr = c + static_cast<std::size_t>(i0) * n + j0;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c00));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c01));
      cr += n;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c10));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c11));
      cr += n;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c20));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c21));
      cr += n;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c30));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c31));
    }
    // column tail
    for (int r = 0; r < 4; ++r) {
      const double* ar = a + static_cast<std::size_t>(i0 + r) * k;
      double* cr = c + static_cast<std::size_t>(i0 + r) * n;
      for (int p = 0; p < k; ++p) {
        const double av = ar[p];
        const double* bp = b + static_cast<std::size_t>(p) * n;
        for (int j = n8; j < n; ++j) cr[j] += av * bp[j];
      }
    }
  }
  // row tail
  for (int i = m4; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// Rows of A dotted with rows of B; 4x2 tile, vectorized over the shared n axis.
void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k) {
  const int m4 = m & ~3;
  const int k2 = k & ~1;
  const int n4 = n & ~3;
  for (int i0 = 0; i0 < m4; i0 += 4) {
    const double* a0 = a + static_cast<std::size_t>(i0) * n;
    const double* a1 = a0 + n;
    const double* a2 = a1 + n;
    const double* a3 = a2 + n;
    for (int j0 = 0; j0 < k2; j0 += 2) {
      const double* b0 = b + static_cast<std::size_t>(j0) * n;
      const double* b1 = b0 + n;
      __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
      __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
      __m256d s20 = _mm256_setzero_pd(), s21 = _mm256_setzero_pd();
      __m256d s30 = _mm256_setzero_pd(), s31 = _mm256_setzero_pd();
      for (int p = 0; p < n4; p += 4) {
        const __m256d vb0 = _mm256_loadu_pd(b0 + p);
        const __m256d vb1 = _mm256_loadu_pd(b1 + p);
        __m256d va;
        va = _mm256_loadu_pd(a0 + p);
        s00 = _mm256_fmadd_pd(va, vb0, s00);
        s01 = _mm256_fmadd_pd(va, vb1, s01);
        va = _mm256_loadu_pd(a1 + p);
        s10 = _mm256_fmadd_pd(va, vb0, s10);
        s11 = _mm256_fmadd_pd(va, vb1, s11);
        va = _mm256_loadu_pd(a2 + p);
        s20 = _mm256_fmadd_pd(va, vb0, s20);
        s21 = _mm256_fmadd_pd(va, vb1, s21);
        va = _mm256_loadu_pd(a3 + p);
        s30 = _mm256_fmadd_pd(va, vb0, s30);
        s31 = _mm256_fmadd_pd(va, vb1, s31);
      }
      double d00 = hsum(s00), d01 = hsum(s01);
      double d10 = hsum(s10), d11 = hsum(s11);
      double d20 = hsum(s20), d21 = hsum(s21);
      double d30 = hsum(s30), d31 = hsum(s31);
      for (int p = n4; p < n; ++p) {
        d00 += a0[p] * b0[p];
        d01 += a0[p] * b1[p];
        d10 += a1[p] * b0[p];
        d11 += a1[p] * b1[p];
        d20 += a2[p] * b0[p];
        d21 += a2[p] * b1[p];
        d30 += a3[p] * b0[p];
        d31 += a3[p] * b1[p];
      }
      double* cr = c + static_cast<std::size_t>(i0) * k + j0;
      cr[0] += d00;
      cr[1] += d01;
      cr += k;
      cr[0] += d10;
      cr[1] += d11;
      cr += k;
      cr[0] += d20;
      cr[1] += d21;
      cr += k;
      cr[0] += d30;
      cr[1] += d31;
    }
    for (int j = k2; j < k; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * n;
      const double* rows[4] = {a0, a1, a2, a3};
      for (int r = 0; r < 4; ++r) {
        double acc = 0.0;
        for (int p = 0; p < n; ++p) acc += rows[r][p] * bj[p];
        c[static_cast<std::size_t>(i0 + r) * k + j] += acc;
      }
    }
  }
  for (int i = m4; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * n;
    double* ci = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * n;
      double acc = 0.0;
      for (int p = 0; p < n; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C[k x n] += A^T * B with A [m x k], B [m x n]. m is chunked so the A/B slab
// for one chunk stays in L2 while the (k,n) tiles sweep it.
void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  constexpr int kChunk = 256;
  const int k4 = k & ~3;
  const int n8 = n & ~7;
  for (int r0 = 0; r0 < m; r0 += kChunk) {
    const int r1 = r0 + kChunk < m ? r0 + kChunk : m;
    for (int i0 = 0; i0 < k4; i0 += 4) {
      for (int j0 = 0; j0 < n8; j0 += 8) {
        __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
        __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
        __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
        __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
        for (int r = r0; r < r1; ++r) {
          const double* ar = a + static_cast<std::size_t>(r) * k + i0;
          const double* br = b + static_cast<std::size_t>(r) * n + j0;
          const __m256d b0 = _mm256_loadu_pd(br);
          const __m256d b1 = _mm256_loadu_pd(br + 4);
          __m256d av;
          av = _mm256_broadcast_sd(ar);
          c00 = _mm256_fmadd_pd(av, b0, c00);
          c01 = _mm256_fmadd_pd(av, b1, c01);
          av = _mm256_broadcast_sd(ar + 1);
          c10 = _mm256_fmadd_pd(av, b0, c10);
          c11 = _mm256_fmadd_pd(av, b1, c11);
          av = _mm256_broadcast_sd(ar + 2);
          c20 = _mm256_fmadd_pd(av, b0, c20);
          c21 = _mm256_fmadd_pd(av, b1, c21);
          av = _mm256_broadcast_sd(ar + 3);
          c30 = _mm256_fmadd_pd(av, b0, c30);
          c31 = _mm256_fmadd_pd(av, b1, c31);
        }
        double* cr = c + static_cast<std::size_t>(i0) * n + j0;
        _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c00));
        _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c01));
        cr += n;
        _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c10));
        _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c11));
        cr += n;
        _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c20));
        _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c21));
        cr += n;
        _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c30));
        _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c31));
      }
      // column tail for this row block
      for (int q = 0; q < 4; ++q) {
        double* ci = c + static_cast<std::size_t>(i0 + q) * n;
        for (int r = r0; r < r1; ++r) {
          const double av = a[static_cast<std::size_t>(r) * k + i0 + q];
          const double* br = b + static_cast<std::size_t>(r) * n;
          for (int j = n8; j < n; ++j) ci[j] += av * br[j];
        }
      }
    }
    // row tail
    for (int i = k4; i < k; ++i) {
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int r = r0; r < r1; ++r) {
        const double av = a[static_cast<std::size_t>(r) * k + i];
        const double* br = b + static_cast<std::size_t>(r) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * br[j];
      }
    }
  }
}

void relu_fwd(const double* x, double* y, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(const double* y, const double* dy, double* dx, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d mask = _mm256_cmp_pd(vy, zero, _CMP_GT_OQ);
    const __m256d add = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), add));
  }
  for (; i < n; ++i)
    if (y[i] > 0.0) dx[i] += dy[i];
}

void sigmoid_bwd(const double* y, const double* dy, double* dx, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    const __m256d t = _mm256_mul_pd(vy, _mm256_sub_pd(one, vy));
    const __m256d add = _mm256_mul_pd(_mm256_loadu_pd(dy + i), t);
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), add));
  }
  for (; i < n; ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vi1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d vi2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vm = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(vi1, vg));
    vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(vi2, _mm256_mul_pd(vg, vg)));
    _mm256_storeu_pd(m + i, vm);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_div_pd(vm, vbc1);
    const __m256d vhat = _mm256_div_pd(vv, vbc2);
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), den);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

double reduce_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_sq(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void col_sum(const double* a, double* out, int m, int n) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * n;
    int j = 0;
    for (; j < n4; j += 4)
      _mm256_storeu_pd(out + j,
                       _mm256_add_pd(_mm256_loadu_pd(out + j), _mm256_loadu_pd(ai + j)));
    for (; j < n; ++j) out[j] += ai[j];
  }
}

} // namespace

const KernelTable& avx2_table() {
  // exp-bound entries reuse the scalar implementations
  static const KernelTable t = {
      "avx2",
      gemm_nn,
      gemm_nt,
      gemm_tn,
      relu_fwd,
      relu_bwd,
      scalar_table().sigmoid_fwd,
      sigmoid_bwd,
      adam_update,
      reduce_sum,
      dot,
      sum_sq,
      col_sum,
      scalar_table().dice_sums,
      scalar_table().dice_bwd,
      scalar_table().bce_logits_sum,
      scalar_table().bce_logits_bwd,
  };
  return t;
}

} // namespace shapeprior::kernels

#else

namespace shapeprior::kernels {
const KernelTable& avx2_table() { return scalar_table(); }
} // namespace shapeprior::kernels

#endif
