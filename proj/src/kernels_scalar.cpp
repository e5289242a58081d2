#include "shapeprior/kernels.hpp"

#include <cmath>

namespace shapeprior::kernels {

double stable_sigmoid(double x) {
  // Clamp keeps exp() away from total underflow so the output never collapses
  // to exactly 0 or 1 in double precision.
  if (x > 700.0) x = 700.0;
  if (x < -700.0) x = -700.0;
  if (x >= 0.0) {
    const double t = std::exp(-x);
    double p = 1.0 / (1.0 + t);
    const double kOneBelow = 0x1.fffffffffffffp-1; // largest double < 1
    if (p > kOneBelow) p = kOneBelow;
    return p;
  }
  const double t = std::exp(x);
  return t / (1.0 + t);
}

namespace {

// ikj order: each c[i][j] accumulates over k in ascending index order, which
// matches the naive ijk definition element-for-element.
void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
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

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < m; ++p) {
    const double* ap = a + static_cast<std::size_t>(p) * k;
    const double* bp = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < k; ++i) {
      const double av = ap[i];
      double* ci = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void relu_fwd(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(const double* y, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (y[i] > 0.0) dx[i] += dy[i];
}

void sigmoid_fwd(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = stable_sigmoid(x[i]);
}

void sigmoid_bwd(const double* y, const double* dy, double* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
}

void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double reduce_sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_sq(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void col_sum(const double* a, double* out, int m, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) out[j] += ai[j];
  }
}

void dice_sums(const double* p, const std::uint8_t* y, std::size_t n,
               double* sum_py, double* sum_p) {
  double spy = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sp += p[i];
    if (y[i]) spy += p[i];
  }
  *sum_py = spy;
  *sum_p = sp;
}

void dice_bwd(const std::uint8_t* y, double a, double b, double g,
              double* dp, std::size_t n) {
  const double inv_b2 = 1.0 / (b * b);
  const double c0 = g * a * inv_b2;          // y = 0 term
  const double c1 = g * (a - 2.0 * b) * inv_b2; // y = 1 term
  for (std::size_t i = 0; i < n; ++i) dp[i] += y[i] ? c1 : c0;
}

double bce_logits_sum(const double* logit, const std::uint8_t* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = logit[i];
    const double pos = l > 0.0 ? l : 0.0;
    s += pos - l * static_cast<double>(y[i]) + std::log1p(std::exp(-std::fabs(l)));
  }
  return s;
}

void bce_logits_bwd(const double* logit, const std::uint8_t* y, double g,
                    double* dl, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    dl[i] += g * (stable_sigmoid(logit[i]) - static_cast<double>(y[i]));
}

} // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      "scalar",    gemm_nn,     gemm_nt,     gemm_tn,        relu_fwd,
      relu_bwd,    sigmoid_fwd, sigmoid_bwd, adam_update,    reduce_sum,
      dot,         sum_sq,      col_sum,     dice_sums,      dice_bwd,
      bce_logits_sum, bce_logits_bwd,
  };
  return t;
}

} // namespace shapeprior::kernels
