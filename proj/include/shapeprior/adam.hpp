#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace shapeprior {

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// m <- b1*m + (1-b1)*g; v <- b2*v + (1-b2)*g^2;
// p <- p - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
// Rejects non-finite gradients before touching any state.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st,
               double lr);

} // namespace shapeprior
