#include "shapeprior/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "shapeprior/kernels.hpp"

namespace shapeprior {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& st,
               double lr) {
  if (params.size() != grads.size() || params.size() != st.m.size() ||
      st.m.size() != st.v.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!(lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  for (const double g : grads)
    if (!std::isfinite(g))
      throw std::runtime_error("adam_step: non-finite gradient, step rejected");

  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  kernels::active().adam_update(params.data(), grads.data(), st.m.data(), st.v.data(),
                                params.size(), lr, st.beta1, st.beta2, st.eps, bc1, bc2);
}

} // namespace shapeprior
