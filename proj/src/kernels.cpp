#include "shapeprior/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace shapeprior::kernels {

namespace {

Backend g_requested = Backend::kAuto;

Backend from_env() {
  const char* e = std::getenv("SHAPEPRIOR_KERNEL");
  if (e == nullptr) return Backend::kAuto;
  const std::string s(e);
  if (s == "scalar") return Backend::kScalar;
  if (s == "avx2") return Backend::kAvx2;
  if (s.empty() || s == "auto") return Backend::kAuto;
  throw std::runtime_error("SHAPEPRIOR_KERNEL: unknown backend '" + s +
                           "' (expected scalar, avx2, or auto)");
}

Backend resolve(Backend req) {
  if (req == Backend::kAuto) req = from_env();
  if (req == Backend::kAuto) req = avx2_supported() ? Backend::kAvx2 : Backend::kScalar;
  if (req == Backend::kAvx2 && !avx2_supported()) {
    throw std::runtime_error("kernel backend avx2 requested but not usable on this host");
  }
  return req;
}

} // namespace

bool avx2_supported() {
#if defined(SHAPEPRIOR_BUILD_AVX2) && defined(__GNUC__)
  static const bool ok =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

void set_backend(Backend b) {
  if (b == Backend::kAvx2 && !avx2_supported())
    throw std::runtime_error("kernel backend avx2 requested but not usable on this host");
  g_requested = b;
}

Backend resolved_backend() { return resolve(g_requested); }

const KernelTable& active() {
  return resolve(g_requested) == Backend::kAvx2 ? avx2_table() : scalar_table();
}

} // namespace shapeprior::kernels
