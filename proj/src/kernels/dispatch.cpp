#include <atomic>
#include <cstdlib>
#include <string>

#include "lsef/error.hpp"
#include "lsef/kernels/kernels.hpp"

namespace lsef::kernels {

std::string_view to_string(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

bool avx2_available() {
#if defined(LSEF_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

#if !defined(LSEF_HAVE_AVX2)
template <>
const KernelTable<float>& avx2_table<float>() {
  fail(ErrorKind::configuration, "AVX2 kernels were not built");
}
template <>
const KernelTable<double>& avx2_table<double>() {
  fail(ErrorKind::configuration, "AVX2 kernels were not built");
}
#endif

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("LSEF_SIMD")) {
    const std::string v = env;
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && avx2_available()) return Backend::avx2;
  }
  return avx2_available() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  require(b != Backend::avx2 || avx2_available(), ErrorKind::configuration,
          "AVX2 backend requested but the CPU does not support AVX2+FMA");
  current().store(b, std::memory_order_relaxed);
}

template <typename T>
const KernelTable<T>& active() {
  return active_backend() == Backend::avx2 ? avx2_table<T>() : scalar_table<T>();
}

template const KernelTable<float>& active<float>();
template const KernelTable<double>& active<double>();

}  // namespace lsef::kernels
