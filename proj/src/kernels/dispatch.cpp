#include <cstdlib>
#include <mutex>
#include <string>

#include "spg/kernels/kernels.hpp"
#include "spg/util/errors.hpp"
#include "kernel_table.hpp"

namespace spg::kernels {

namespace {

const KernelTable scalar_table = {
    &ref::gemm_nn<float>, &ref::gemm_tn<float>, &ref::gemm_nt<float>,
    &ref::dot<float>,     &ref::sumsq<float>,   &ref::asum<float>,
    &ref::axpy<float>,    &ref::nearest_codeword<float>,
};

const KernelTable* g_table = nullptr;
Backend g_backend = Backend::scalar;
std::once_flag g_init;

void init_default() {
  std::call_once(g_init, [] {
    Backend want = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("SPG_KERNELS")) {
      std::string v(env);
      if (v == "scalar") want = Backend::scalar;
      else if (v == "avx2") want = Backend::avx2;
      else if (!v.empty() && v != "auto")
        throw ConfigError("SPG_KERNELS must be scalar, avx2 or auto, got: " + v);
    }
    if (want == Backend::avx2 && !cpu_has_avx2()) want = Backend::scalar;
    g_backend = want;
    g_table = (want == Backend::avx2) ? &avx2::table : &scalar_table;
  });
}

const KernelTable& table() {
  init_default();
  return *g_table;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() {
  init_default();
  return g_backend;
}

void set_backend(Backend b) {
  init_default();
  if (b == Backend::avx2 && !cpu_has_avx2())
    throw ConfigError("AVX2 kernel backend requested but CPU lacks AVX2/FMA");
  g_backend = b;
  g_table = (b == Backend::avx2) ? &avx2::table : &scalar_table;
}

std::string backend_name() {
  return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  table().gemm_nn(M, N, K, A, B, C, acc);
}
void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  table().gemm_tn(M, N, K, A, B, C, acc);
}
void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  table().gemm_nt(M, N, K, A, B, C, acc);
}
float dot(const float* a, const float* b, int n) { return table().dot(a, b, n); }
float sumsq(const float* a, int n) { return table().sumsq(a, n); }
float asum(const float* a, int n) { return table().asum(a, n); }
void axpy(int n, float alpha, const float* x, float* y) { table().axpy(n, alpha, x, y); }
int nearest_codeword(const float* x, const float* cb, int K, int D, float* d2) {
  return table().nearest(x, cb, K, D, d2);
}

}  // namespace spg::kernels
