#pragma once

#include <string>
#include <type_traits>

#include "spg/kernels/reference.hpp"

// Runtime-dispatched float32 kernels. The backend is picked once: AVX2+FMA
// when the CPU has it, scalar otherwise, overridable with the environment
// variable SPG_KERNELS=scalar|avx2 (or set_backend). All backends are
// bit-exact against the reference semantics in reference.hpp, so results do
// not depend on the backend in use.

namespace spg::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
void set_backend(Backend b);  // throws ConfigError if unsupported on this CPU
bool cpu_has_avx2();
std::string backend_name();

void gemm_nn(int M, int N, int K, const float* A, const float* B, float* C, bool acc);
void gemm_tn(int M, int N, int K, const float* A, const float* B, float* C, bool acc);
void gemm_nt(int M, int N, int K, const float* A, const float* B, float* C, bool acc);
float dot(const float* a, const float* b, int n);
float sumsq(const float* a, int n);
float asum(const float* a, int n);
void axpy(int n, float alpha, const float* x, float* y);
int nearest_codeword(const float* x, const float* codebook, int K, int D,
                     float* best_d2 = nullptr);

// Type-generic entry points: float routes through the dispatch table,
// other scalar types run the reference directly.
template <typename T>
void gemm_nn_t(int M, int N, int K, const T* A, const T* B, T* C, bool acc) {
  if constexpr (std::is_same_v<T, float>)
    gemm_nn(M, N, K, A, B, C, acc);
  else
    ref::gemm_nn(M, N, K, A, B, C, acc);
}

template <typename T>
void gemm_tn_t(int M, int N, int K, const T* A, const T* B, T* C, bool acc) {
  if constexpr (std::is_same_v<T, float>)
    gemm_tn(M, N, K, A, B, C, acc);
  else
    ref::gemm_tn(M, N, K, A, B, C, acc);
}

template <typename T>
void gemm_nt_t(int M, int N, int K, const T* A, const T* B, T* C, bool acc) {
  if constexpr (std::is_same_v<T, float>)
    gemm_nt(M, N, K, A, B, C, acc);
  else
    ref::gemm_nt(M, N, K, A, B, C, acc);
}

template <typename T>
T dot_t(const T* a, const T* b, int n) {
  if constexpr (std::is_same_v<T, float>)
    return dot(a, b, n);
  else
    return ref::dot(a, b, n);
}

template <typename T>
T sumsq_t(const T* a, int n) {
  if constexpr (std::is_same_v<T, float>)
    return sumsq(a, n);
  else
    return ref::sumsq(a, n);
}

template <typename T>
T asum_t(const T* a, int n) {
  if constexpr (std::is_same_v<T, float>)
    return asum(a, n);
  else
    return ref::asum(a, n);
}

template <typename T>
void axpy_t(int n, T alpha, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>)
    axpy(n, alpha, x, y);
  else
    ref::axpy(n, alpha, x, y);
}

template <typename T>
int nearest_codeword_t(const T* x, const T* codebook, int K, int D, T* best_d2 = nullptr) {
  if constexpr (std::is_same_v<T, float>)
    return nearest_codeword(x, codebook, K, D, best_d2);
  else
    return ref::nearest_codeword(x, codebook, K, D, best_d2);
}

}  // namespace spg::kernels
