#pragma once

#include <cmath>
#include <cstdint>

// Reference implementations of the hot kernels, templated on the scalar
// type. These define the numeric contract all backends must reproduce
// bit-exactly:
//
//   gemm_*   : each output element is one serial chain of fused
//              multiply-adds over k ascending (single rounding per step,
//              std::fma semantics).
//   dot/sumsq/asum and the distances inside nearest_codeword:
//              8 partial accumulators; lane l sums elements with index
//              congruent to l mod 8, ascending, fused multiply-add where a
//              product is involved; lanes combine as
//              ((l0+l4)+(l1+l5)) + ((l2+l6)+(l3+l7)).
//   nearest_codeword: ascending scan, strict less-than, so ties resolve to
//              the lowest codeword index.
//
// The float instantiations double as the scalar backend; the double
// instantiations back the gradient-check paths in the tests.

namespace spg::kernels::ref {

// C[M,N] (+)= A[M,K] * B[K,N]
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C, bool acc) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      T s = acc ? C[i * N + j] : T(0);
      for (int k = 0; k < K; ++k) s = std::fma(A[i * K + k], B[k * N + j], s);
      C[i * N + j] = s;
    }
  }
}

// C[M,N] (+)= A^T * B with A stored [K,M]
template <typename T>
void gemm_tn(int M, int N, int K, const T* A, const T* B, T* C, bool acc) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      T s = acc ? C[i * N + j] : T(0);
      for (int k = 0; k < K; ++k) s = std::fma(A[k * M + i], B[k * N + j], s);
      C[i * N + j] = s;
    }
  }
}

// C[M,N] (+)= A * B^T with B stored [N,K]
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* B, T* C, bool acc) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      T s = acc ? C[i * N + j] : T(0);
      for (int k = 0; k < K; ++k) s = std::fma(A[i * K + k], B[j * K + k], s);
      C[i * N + j] = s;
    }
  }
}

template <typename T>
T lane_combine(const T lane[8]) {
  return ((lane[0] + lane[4]) + (lane[1] + lane[5])) +
         ((lane[2] + lane[6]) + (lane[3] + lane[7]));
}

template <typename T>
T dot(const T* a, const T* b, int n) {
  T lane[8] = {};
  for (int i = 0; i < n; ++i) lane[i & 7] = std::fma(a[i], b[i], lane[i & 7]);
  return lane_combine(lane);
}

template <typename T>
T sumsq(const T* a, int n) {
  T lane[8] = {};
  for (int i = 0; i < n; ++i) lane[i & 7] = std::fma(a[i], a[i], lane[i & 7]);
  return lane_combine(lane);
}

template <typename T>
T asum(const T* a, int n) {
  T lane[8] = {};
  for (int i = 0; i < n; ++i) lane[i & 7] += std::abs(a[i]);
  return lane_combine(lane);
}

template <typename T>
void axpy(int n, T alpha, const T* x, T* y) {
  for (int i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

template <typename T>
T l2_dist_sq(const T* x, const T* c, int d) {
  T lane[8] = {};
  for (int i = 0; i < d; ++i) {
    T diff = x[i] - c[i];
    lane[i & 7] = std::fma(diff, diff, lane[i & 7]);
  }
  return lane_combine(lane);
}

template <typename T>
int nearest_codeword(const T* x, const T* codebook, int K, int D, T* best_d2_out) {
  int best = 0;
  T best_d2 = l2_dist_sq(x, codebook, D);
  for (int j = 1; j < K; ++j) {
    T d2 = l2_dist_sq(x, codebook + size_t(j) * D, D);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  if (best_d2_out) *best_d2_out = best_d2;
  return best;
}

}  // namespace spg::kernels::ref
