// AVX2+FMA backend. Every kernel reproduces the reference semantics in
// reference.hpp bit-exactly: per-element serial fma chains for the gemms,
// 8-lane-blocked reductions combined with the fixed pairwise tree. The
// equivalence tests assert exact equality against the scalar backend.

#include "spg/kernels/kernels.hpp"
#include "kernel_table.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cstring>
#include <vector>

namespace spg::kernels::avx2 {

namespace {

alignas(32) const int32_t kMaskTable[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                            0,  0,  0,  0,  0,  0,  0,  0};

inline __m256i tail_mask(int r) {  // r in [0, 8]
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kMaskTable + 8 - r));
}

// ((l0+l4)+(l1+l5)) + ((l2+l6)+(l3+l7)) — matches ref::lane_combine.
inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_hadd_ps(s, s);
  s = _mm_hadd_ps(s, s);
  return _mm_cvtss_f32(s);
}

// Core j-panel: rows of C get independent serial fma chains over k.
// A_at(i, k) abstracts the element layout (nn vs tn).
template <typename AtFn>
void gemm_panel(int M, int N, int K, AtFn A_at, const float* B, float* C, bool acc) {
  int j = 0;
  for (; j + 16 <= N; j += 16) {
    int i = 0;
    for (; i + 4 <= M; i += 4) {
      __m256 c00, c01, c10, c11, c20, c21, c30, c31;
      if (acc) {
        c00 = _mm256_loadu_ps(C + size_t(i) * N + j);
        c01 = _mm256_loadu_ps(C + size_t(i) * N + j + 8);
        c10 = _mm256_loadu_ps(C + size_t(i + 1) * N + j);
        c11 = _mm256_loadu_ps(C + size_t(i + 1) * N + j + 8);
        c20 = _mm256_loadu_ps(C + size_t(i + 2) * N + j);
        c21 = _mm256_loadu_ps(C + size_t(i + 2) * N + j + 8);
        c30 = _mm256_loadu_ps(C + size_t(i + 3) * N + j);
        c31 = _mm256_loadu_ps(C + size_t(i + 3) * N + j + 8);
      } else {
        c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_ps();
      }
      for (int k = 0; k < K; ++k) {
        __m256 b0 = _mm256_loadu_ps(B + size_t(k) * N + j);
        __m256 b1 = _mm256_loadu_ps(B + size_t(k) * N + j + 8);
        __m256 a0 = _mm256_set1_ps(A_at(i, k));
        __m256 a1 = _mm256_set1_ps(A_at(i + 1, k));
        __m256 a2 = _mm256_set1_ps(A_at(i + 2, k));
        __m256 a3 = _mm256_set1_ps(A_at(i + 3, k));
        c00 = _mm256_fmadd_ps(a0, b0, c00);
        c01 = _mm256_fmadd_ps(a0, b1, c01);
        c10 = _mm256_fmadd_ps(a1, b0, c10);
        c11 = _mm256_fmadd_ps(a1, b1, c11);
        c20 = _mm256_fmadd_ps(a2, b0, c20);
        c21 = _mm256_fmadd_ps(a2, b1, c21);
        c30 = _mm256_fmadd_ps(a3, b0, c30);
        c31 = _mm256_fmadd_ps(a3, b1, c31);
      }
      _mm256_storeu_ps(C + size_t(i) * N + j, c00);
      _mm256_storeu_ps(C + size_t(i) * N + j + 8, c01);
      _mm256_storeu_ps(C + size_t(i + 1) * N + j, c10);
      _mm256_storeu_ps(C + size_t(i + 1) * N + j + 8, c11);
      _mm256_storeu_ps(C + size_t(i + 2) * N + j, c20);
      _mm256_storeu_ps(C + size_t(i + 2) * N + j + 8, c21);
      _mm256_storeu_ps(C + size_t(i + 3) * N + j, c30);
      _mm256_storeu_ps(C + size_t(i + 3) * N + j + 8, c31);
    }
    for (; i < M; ++i) {
      __m256 c0, c1;
      if (acc) {
        c0 = _mm256_loadu_ps(C + size_t(i) * N + j);
        c1 = _mm256_loadu_ps(C + size_t(i) * N + j + 8);
      } else {
        c0 = c1 = _mm256_setzero_ps();
      }
      for (int k = 0; k < K; ++k) {
        __m256 a = _mm256_set1_ps(A_at(i, k));
        c0 = _mm256_fmadd_ps(a, _mm256_loadu_ps(B + size_t(k) * N + j), c0);
        c1 = _mm256_fmadd_ps(a, _mm256_loadu_ps(B + size_t(k) * N + j + 8), c1);
      }
      _mm256_storeu_ps(C + size_t(i) * N + j, c0);
      _mm256_storeu_ps(C + size_t(i) * N + j + 8, c1);
    }
  }
  for (; j + 8 <= N; j += 8) {
    for (int i = 0; i < M; ++i) {
      __m256 c0 = acc ? _mm256_loadu_ps(C + size_t(i) * N + j) : _mm256_setzero_ps();
      for (int k = 0; k < K; ++k)
        c0 = _mm256_fmadd_ps(_mm256_set1_ps(A_at(i, k)),
                             _mm256_loadu_ps(B + size_t(k) * N + j), c0);
      _mm256_storeu_ps(C + size_t(i) * N + j, c0);
    }
  }
  if (int r = N - j; r > 0) {
    __m256i m = tail_mask(r);
    for (int i = 0; i < M; ++i) {
      __m256 c0 = acc ? _mm256_maskload_ps(C + size_t(i) * N + j, m) : _mm256_setzero_ps();
      for (int k = 0; k < K; ++k)
        c0 = _mm256_fmadd_ps(_mm256_set1_ps(A_at(i, k)),
                             _mm256_maskload_ps(B + size_t(k) * N + j, m), c0);
      _mm256_maskstore_ps(C + size_t(i) * N + j, m, c0);
    }
  }
}

void gemm_nn_impl(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  gemm_panel(M, N, K, [A, K](int i, int k) { return A[size_t(i) * K + k]; }, B, C, acc);
}

void gemm_tn_impl(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  gemm_panel(M, N, K, [A, M](int i, int k) { return A[size_t(k) * M + i]; }, B, C, acc);
}

// nt: transpose B into scratch, then the nn panel reproduces the same
// serial-over-k chain as ref::gemm_nt.
void gemm_nt_impl(int M, int N, int K, const float* A, const float* B, float* C, bool acc) {
  static thread_local std::vector<float> scratch;
  scratch.resize(size_t(K) * N);
  for (int jj = 0; jj < N; ++jj)
    for (int kk = 0; kk < K; ++kk) scratch[size_t(kk) * N + jj] = B[size_t(jj) * K + kk];
  gemm_nn_impl(M, N, K, A, scratch.data(), C, acc);
}

float dot_impl(const float* a, const float* b, int n) {
  __m256 accv = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8)
    accv = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), accv);
  if (int r = n - i; r > 0) {
    __m256i m = tail_mask(r);
    accv = _mm256_fmadd_ps(_mm256_maskload_ps(a + i, m), _mm256_maskload_ps(b + i, m), accv);
  }
  return hsum(accv);
}

float sumsq_impl(const float* a, int n) {
  __m256 accv = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(a + i);
    accv = _mm256_fmadd_ps(v, v, accv);
  }
  if (int r = n - i; r > 0) {
    __m256 v = _mm256_maskload_ps(a + i, tail_mask(r));
    accv = _mm256_fmadd_ps(v, v, accv);
  }
  return hsum(accv);
}

float asum_impl(const float* a, int n) {
  const __m256 sign = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  __m256 accv = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8)
    accv = _mm256_add_ps(accv, _mm256_and_ps(sign, _mm256_loadu_ps(a + i)));
  if (int r = n - i; r > 0)
    accv = _mm256_add_ps(accv, _mm256_and_ps(sign, _mm256_maskload_ps(a + i, tail_mask(r))));
  return hsum(accv);
}

void axpy_impl(int n, float alpha, const float* x, float* y) {
  __m256 av = _mm256_set1_ps(alpha);
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

inline __m256 dist_acc(const float* x, const float* c, int D) {
  __m256 accv = _mm256_setzero_ps();
  int d = 0;
  for (; d + 8 <= D; d += 8) {
    __m256 diff = _mm256_sub_ps(_mm256_loadu_ps(x + d), _mm256_loadu_ps(c + d));
    accv = _mm256_fmadd_ps(diff, diff, accv);
  }
  if (int r = D - d; r > 0) {
    __m256i m = tail_mask(r);
    __m256 diff = _mm256_sub_ps(_mm256_maskload_ps(x + d, m), _mm256_maskload_ps(c + d, m));
    accv = _mm256_fmadd_ps(diff, diff, accv);
  }
  return accv;
}

int nearest_impl(const float* x, const float* cb, int K, int D, float* best_d2_out) {
  int best = 0;
  float best_d2 = hsum(dist_acc(x, cb, D));
  int j = 1;
  // four independent codeword chains hide the fma latency
  for (; j + 4 <= K; j += 4) {
    const float* c0 = cb + size_t(j) * D;
    __m256 a0 = _mm256_setzero_ps(), a1 = _mm256_setzero_ps(), a2 = _mm256_setzero_ps(),
           a3 = _mm256_setzero_ps();
    int d = 0;
    for (; d + 8 <= D; d += 8) {
      __m256 xv = _mm256_loadu_ps(x + d);
      __m256 d0 = _mm256_sub_ps(xv, _mm256_loadu_ps(c0 + d));
      __m256 d1 = _mm256_sub_ps(xv, _mm256_loadu_ps(c0 + D + d));
      __m256 d2 = _mm256_sub_ps(xv, _mm256_loadu_ps(c0 + 2 * size_t(D) + d));
      __m256 d3 = _mm256_sub_ps(xv, _mm256_loadu_ps(c0 + 3 * size_t(D) + d));
      a0 = _mm256_fmadd_ps(d0, d0, a0);
      a1 = _mm256_fmadd_ps(d1, d1, a1);
      a2 = _mm256_fmadd_ps(d2, d2, a2);
      a3 = _mm256_fmadd_ps(d3, d3, a3);
    }
    if (int r = D - d; r > 0) {
      __m256i m = tail_mask(r);
      __m256 xv = _mm256_maskload_ps(x + d, m);
      __m256 d0 = _mm256_sub_ps(xv, _mm256_maskload_ps(c0 + d, m));
      __m256 d1 = _mm256_sub_ps(xv, _mm256_maskload_ps(c0 + D + d, m));
      __m256 d2 = _mm256_sub_ps(xv, _mm256_maskload_ps(c0 + 2 * size_t(D) + d, m));
      __m256 d3 = _mm256_sub_ps(xv, _mm256_maskload_ps(c0 + 3 * size_t(D) + d, m));
      a0 = _mm256_fmadd_ps(d0, d0, a0);
      a1 = _mm256_fmadd_ps(d1, d1, a1);
      a2 = _mm256_fmadd_ps(d2, d2, a2);
      a3 = _mm256_fmadd_ps(d3, d3, a3);
    }
    float d2s[4] = {hsum(a0), hsum(a1), hsum(a2), hsum(a3)};
    for (int t = 0; t < 4; ++t) {
      if (d2s[t] < best_d2) {
        best_d2 = d2s[t];
        best = j + t;
      }
    }
  }
  for (; j < K; ++j) {
    float d2 = hsum(dist_acc(x, cb + size_t(j) * D, D));
    if (d2 < best_d2) {
      best_d2 = d2;
      best = j;
    }
  }
  if (best_d2_out) *best_d2_out = best_d2;
  return best;
}

}  // namespace

const KernelTable table = {
    &gemm_nn_impl, &gemm_tn_impl, &gemm_nt_impl, &dot_impl,
    &sumsq_impl,   &asum_impl,    &axpy_impl,    &nearest_impl,
};

}  // namespace spg::kernels::avx2

#else  // non-AVX2 build: alias the scalar reference so the table exists

namespace spg::kernels::avx2 {
const KernelTable table = {
    &ref::gemm_nn<float>, &ref::gemm_tn<float>, &ref::gemm_nt<float>,
    &ref::dot<float>,     &ref::sumsq<float>,   &ref::asum<float>,
    &ref::axpy<float>,    &ref::nearest_codeword<float>,
};
}  // namespace spg::kernels::avx2

#endif
