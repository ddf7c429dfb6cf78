#include <doctest.h>

#include <cstring>
#include <vector>

#include "spg/kernels/kernels.hpp"
#include "spg/util/rng.hpp"

using namespace spg;
using kernels::Backend;

namespace {

std::vector<float> random_vec(Rng& rng, size_t n, float scale = 1.0f) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.normal() * scale);
  return v;
}

// Independent oracle: accumulate in double, plain order.
void naive_gemm_nn(int M, int N, int K, const float* A, const float* B, double* C) {
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) {
      double s = 0;
      for (int k = 0; k < K; ++k) s += double(A[i * K + k]) * double(B[k * N + j]);
      C[i * N + j] = s;
    }
}

bool backend_pair_available() { return kernels::cpu_has_avx2(); }

template <typename F>
void with_backend(Backend b, F&& f) {
  Backend prev = kernels::active_backend();
  kernels::set_backend(b);
  f();
  kernels::set_backend(prev);
}

}  // namespace

TEST_CASE("gemm variants match a naive double-precision oracle") {
  Rng rng(123);
  for (int iter = 0; iter < 20; ++iter) {
    auto r = rng.derive("iter", iter);
    int M = 1 + int(r.below(20)), N = 1 + int(r.below(40)), K = 1 + int(r.below(30));
    auto A = random_vec(r, size_t(M) * K);
    auto B = random_vec(r, size_t(K) * N);
    std::vector<double> want(size_t(M) * N);
    naive_gemm_nn(M, N, K, A.data(), B.data(), want.data());

    std::vector<float> C(size_t(M) * N, -1.0f);
    kernels::gemm_nn(M, N, K, A.data(), B.data(), C.data(), false);
    for (size_t i = 0; i < C.size(); ++i)
      CHECK(C[i] == doctest::Approx(want[i]).epsilon(1e-4));

    // A^T stored [K,M]
    std::vector<float> At(size_t(K) * M);
    for (int i = 0; i < M; ++i)
      for (int k = 0; k < K; ++k) At[size_t(k) * M + i] = A[size_t(i) * K + k];
    std::vector<float> Ct(size_t(M) * N, -1.0f);
    kernels::gemm_tn(M, N, K, At.data(), B.data(), Ct.data(), false);
    for (size_t i = 0; i < C.size(); ++i) CHECK(Ct[i] == C[i]);

    // B^T stored [N,K]
    std::vector<float> Bt(size_t(N) * K);
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < N; ++j) Bt[size_t(j) * K + k] = B[size_t(k) * N + j];
    std::vector<float> Cn(size_t(M) * N, -1.0f);
    kernels::gemm_nt(M, N, K, A.data(), Bt.data(), Cn.data(), false);
    for (size_t i = 0; i < C.size(); ++i) CHECK(Cn[i] == C[i]);
  }
}

TEST_CASE("gemm accumulate flag adds into C") {
  Rng rng(7);
  int M = 5, N = 9, K = 13;
  auto A = random_vec(rng, size_t(M) * K);
  auto B = random_vec(rng, size_t(K) * N);
  std::vector<float> base(size_t(M) * N), once(size_t(M) * N);
  kernels::gemm_nn(M, N, K, A.data(), B.data(), base.data(), false);
  kernels::gemm_nn(M, N, K, A.data(), B.data(), once.data(), false);
  kernels::gemm_nn(M, N, K, A.data(), B.data(), once.data(), true);
  for (size_t i = 0; i < once.size(); ++i) CHECK(once[i] == doctest::Approx(2.0 * base[i]));
}

TEST_CASE("scalar and avx2 backends are bit-identical") {
  if (!backend_pair_available()) {
    MESSAGE("AVX2 not available; skipping backend equivalence");
    return;
  }
  Rng rng(999);
  for (int iter = 0; iter < 30; ++iter) {
    auto r = rng.derive("eq", iter);
    int M = 1 + int(r.below(33)), N = 1 + int(r.below(65)), K = 1 + int(r.below(48));
    auto A = random_vec(r, size_t(M) * K);
    auto B = random_vec(r, size_t(K) * N);
    auto Bt = random_vec(r, size_t(N) * K);
    auto At = random_vec(r, size_t(K) * M);
    std::vector<float> c_s(size_t(M) * N), c_v(size_t(M) * N);

    auto run = [&](std::vector<float>& c) {
      kernels::gemm_nn(M, N, K, A.data(), B.data(), c.data(), false);
      kernels::gemm_nn(M, N, K, A.data(), B.data(), c.data(), true);
      kernels::gemm_tn(M, N, K, At.data(), B.data(), c.data(), true);
      kernels::gemm_nt(M, N, K, A.data(), Bt.data(), c.data(), true);
    };
    with_backend(Backend::scalar, [&] { run(c_s); });
    with_backend(Backend::avx2, [&] { run(c_v); });
    REQUIRE(std::memcmp(c_s.data(), c_v.data(), c_s.size() * 4) == 0);

    int n = 1 + int(r.below(300));
    auto x = random_vec(r, n);
    auto y = random_vec(r, n);
    float d_s = 0, d_v = 0, s_s = 0, s_v = 0, a_s = 0, a_v = 0;
    std::vector<float> ax_s = y, ax_v = y;
    with_backend(Backend::scalar, [&] {
      d_s = kernels::dot(x.data(), y.data(), n);
      s_s = kernels::sumsq(x.data(), n);
      a_s = kernels::asum(x.data(), n);
      kernels::axpy(n, 0.37f, x.data(), ax_s.data());
    });
    with_backend(Backend::avx2, [&] {
      d_v = kernels::dot(x.data(), y.data(), n);
      s_v = kernels::sumsq(x.data(), n);
      a_v = kernels::asum(x.data(), n);
      kernels::axpy(n, 0.37f, x.data(), ax_v.data());
    });
    CHECK(std::memcmp(&d_s, &d_v, 4) == 0);
    CHECK(std::memcmp(&s_s, &s_v, 4) == 0);
    CHECK(std::memcmp(&a_s, &a_v, 4) == 0);
    CHECK(std::memcmp(ax_s.data(), ax_v.data(), size_t(n) * 4) == 0);

    int K2 = 1 + int(r.below(100));
    int D = 1 + int(r.below(64));
    auto cb = random_vec(r, size_t(K2) * D);
    auto q = random_vec(r, D);
    int n_s = -1, n_v = -1;
    float bd_s = 0, bd_v = 0;
    with_backend(Backend::scalar,
                 [&] { n_s = kernels::nearest_codeword(q.data(), cb.data(), K2, D, &bd_s); });
    with_backend(Backend::avx2,
                 [&] { n_v = kernels::nearest_codeword(q.data(), cb.data(), K2, D, &bd_v); });
    CHECK(n_s == n_v);
    CHECK(std::memcmp(&bd_s, &bd_v, 4) == 0);
  }
}

TEST_CASE("nearest_codeword matches exhaustive scan and breaks ties low") {
  Rng rng(5);
  for (int iter = 0; iter < 50; ++iter) {
    auto r = rng.derive("nc", iter);
    int K = 2 + int(r.below(40));
    int D = 1 + int(r.below(24));
    auto cb = random_vec(r, size_t(K) * D);
    // Force duplicates so ties really occur.
    if (K >= 4) {
      std::copy(cb.begin(), cb.begin() + D, cb.begin() + 2 * D);
      std::copy(cb.begin() + D, cb.begin() + 2 * D, cb.begin() + 3 * D);
    }
    auto q = random_vec(r, D);
    float best_d = 0;
    // Oracle: exhaustive scan, strict less-than so the first occurrence
    // wins ties.
    int best = 0;
    for (int j = 1; j < K; ++j) {
      float dj = 0, db = 0;
      for (int i = 0; i < D; ++i) {
        float a = q[i] - cb[size_t(j) * D + i];
        float b = q[i] - cb[size_t(best) * D + i];
        dj += a * a;
        db += b * b;
      }
      if (dj < db) best = j;
    }
    int got = kernels::nearest_codeword(q.data(), cb.data(), K, D, &best_d);
    float want_d = 0;
    for (int i = 0; i < D; ++i) {
      float a = q[i] - cb[size_t(best) * D + i];
      want_d += a * a;
    }
    CHECK(got == best);
    CHECK(best_d == doctest::Approx(want_d).epsilon(1e-4));

    // Query exactly equal to a duplicated codeword must return the lower index.
    if (K >= 4) {
      std::vector<float> q2(cb.begin() + 2 * D, cb.begin() + 3 * D);
      int hit = kernels::nearest_codeword(q2.data(), cb.data(), K, D);
      CHECK(hit == 0);
    }
  }
}

TEST_CASE("backend selection reports a valid name") {
  auto name = kernels::backend_name();
  CHECK((name == "scalar" || name == "avx2"));
}
