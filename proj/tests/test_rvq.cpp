#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "spg/codec/rvq.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

using namespace spg;
using namespace spg::codec;

namespace {

Mat<float> random_latent(int D, int T, Rng rng, double scale = 1.0) {
  Mat<float> z(D, T);
  for (auto& v : z.v) v = float(rng.normal() * scale);
  return z;
}

// Independent assignment oracle: exhaustive scan in double with explicit
// squared distances and lowest-index tie-break.
int oracle_nearest(const float* x, const Mat<float>& cb, int D) {
  int best = 0;
  double best_d = 1e300;
  for (int j = 0; j < cb.rows; ++j) {
    double d = 0;
    for (int k = 0; k < D; ++k) {
      double diff = double(x[k]) - double(cb.at(j, k));
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("stagewise assignments match an exhaustive scan oracle") {
  int K = 16, D = 6, T = 40, n_q = 4;
  Rvq<float> q(K, D, n_q);
  q.init_random(Rng(3), 1.0);
  Mat<float> z = random_latent(D, T, Rng(4));

  auto res = q.quantize(z, n_q, true);

  // Replay the greedy residual recursion with the oracle.
  Mat<double> resid(T, D);
  for (int d = 0; d < D; ++d)
    for (int t = 0; t < T; ++t) resid.at(t, d) = z.at(d, t);
  for (int s = 0; s < n_q; ++s) {
    for (int t = 0; t < T; ++t) {
      // Oracle runs on the float residual actually used by the quantizer.
      CHECK(res.indices.at(s, t) == oracle_nearest(res.stage_inputs[s].row(t), q.codebooks[s], D));
    }
  }
}

TEST_CASE("residual recursion and reconstruction identities hold") {
  int K = 32, D = 8, T = 25, n_q = 6;
  Rvq<float> q(K, D, n_q);
  q.init_random(Rng(13), 0.7);
  Mat<float> z = random_latent(D, T, Rng(14));

  auto res = q.quantize(z, n_q, true);
  REQUIRE(res.indices.rows == n_q);
  REQUIRE(res.indices.cols == T);
  REQUIRE(int(res.stage_inputs.size()) == n_q);

  // stage input s+1 = stage input s minus the codeword chosen at stage s.
  for (int s = 0; s + 1 < n_q; ++s) {
    for (int t = 0; t < T; ++t) {
      const float* cw = q.codebooks[s].row(res.indices.at(s, t));
      for (int d = 0; d < D; ++d) {
        float expect = res.stage_inputs[s].at(t, d) - cw[d];
        CHECK(res.stage_inputs[s + 1].at(t, d) == expect);
      }
    }
  }

  // zq is the sum of the selected codewords.
  for (int t = 0; t < T; ++t) {
    for (int d = 0; d < D; ++d) {
      float sum = 0;
      for (int s = 0; s < n_q; ++s) sum += q.codebooks[s].at(res.indices.at(s, t), d);
      CHECK(res.zq.at(d, t) == sum);
    }
  }

  // Each extra stage reduces (or keeps) the residual energy.
  double prev = 1e300;
  for (int s = 1; s <= n_q; ++s) {
    auto r = q.quantize(z, s);
    double err = 0;
    for (size_t i = 0; i < z.v.size(); ++i) {
      double d = double(z.v[i]) - double(r.zq.v[i]);
      err += d * d;
    }
    CHECK(err <= prev + 1e-9);
    prev = err;
  }
}

TEST_CASE("stage prefixes are independent of the requested depth") {
  int K = 16, D = 4, T = 30;
  Rvq<float> q(K, D, 8);
  q.init_random(Rng(5));
  Mat<float> z = random_latent(D, T, Rng(6));
  auto full = q.quantize(z, 8);
  auto part = q.quantize(z, 3);
  for (int s = 0; s < 3; ++s)
    for (int t = 0; t < T; ++t) CHECK(part.indices.at(s, t) == full.indices.at(s, t));
}

TEST_CASE("dequantize reproduces the encoder-side reconstruction bitwise") {
  int K = 64, D = 16, T = 50, n_q = 4;
  Rvq<float> q(K, D, n_q);
  q.init_random(Rng(100));
  Mat<float> z = random_latent(D, T, Rng(101));
  auto res = q.quantize(z, n_q);
  Mat<float> zq2 = q.dequantize(res.indices);
  REQUIRE(zq2.v.size() == res.zq.v.size());
  CHECK(std::memcmp(zq2.data(), res.zq.data(), zq2.v.size() * sizeof(float)) == 0);

  Mat<int> bad(1, 2);
  bad.at(0, 0) = K;  // out of range
  CHECK_THROWS_AS(q.dequantize(bad), DataError);
  CHECK_THROWS_AS(q.quantize(z, 0), ConfigError);
  CHECK_THROWS_AS(q.quantize(z, n_q + 1), ConfigError);
}

TEST_CASE("codebook update matches a double-precision reference") {
  int K = 8, D = 3, T = 64, n_q = 2;
  Rvq<float> q(K, D, n_q);
  q.init_random(Rng(31));
  Mat<float> z = random_latent(D, T, Rng(32));
  auto res = q.quantize(z, n_q, true);

  // Reference statistics before the update mutates them.
  std::vector<std::vector<double>> ref_counts(n_q), ref_sums(n_q);
  for (int s = 0; s < n_q; ++s) {
    ref_counts[s].assign(K, 0.0);
    ref_sums[s].assign(size_t(K) * D, 0.0);
    for (int j = 0; j < K; ++j) {
      ref_counts[s][j] = q.counts[s][j];
      for (int d = 0; d < D; ++d) ref_sums[s][size_t(j) * D + d] = q.sums[s].at(j, d);
    }
  }
  double decay = 0.99;
  for (int s = 0; s < n_q; ++s) {
    std::vector<double> n(K, 0.0), bs(size_t(K) * D, 0.0);
    for (int t = 0; t < T; ++t) {
      int j = res.indices.at(s, t);
      n[j] += 1.0;
      for (int d = 0; d < D; ++d) bs[size_t(j) * D + d] += res.stage_inputs[s].at(t, d);
    }
    for (int j = 0; j < K; ++j) {
      ref_counts[s][j] = decay * ref_counts[s][j] + (1 - decay) * n[j];
      for (int d = 0; d < D; ++d) {
        size_t i = size_t(j) * D + d;
        ref_sums[s][i] = decay * ref_sums[s][i] + (1 - decay) * bs[i];
      }
    }
  }

  q.ema_update(res.stage_inputs, res.indices);
  for (int s = 0; s < n_q; ++s) {
    for (int j = 0; j < K; ++j) {
      CHECK(double(q.counts[s][j]) == doctest::Approx(ref_counts[s][j]).epsilon(1e-5));
      for (int d = 0; d < D; ++d) {
        double expect = ref_sums[s][size_t(j) * D + d] / std::max(ref_counts[s][j], 1e-5);
        CHECK(double(q.codebooks[s].at(j, d)) == doctest::Approx(expect).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("per-stage updates compose to the full update and leave other stages alone") {
  int K = 16, D = 4, T = 40, n_q = 3;
  Rvq<float> a(K, D, n_q), b(K, D, n_q);
  a.init_random(Rng(51));
  b.init_random(Rng(51));
  Mat<float> z = random_latent(D, T, Rng(52));
  auto res = a.quantize(z, n_q, true);

  a.ema_update(res.stage_inputs, res.indices);
  std::vector<int> idx(T);
  for (int s = 0; s < n_q; ++s) {
    for (int t = 0; t < T; ++t) idx[t] = res.indices.at(s, t);
    b.ema_update_stage(s, res.stage_inputs[s], idx);
  }
  for (int s = 0; s < n_q; ++s) {
    CHECK((a.counts[s] == b.counts[s]));
    CHECK((a.codebooks[s].v == b.codebooks[s].v));
    CHECK((a.sums[s].v == b.sums[s].v));
  }

  // A per-sample stage depth means deep stages may see no assignments in a
  // batch; those stages must keep their statistics instead of decaying.
  std::vector<float> frozen_counts = b.counts[2];
  std::vector<float> frozen_cw = b.codebooks[2].v;
  for (int t = 0; t < T; ++t) idx[t] = res.indices.at(0, t);
  b.ema_update_stage(0, res.stage_inputs[0], idx);
  CHECK((b.counts[2] == frozen_counts));
  CHECK((b.codebooks[2].v == frozen_cw));
  CHECK_FALSE((a.counts[0] == b.counts[0]));
}

TEST_CASE("repeated updates pull a codeword onto a stationary cluster") {
  // One stage, two well-separated clusters, K=2: codewords converge to the
  // cluster means.
  Rvq<float> q(2, 2, 1);
  q.codebooks[0].at(0, 0) = -1.0f;
  q.codebooks[0].at(0, 1) = 0.0f;
  q.codebooks[0].at(1, 0) = 1.0f;
  q.codebooks[0].at(1, 1) = 0.0f;
  for (int j = 0; j < 2; ++j) {
    q.counts[0][j] = 1.0f;
    for (int d = 0; d < 2; ++d) q.sums[0].at(j, d) = q.codebooks[0].at(j, d);
  }

  Rng rng(8);
  for (int step = 0; step < 600; ++step) {
    Mat<float> z(2, 32);
    for (int t = 0; t < 32; ++t) {
      bool left = t % 2 == 0;
      z.at(0, t) = float((left ? -3.0 : 3.0) + 0.1 * rng.normal());
      z.at(1, t) = float(1.5 + 0.1 * rng.normal());
    }
    auto res = q.quantize(z, 1, true);
    q.ema_update(res.stage_inputs, res.indices);
  }
  CHECK(q.codebooks[0].at(0, 0) == doctest::Approx(-3.0).epsilon(0.1));
  CHECK(q.codebooks[0].at(1, 0) == doctest::Approx(3.0).epsilon(0.1));
  CHECK(q.codebooks[0].at(0, 1) == doctest::Approx(1.5).epsilon(0.1));
  CHECK(q.codebooks[0].at(1, 1) == doctest::Approx(1.5).epsilon(0.1));
}

TEST_CASE("stale codewords are reseeded from the batch") {
  int K = 4, D = 2;
  Rvq<float> q(K, D, 1);
  q.init_random(Rng(55));
  q.counts[0][2] = 0.001f;  // below the 0.01 default threshold
  float kept = q.codebooks[0].at(1, 0);

  Mat<float> pool(10, D);
  for (auto& v : pool.v) v = 7.0f;
  std::vector<Mat<float>> inputs = {pool};
  int reset = q.reinit_dead_codes(inputs, Rng(56));
  CHECK(reset == 1);
  CHECK(q.codebooks[0].at(2, 0) == 7.0f);
  CHECK(q.counts[0][2] == 1.0f);
  CHECK(q.sums[0].at(2, 0) == 7.0f);
  CHECK(q.codebooks[0].at(1, 0) == kept);

  // Nothing below threshold: no resets.
  CHECK(q.reinit_dead_codes(inputs, Rng(57)) == 0);
}

TEST_CASE("payload rates follow ceil(log2 K) bits per index") {
  CHECK(bits_per_index(2) == 1);
  CHECK(bits_per_index(1023) == 10);
  CHECK(bits_per_index(1024) == 10);
  CHECK(bits_per_index(1025) == 11);
  CHECK(bits_per_second(1024, 3, 50) == 1500.0);
  CHECK(bits_per_second(1024, 6, 50) == 3000.0);
  CHECK(bits_per_second(1024, 12, 50) == 6000.0);
  CHECK(bits_per_second(1024, 24, 50) == 12000.0);
}
