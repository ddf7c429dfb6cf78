#include <doctest.h>

#include <cmath>
#include <vector>

#include "spg/eval/metrics.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/rng.hpp"

using namespace spg;
using namespace spg::eval;

namespace {

// Textbook recursive edit distance, independent of the DP implementation.
int lev_oracle(const std::vector<int>& a, const std::vector<int>& b, size_t i, size_t j) {
  if (i == a.size()) return int(b.size() - j);
  if (j == b.size()) return int(a.size() - i);
  int sub = lev_oracle(a, b, i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
  int del = lev_oracle(a, b, i + 1, j) + 1;
  int ins = lev_oracle(a, b, i, j + 1) + 1;
  return std::min({sub, del, ins});
}

}  // namespace

TEST_CASE("si_sdr identity and scale invariance") {
  Rng rng(11);
  int n = 500;
  std::vector<float> ref(n), noisy(n), scaled(n);
  for (int i = 0; i < n; ++i) ref[i] = float(rng.normal());
  CHECK(si_sdr(ref.data(), ref.data(), n) == doctest::Approx(60.0));

  for (int i = 0; i < n; ++i) noisy[i] = ref[i] + 0.1f * float(rng.normal());
  double base = si_sdr(ref.data(), noisy.data(), n);
  CHECK(base > 10.0);
  CHECK(base < 30.0);
  // The scaled estimate rounds to float, so allow a small slack.
  for (int i = 0; i < n; ++i) scaled[i] = 3.5f * noisy[i];
  CHECK(si_sdr(ref.data(), scaled.data(), n) == doctest::Approx(base).epsilon(1e-5));
}

TEST_CASE("si_sdr hand-computed values") {
  // est = ref + orthogonal error with ||e||^2 = ||ref||^2 / 100 -> 20 dB
  // (up to the float rounding of the 0.1 error sample).
  std::vector<float> ref = {1.0f, 0.0f};
  std::vector<float> est = {1.0f, 0.1f};
  double expect = 10.0 * std::log10(1.0 / (double(est[1]) * est[1]));
  CHECK(si_sdr(ref.data(), est.data(), 2) == doctest::Approx(expect).epsilon(1e-12));

  // Equal signal and error power -> 0 dB.
  std::vector<float> est0 = {1.0f, 1.0f};
  CHECK(si_sdr(ref.data(), est0.data(), 2) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("si_sdr degenerate inputs clamp") {
  std::vector<float> zero(100, 0.0f);
  std::vector<float> sig(100);
  Rng rng(3);
  for (auto& v : sig) v = float(rng.normal());
  // Silent reference is unusable.
  CHECK(si_sdr(zero.data(), sig.data(), 100) == doctest::Approx(-60.0));
  // Silent estimate captures none of the reference.
  CHECK(si_sdr(sig.data(), zero.data(), 100) == doctest::Approx(-60.0));
  // Orthogonal estimate likewise (projection is zero).
  std::vector<float> a = {1.0f, 0.0f}, b = {0.0f, 1.0f};
  CHECK(si_sdr(a.data(), b.data(), 2) == doctest::Approx(-60.0));
}

TEST_CASE("levenshtein matches recursive oracle") {
  CHECK(levenshtein({}, {}) == 0);
  CHECK(levenshtein({1, 2, 3}, {}) == 3);
  CHECK(levenshtein({}, {4, 5}) == 2);
  CHECK(levenshtein({1, 2, 3}, {1, 2, 3}) == 0);
  // "kitten" -> "sitting" with letters mapped to ints.
  std::vector<int> kitten = {1, 2, 3, 3, 4, 5};
  std::vector<int> sitting = {6, 2, 3, 3, 2, 5, 7};
  CHECK(levenshtein(kitten, sitting) == 3);

  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<int> a(rng.below(7)), b(rng.below(7));
    for (auto& v : a) v = int(rng.below(3));
    for (auto& v : b) v = int(rng.below(3));
    CHECK(levenshtein(a, b) == lev_oracle(a, b, 0, 0));
  }
}

TEST_CASE("collapse_labels drops silence and repeats, silence splits runs") {
  CHECK((collapse_labels({}) == std::vector<int>{}));
  CHECK((collapse_labels({0, 0, 0}) == std::vector<int>{}));
  CHECK((collapse_labels({0, 1, 1, 2, 0, 0, 2, 2, 3}) == std::vector<int>{1, 2, 2, 3}));
  // Silence between equal labels yields two phones, not one.
  CHECK((collapse_labels({1, 0, 1}) == std::vector<int>{1, 1}));
  // Without silence between them they collapse.
  CHECK((collapse_labels({1, 1, 1}) == std::vector<int>{1}));
  // Custom silence id.
  CHECK((collapse_labels({5, 1, 1, 5}, 5) == std::vector<int>{1}));
}

TEST_CASE("phone_error_rate on hand-built sequences") {
  // Identical phone strings under different framing -> 0.
  CHECK(phone_error_rate({0, 1, 1, 2, 0}, {0, 1, 2, 2, 0}) == doctest::Approx(0.0));
  // One substitution out of two reference phones -> 0.5.
  CHECK(phone_error_rate({0, 1, 1, 2}, {0, 1, 1, 3}) == doctest::Approx(0.5));
  // Deletion of one of two phones -> 0.5.
  CHECK(phone_error_rate({0, 1, 2, 0}, {0, 1, 0}) == doctest::Approx(0.5));
  // Insertions against an empty reference count per phone.
  CHECK(phone_error_rate({0, 0}, {0, 1, 0, 2, 0}) == doctest::Approx(2.0));
  CHECK(phone_error_rate({0, 0}, {0, 0, 0}) == doctest::Approx(0.0));
  // PER can exceed 1 when the hypothesis invents phones.
  CHECK(phone_error_rate({0, 1, 0}, {0, 2, 0, 3, 0, 4, 0}) == doctest::Approx(3.0));
}

TEST_CASE("hallucination_stats counts confident flips on clean-correct frames") {
  int C = 4, T = 5;
  Mat<float> clean(C, T), coded(C, T);
  auto one_hot = [&](Mat<float>& m, int t, int c, float hi) {
    for (int k = 0; k < C; ++k) m.at(k, t) = 0.0f;
    m.at(c, t) = hi;
  };
  std::vector<int> labels = {0, 1, 1, 2, 3};
  // t=0: silence label, never eligible.
  one_hot(clean, 0, 1, 10.0f);
  one_hot(coded, 0, 2, 10.0f);
  // t=1: clean correct, coded confidently wrong.
  one_hot(clean, 1, 1, 10.0f);
  one_hot(coded, 1, 2, 10.0f);
  // t=2: clean correct, coded wrong but diffuse (max prob ~0.28).
  one_hot(clean, 2, 1, 10.0f);
  coded.at(0, 2) = 0.0f; coded.at(1, 2) = 0.1f; coded.at(2, 2) = 0.2f; coded.at(3, 2) = 0.0f;
  // t=3: clean already wrong, not eligible.
  one_hot(clean, 3, 3, 10.0f);
  one_hot(coded, 3, 3, 10.0f);
  // t=4: clean correct, coded confidently correct.
  one_hot(clean, 4, 3, 10.0f);
  one_hot(coded, 4, 3, 10.0f);

  Hallucination h = hallucination_stats(clean, coded, labels);
  CHECK(h.eligible == 3);
  CHECK(h.confident_wrong == 1);
  CHECK(h.rate == doctest::Approx(1.0 / 3.0));

  // Raising the confidence bar above softmax(10 vs zeros) ~ 0.99995 clears it.
  Hallucination strict = hallucination_stats(clean, coded, labels, 0.9999999);
  CHECK(strict.eligible == 3);
  CHECK(strict.confident_wrong == 0);
  CHECK(strict.rate == doctest::Approx(0.0));
}

TEST_CASE("hallucination_stats with no eligible frames") {
  Mat<float> clean(3, 2), coded(3, 2);
  clean.at(2, 0) = 5.0f;  // argmax 2, label 1 -> wrong on clean
  clean.at(2, 1) = 5.0f;
  Hallucination h = hallucination_stats(clean, coded, {1, 0});
  CHECK(h.eligible == 0);
  CHECK(h.rate == doctest::Approx(0.0));
}

TEST_CASE("cosine_similarity basics") {
  std::vector<float> a = {1.0f, 2.0f, 3.0f};
  std::vector<float> a4 = {4.0f, 8.0f, 12.0f};
  std::vector<float> neg = {-1.0f, -2.0f, -3.0f};
  std::vector<float> orth = {0.0f, 3.0f, -2.0f};
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(a, a4) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(a, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(cosine_similarity(a, orth) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine_similarity(a, {0.0f, 0.0f, 0.0f}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(cosine_similarity(a, {1.0f, 2.0f}), ConfigError);
}

TEST_CASE("pitch_correlation over mutually voiced frames") {
  std::vector<float> ref, est;
  for (int i = 0; i < 12; ++i) {
    ref.push_back(100.0f + 5.0f * float(i));
    est.push_back(2.0f * ref.back() + 10.0f);  // affine -> r = 1
  }
  PitchCorrelation pc = pitch_correlation(ref, est);
  CHECK(pc.computable);
  CHECK(pc.frames == 12);
  CHECK(pc.r == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<float> anti(12);
  for (int i = 0; i < 12; ++i) anti[i] = 300.0f - ref[i];
  CHECK(pitch_correlation(ref, anti).r == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pitch_correlation voicing mask and guards") {
  std::vector<float> ref, est;
  for (int i = 0; i < 30; ++i) {
    // Every third ref frame unvoiced, every fifth est frame unvoiced.
    ref.push_back(i % 3 == 0 ? 0.0f : 100.0f + float(i));
    est.push_back(i % 5 == 0 ? 0.0f : 110.0f + float(i));
  }
  int both = 0;
  for (int i = 0; i < 30; ++i)
    if (ref[i] > 0 && est[i] > 0) ++both;
  PitchCorrelation pc = pitch_correlation(ref, est);
  CHECK(pc.frames == both);
  CHECK(pc.computable);
  CHECK(pc.r > 0.99);

  // Too few mutually voiced frames.
  std::vector<float> sparse_ref(30, 0.0f), sparse_est(30, 0.0f);
  for (int i = 0; i < 5; ++i) {
    sparse_ref[i] = 100.0f + float(i);
    sparse_est[i] = 100.0f + float(i);
  }
  CHECK_FALSE(pitch_correlation(sparse_ref, sparse_est).computable);

  // Constant track has undefined correlation.
  std::vector<float> flat(20, 120.0f), rising(20);
  for (int i = 0; i < 20; ++i) rising[i] = 100.0f + float(i);
  CHECK_FALSE(pitch_correlation(flat, rising).computable);
  CHECK(pitch_correlation(flat, rising).frames == 20);
}

TEST_CASE("bootstrap_mean_ci determinism and degenerate cases") {
  std::vector<double> vals;
  Rng rng(5);
  for (int i = 0; i < 40; ++i) vals.push_back(5.0 + rng.normal());

  Ci a = bootstrap_mean_ci(vals, 500, 9);
  Ci b = bootstrap_mean_ci(vals, 500, 9);
  CHECK(a.mean == b.mean);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK(a.n == 40);

  Ci c = bootstrap_mean_ci(vals, 500, 10);
  CHECK(c.lo != a.lo);  // different seed resamples differently

  double exact = 0;
  for (double v : vals) exact += v;
  exact /= vals.size();
  CHECK(a.mean == doctest::Approx(exact).epsilon(1e-12));
  CHECK(a.lo <= a.mean);
  CHECK(a.mean <= a.hi);

  // Constant data -> zero-width interval.
  Ci flat = bootstrap_mean_ci(std::vector<double>(8, 3.25), 200, 1);
  CHECK(flat.lo == doctest::Approx(3.25));
  CHECK(flat.hi == doctest::Approx(3.25));

  // Fewer than two values -> degenerate.
  Ci one = bootstrap_mean_ci({7.5}, 200, 1);
  CHECK(one.lo == 7.5);
  CHECK(one.hi == 7.5);
  CHECK(one.n == 1);
  Ci none = bootstrap_mean_ci({}, 200, 1);
  CHECK(none.mean == 0.0);
  CHECK(none.n == 0);
}

TEST_CASE("bootstrap_mean_ci narrows with sample size") {
  Rng rng(21);
  std::vector<double> small, large;
  for (int i = 0; i < 40; ++i) small.push_back(rng.normal());
  for (int i = 0; i < 640; ++i) large.push_back(rng.normal());
  Ci cs = bootstrap_mean_ci(small, 400, 2);
  Ci cl = bootstrap_mean_ci(large, 400, 2);
  CHECK(cl.hi - cl.lo < cs.hi - cs.lo);
  CHECK(cs.hi - cs.lo > 0.0);
}

TEST_CASE("bootstrap_diff_ci is paired") {
  std::vector<double> b;
  Rng rng(13);
  for (int i = 0; i < 30; ++i) b.push_back(rng.normal() * 10.0);
  std::vector<double> a(b);
  for (auto& v : a) v += 3.0;
  // Constant pairwise difference -> the interval collapses onto it even
  // though both series have large variance.
  Ci d = bootstrap_diff_ci(a, b, 300, 4);
  CHECK(d.mean == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(d.lo == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(d.hi == doctest::Approx(3.0).epsilon(1e-12));

  CHECK_THROWS_AS(bootstrap_diff_ci(a, {1.0, 2.0}, 100, 1), ConfigError);
}
