#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "spg/priors/semantic.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

using namespace spg;
using namespace spg::priors;

namespace {

Mat<double> random_feats(int F, int T, Rng rng, double scale = 1.0) {
  Mat<double> m(F, T);
  for (auto& v : m.v) v = rng.normal() * scale;
  return m;
}

}  // namespace

TEST_CASE("per-frame normalization standardizes and absorbs affine maps") {
  Mat<double> f = random_feats(16, 10, Rng(1));
  Mat<double> n = layer_norm_frames(f);
  for (int t = 0; t < n.cols; ++t) {
    double mean = 0, var = 0;
    for (int r = 0; r < n.rows; ++r) mean += n.at(r, t);
    mean /= n.rows;
    for (int r = 0; r < n.rows; ++r) var += (n.at(r, t) - mean) * (n.at(r, t) - mean);
    var /= n.rows;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Positive rescale plus shift of the features leaves the output unchanged.
  Mat<double> g = f;
  for (auto& v : g.v) v = 3.7 * v - 1.2;
  Mat<double> ng = layer_norm_frames(g);
  for (size_t i = 0; i < n.v.size(); ++i) CHECK(ng.v[i] == doctest::Approx(n.v[i]).epsilon(1e-10));

  // A constant frame normalizes to zeros through the deviation floor.
  Mat<double> c(4, 1);
  for (auto& v : c.v) v = 2.5;
  Mat<double> nc = layer_norm_frames(c);
  for (double v : nc.v) CHECK(v == 0.0);
}

TEST_CASE("semantic loss vanishes at identity and on rescaled targets") {
  Mat<double> f = random_feats(12, 8, Rng(2));
  CHECK(semantic_loss(f, f) == 0.0);

  // Affine target change is invisible after normalization.
  Mat<double> g = f;
  for (auto& v : g.v) v = 0.4 * v + 7.0;
  CHECK(semantic_loss(g, f) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));

  Mat<double> h = random_feats(12, 8, Rng(3));
  CHECK(semantic_loss(f, h) > 0.1);

  Mat<double> wrong(12, 9);
  CHECK_THROWS_AS(semantic_loss(f, wrong), ConfigError);
}

TEST_CASE("semantic loss gradient matches central differences") {
  Mat<double> target = random_feats(8, 6, Rng(4));
  Mat<double> pred = random_feats(8, 6, Rng(5));
  Mat<double> grad(8, 6);
  semantic_loss(target, pred, &grad);

  double h = 1e-6;
  for (int r = 0; r < 8; ++r) {
    for (int t = 0; t < 6; ++t) {
      double keep = pred.at(r, t);
      pred.at(r, t) = keep + h;
      double lp = semantic_loss(target, pred);
      pred.at(r, t) = keep - h;
      double lm = semantic_loss(target, pred);
      pred.at(r, t) = keep;
      CHECK(grad.at(r, t) == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5).scale(0.01));
    }
  }
}

TEST_CASE("semantic loss gradient is exact on floored constant frames") {
  // A constant prediction frame sits below the deviation floor; the
  // gradient takes the floored branch and must still match differences.
  Mat<double> target = random_feats(8, 2, Rng(6));
  Mat<double> pred(8, 2);
  for (int r = 0; r < 8; ++r) {
    pred.at(r, 0) = 0.3;                      // constant frame, floored
    pred.at(r, 1) = target.at(r, 1) + 0.1 * r;  // ordinary frame
  }
  Mat<double> grad(8, 2);
  semantic_loss(target, pred, &grad);

  // Perturbations far below the floor keep the frame on the same branch.
  double h = 1e-7;
  for (int r = 0; r < 8; ++r) {
    double keep = pred.at(r, 0);
    pred.at(r, 0) = keep + h;
    double lp = semantic_loss(target, pred);
    pred.at(r, 0) = keep - h;
    double lm = semantic_loss(target, pred);
    pred.at(r, 0) = keep;
    CHECK(grad.at(r, 0) == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4).scale(0.01));
  }
}

TEST_CASE("frame shuffling permutes columns deterministically") {
  Mat<double> f = random_feats(5, 16, Rng(7));
  Mat<double> s1 = shuffle_frames(f, Rng(8));
  Mat<double> s2 = shuffle_frames(f, Rng(8));
  CHECK((s1.v == s2.v));

  // Every original column appears exactly once.
  auto col = [](const Mat<double>& m, int c) {
    std::vector<double> v(m.rows);
    for (int r = 0; r < m.rows; ++r) v[r] = m.at(r, c);
    return v;
  };
  std::vector<std::vector<double>> orig, shuf;
  for (int c = 0; c < f.cols; ++c) {
    orig.push_back(col(f, c));
    shuf.push_back(col(s1, c));
  }
  std::sort(orig.begin(), orig.end());
  std::sort(shuf.begin(), shuf.end());
  CHECK((orig == shuf));

  // And the permutation actually moved something.
  bool moved = false;
  for (int c = 0; c < f.cols && !moved; ++c)
    if (col(f, c) != col(s1, c)) moved = true;
  CHECK(moved);
}

TEST_CASE("frame alignment trims to the shorter map") {
  Mat<double> a = random_feats(4, 10, Rng(9));
  Mat<double> b = random_feats(4, 8, Rng(10));
  Mat<double> a_orig = a;
  align_frames(a, b);
  CHECK(a.cols == 8);
  CHECK(b.cols == 8);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 8; ++c) CHECK(a.at(r, c) == a_orig.at(r, c));
}

TEST_CASE("frame cosine separates matched, scaled, and shuffled features") {
  Mat<double> f = random_feats(24, 20, Rng(11));
  CHECK(mean_frame_cosine(f, f) == doctest::Approx(1.0).epsilon(1e-12));

  Mat<double> scaled = f;
  for (auto& v : scaled.v) v *= 5.0;
  CHECK(mean_frame_cosine(f, scaled) == doctest::Approx(1.0).epsilon(1e-12));

  // Orthogonal columns score zero.
  Mat<double> a(2, 1), b(2, 1);
  a.at(0, 0) = 1.0;
  b.at(1, 0) = 1.0;
  CHECK(mean_frame_cosine(a, b) == 0.0);

  // Shuffling high-dimensional random frames destroys most similarity.
  Mat<double> s = shuffle_frames(f, Rng(12));
  CHECK(mean_frame_cosine(f, s) < 0.6);
}
