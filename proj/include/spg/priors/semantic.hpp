#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "spg/util/errors.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

namespace spg::priors {

// Per-frame layer normalization over the feature dimension. The deviation
// floor makes the output exactly invariant to affine rescaling of the
// features (for any scale the floor either stays inactive or dominates the
// same frames).
template <typename T>
Mat<T> layer_norm_frames(const Mat<T>& feats, T eps = T(1e-5)) {
  Mat<T> out(feats.rows, feats.cols);
  int F = feats.rows;
  for (int t = 0; t < feats.cols; ++t) {
    T mean = T(0);
    for (int f = 0; f < F; ++f) mean += feats.at(f, t);
    mean /= T(F);
    T var = T(0);
    for (int f = 0; f < F; ++f) {
      T d = feats.at(f, t) - mean;
      var += d * d;
    }
    var /= T(F);
    T denom = std::max(std::sqrt(var), eps);
    for (int f = 0; f < F; ++f) out.at(f, t) = (feats.at(f, t) - mean) / denom;
  }
  return out;
}

// Truncates both feature maps to the shorter frame count (they may differ
// by an edge frame when signal lengths differ).
template <typename T>
void align_frames(Mat<T>& a, Mat<T>& b) {
  int cols = std::min(a.cols, b.cols);
  auto trim = [cols](Mat<T>& m) {
    if (m.cols == cols) return;
    Mat<T> t(m.rows, cols);
    for (int r = 0; r < m.rows; ++r)
      for (int c = 0; c < cols; ++c) t.at(r, c) = m.at(r, c);
    m = std::move(t);
  };
  trim(a);
  trim(b);
}

// Permutes feature frames (columns); the shuffled-target control.
template <typename T>
Mat<T> shuffle_frames(const Mat<T>& feats, Rng rng) {
  auto perm = rng.permutation(feats.cols);
  Mat<T> out(feats.rows, feats.cols);
  for (int c = 0; c < feats.cols; ++c)
    for (int r = 0; r < feats.rows; ++r) out.at(r, c) = feats.at(r, perm[c]);
  return out;
}

// Mean absolute difference between layer-normalized feature maps:
//   L = mean over frames and dims of |LN(target) - LN(pred)|.
// target is treated as a constant; if dpred is given, dL/dpred (through
// the prediction-side normalization) is accumulated into it.
template <typename T>
T semantic_loss(const Mat<T>& target_feats, const Mat<T>& pred_feats, Mat<T>* dpred = nullptr,
                T eps = T(1e-5)) {
  if (!target_feats.same_shape(pred_feats))
    throw ConfigError("semantic loss needs aligned feature maps");
  int F = pred_feats.rows, Tn = pred_feats.cols;
  if (F == 0 || Tn == 0) return T(0);
  Mat<T> tn = layer_norm_frames(target_feats, eps);

  T total = T(0);
  T inv_numel = T(1) / (T(F) * T(Tn));
  for (int t = 0; t < Tn; ++t) {
    // Normalize the prediction frame, keeping what backward needs.
    T mean = T(0);
    for (int f = 0; f < F; ++f) mean += pred_feats.at(f, t);
    mean /= T(F);
    T var = T(0);
    for (int f = 0; f < F; ++f) {
      T d = pred_feats.at(f, t) - mean;
      var += d * d;
    }
    var /= T(F);
    T sigma = std::sqrt(var);
    T denom = std::max(sigma, eps);
    bool floored = sigma < eps;

    std::vector<T> y(F), dy(F, T(0));
    for (int f = 0; f < F; ++f) {
      y[f] = (pred_feats.at(f, t) - mean) / denom;
      T d = y[f] - tn.at(f, t);
      total += std::abs(d) * inv_numel;
      dy[f] = (d > T(0) ? inv_numel : (d < T(0) ? -inv_numel : T(0)));
    }
    if (!dpred) continue;

    T dy_mean = T(0), dyy_mean = T(0);
    for (int f = 0; f < F; ++f) {
      dy_mean += dy[f];
      dyy_mean += dy[f] * y[f];
    }
    dy_mean /= T(F);
    dyy_mean /= T(F);
    for (int f = 0; f < F; ++f) {
      T g;
      if (floored) {
        g = (dy[f] - dy_mean) / denom;
      } else {
        g = (dy[f] - dy_mean - y[f] * dyy_mean) / denom;
      }
      dpred->at(f, t) += g;
    }
  }
  return total;
}

// Mean over frames of the cosine similarity between corresponding columns.
template <typename T>
T mean_frame_cosine(const Mat<T>& a, const Mat<T>& b) {
  if (!a.same_shape(b) || a.cols == 0) throw ConfigError("cosine needs aligned feature maps");
  T total = T(0);
  for (int t = 0; t < a.cols; ++t) {
    T dot = T(0), na = T(0), nb = T(0);
    for (int f = 0; f < a.rows; ++f) {
      dot += a.at(f, t) * b.at(f, t);
      na += a.at(f, t) * a.at(f, t);
      nb += b.at(f, t) * b.at(f, t);
    }
    T den = std::sqrt(na) * std::sqrt(nb);
    total += den > T(0) ? dot / den : T(0);
  }
  return total / T(a.cols);
}

}  // namespace spg::priors
