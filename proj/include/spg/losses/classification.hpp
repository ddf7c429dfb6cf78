#pragma once

#include <cmath>
#include <vector>

#include "spg/util/mat.hpp"

namespace spg::losses {

// Frame-wise softmax cross-entropy. logits: [classes][T]; labels: one id
// per frame, -1 skips the frame. Loss is the mean over counted frames;
// dlogits (same shape, accumulated) follows that normalization.
template <typename T>
T softmax_xent(const Mat<T>& logits, const std::vector<int>& labels, Mat<T>* dlogits = nullptr) {
  int C = logits.rows, Tn = logits.cols;
  int counted = 0;
  for (int t = 0; t < Tn; ++t)
    if (t < int(labels.size()) && labels[t] >= 0) ++counted;
  if (counted == 0) return T(0);
  T inv = T(1) / T(counted);
  T total = T(0);
  std::vector<T> p(C);
  for (int t = 0; t < Tn; ++t) {
    if (t >= int(labels.size()) || labels[t] < 0) continue;
    T mx = logits.at(0, t);
    for (int c = 1; c < C; ++c) mx = std::max(mx, logits.at(c, t));
    T z = T(0);
    for (int c = 0; c < C; ++c) {
      p[c] = std::exp(logits.at(c, t) - mx);
      z += p[c];
    }
    for (int c = 0; c < C; ++c) p[c] /= z;
    int y = labels[t];
    total -= std::log(std::max(p[y], T(1e-12))) * inv;
    if (dlogits)
      for (int c = 0; c < C; ++c) dlogits->at(c, t) += (p[c] - (c == y ? T(1) : T(0))) * inv;
  }
  return total;
}

// Argmax class per frame.
template <typename T>
std::vector<int> argmax_frames(const Mat<T>& logits) {
  std::vector<int> out(logits.cols);
  for (int t = 0; t < logits.cols; ++t) {
    int best = 0;
    for (int c = 1; c < logits.rows; ++c)
      if (logits.at(c, t) > logits.at(best, t)) best = c;
    out[t] = best;
  }
  return out;
}

}  // namespace spg::losses
