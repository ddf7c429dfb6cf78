#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spg/kernels/kernels.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

namespace spg::codec {

// Residual vector quantizer. Stage k quantizes the residual left by stages
// 0..k-1 against its own codebook; the decoder sums the selected codewords.
// Codebooks learn by EMA cluster statistics rather than gradients.
template <typename T>
struct Rvq {
  int K = 0, D = 0, n_q_max = 0;
  std::vector<Mat<T>> codebooks;        // per stage: [K][D]
  std::vector<std::vector<T>> counts;   // EMA usage per stage: [K]
  std::vector<Mat<T>> sums;             // EMA vector sums per stage: [K][D]
  T decay = T(0.99);
  T eps = T(1e-5);

  Rvq() = default;
  Rvq(int K_, int D_, int n_q_max_) : K(K_), D(D_), n_q_max(n_q_max_) {
    codebooks.assign(n_q_max, Mat<T>(K, D));
    counts.assign(n_q_max, std::vector<T>(K, T(0)));
    sums.assign(n_q_max, Mat<T>(K, D));
  }

  void init_random(Rng rng, double scale = 0.3) {
    for (int q = 0; q < n_q_max; ++q) {
      auto r = rng.derive("stage", q);
      for (auto& v : codebooks[q].v) v = T(r.normal() * scale);
      // Seed EMA state as if each code had been used once at its location.
      for (int j = 0; j < K; ++j) {
        counts[q][j] = T(1);
        for (int d = 0; d < D; ++d) sums[q].at(j, d) = codebooks[q].at(j, d);
      }
    }
  }

  struct Result {
    Mat<int> indices;                 // [n_q][T]
    Mat<T> zq;                        // [D][T]
    std::vector<Mat<T>> stage_inputs; // per stage: [T][D] residual entering it
  };

  // z: [D][T]. Ties in the nearest-codeword search resolve to the lowest
  // index, so results are independent of evaluation order.
  Result quantize(const Mat<T>& z, int n_q, bool keep_inputs = false) const {
    if (n_q < 1 || n_q > n_q_max) throw ConfigError("quantizer stage count out of range");
    if (z.rows != D) throw ConfigError("latent dimension mismatch in quantizer");
    int frames = z.cols;
    Result res;
    res.indices.resize(n_q, frames);
    res.zq.resize(D, frames);
    if (keep_inputs) res.stage_inputs.assign(n_q, Mat<T>(frames, D));

    // Residuals are kept per frame (contiguous D) for the distance scans.
    Mat<T> resid(frames, D);
    for (int d = 0; d < D; ++d)
      for (int t = 0; t < frames; ++t) resid.at(t, d) = z.at(d, t);

    for (int q = 0; q < n_q; ++q) {
      if (keep_inputs) res.stage_inputs[q] = resid;
      const Mat<T>& cb = codebooks[q];
      for (int t = 0; t < frames; ++t) {
        int idx = kernels::nearest_codeword_t<T>(resid.row(t), cb.data(), K, D);
        res.indices.at(q, t) = idx;
        const T* cw = cb.row(idx);
        T* r = resid.row(t);
        for (int d = 0; d < D; ++d) {
          res.zq.at(d, t) += cw[d];
          r[d] -= cw[d];
        }
      }
    }
    return res;
  }

  // indices: [n_q][T] -> [D][T]
  Mat<T> dequantize(const Mat<int>& indices) const {
    if (indices.rows < 1 || indices.rows > n_q_max)
      throw DataError("bitstream stage count out of range");
    Mat<T> zq(D, indices.cols);
    for (int q = 0; q < indices.rows; ++q) {
      const Mat<T>& cb = codebooks[q];
      for (int t = 0; t < indices.cols; ++t) {
        int idx = indices.at(q, t);
        if (idx < 0 || idx >= K) throw DataError("codeword index out of range");
        const T* cw = cb.row(idx);
        for (int d = 0; d < D; ++d) zq.at(d, t) += cw[d];
      }
    }
    return zq;
  }

  // One EMA step for stage q from one batch worth of assignments. inputs
  // are the residuals that entered the stage ([frames][D], possibly
  // concatenated across samples); idx holds the chosen codeword per frame.
  void ema_update_stage(int q, const Mat<T>& inputs, const std::vector<int>& idx) {
    std::vector<T> batch_n(K, T(0));
    Mat<T> batch_s(K, D);
    for (size_t t = 0; t < idx.size(); ++t) {
      int j = idx[t];
      batch_n[j] += T(1);
      const T* x = inputs.row(int(t));
      T* s = batch_s.row(j);
      for (int d = 0; d < D; ++d) s[d] += x[d];
    }
    for (int j = 0; j < K; ++j) {
      counts[q][j] = decay * counts[q][j] + (T(1) - decay) * batch_n[j];
      T* s = sums[q].row(j);
      const T* bs = batch_s.row(j);
      T* cw = codebooks[q].row(j);
      for (int d = 0; d < D; ++d) {
        s[d] = decay * s[d] + (T(1) - decay) * bs[d];
        cw[d] = s[d] / std::max(counts[q][j], eps);
      }
    }
  }

  // EMA update across all stages of one quantize result.
  void ema_update(const std::vector<Mat<T>>& stage_inputs, const Mat<int>& indices) {
    int n_q = indices.rows, frames = indices.cols;
    std::vector<int> idx(frames);
    for (int q = 0; q < n_q; ++q) {
      for (int t = 0; t < frames; ++t) idx[t] = indices.at(q, t);
      ema_update_stage(q, stage_inputs[q], idx);
    }
  }

  // Re-seeds codes whose EMA usage decayed below the threshold with random
  // vectors from the batch. Returns how many codes were reset.
  int reinit_dead_codes(const std::vector<Mat<T>>& stage_inputs, Rng rng,
                        T threshold = T(0.01), T reset_count = T(1)) {
    int reset = 0;
    for (size_t q = 0; q < stage_inputs.size(); ++q) {
      const Mat<T>& pool = stage_inputs[q];
      if (pool.rows == 0) continue;
      auto r = rng.derive("stage", q);
      for (int j = 0; j < K; ++j) {
        if (counts[q][j] >= threshold) continue;
        const T* x = pool.row(int(r.below(uint64_t(pool.rows))));
        T* cw = codebooks[q].row(j);
        T* s = sums[q].row(j);
        for (int d = 0; d < D; ++d) {
          cw[d] = x[d];
          s[d] = x[d] * reset_count;
        }
        counts[q][j] = reset_count;
        ++reset;
      }
    }
    return reset;
  }
};

// Payload rate of an n_q-stage stream: indices are ceil(log2 K) bits at
// frame_rate frames per second.
inline int bits_per_index(int K) {
  int b = 0;
  while ((1 << b) < K) ++b;
  return b;
}

inline double bits_per_second(int K, int n_q, int frame_rate) {
  return double(bits_per_index(K)) * n_q * frame_rate;
}

}  // namespace spg::codec
