#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "spg/dsp/stft.hpp"
#include "spg/util/mat.hpp"

namespace spg::losses {

// Mean absolute error over the waveform. If grad is given, dL/dxhat is
// accumulated into it.
template <typename T>
T l1_loss(const T* x, const T* xhat, int n, T* grad = nullptr) {
  T s = T(0);
  T inv = T(1) / T(n);
  for (int i = 0; i < n; ++i) {
    T d = xhat[i] - x[i];
    s += std::abs(d);
    if (grad) grad[i] += (d > T(0) ? inv : (d < T(0) ? -inv : T(0)));
  }
  return s * inv;
}

struct StftResolution {
  int win, hop, nfft;
};

struct MrStftConfig {
  std::vector<StftResolution> resolutions = {{512, 128, 512}, {1024, 256, 1024}, {2048, 512, 2048}};
  double eps = 1e-5;
};

// Multi-resolution spectral loss: per resolution, L1 between floored
// log-magnitudes plus spectral convergence (Frobenius distance of the
// magnitudes over the Frobenius norm of the reference); the total is the
// mean over resolutions that fit the signal.
template <typename T>
class MrStftLoss {
 public:
  explicit MrStftLoss(const MrStftConfig& cfg = {}) : cfg_(cfg) {
    for (const auto& r : cfg_.resolutions)
      stfts_.push_back(std::make_unique<dsp::Stft<T>>(r.win, r.hop, r.nfft));
  }

  const MrStftConfig& config() const { return cfg_; }

  // Accumulates dL/dxhat into grad when given. x and xhat share length n.
  T compute(const T* x, const T* xhat, int n, T* grad = nullptr) const {
    T eps = T(cfg_.eps);
    int used = 0;
    for (const auto& stft : stfts_)
      if (stft->num_frames(n) > 0) ++used;
    if (used == 0) return T(0);
    T inv_used = T(1) / T(used);

    T total = T(0);
    for (const auto& stft : stfts_) {
      int frames = stft->num_frames(n);
      if (frames == 0) continue;
      Mat<T> mag_x, mag_y;
      std::vector<std::complex<T>> spec_y;
      stft->magnitudes(x, n, mag_x);
      stft->magnitudes(xhat, n, mag_y, grad ? &spec_y : nullptr);

      size_t numel = mag_x.v.size();
      T log_l1 = T(0);
      T diff_sq = T(0), ref_sq = T(0);
      for (size_t i = 0; i < numel; ++i) {
        T lx = std::log(std::max(mag_x.v[i], eps));
        T ly = std::log(std::max(mag_y.v[i], eps));
        log_l1 += std::abs(ly - lx);
        T d = mag_x.v[i] - mag_y.v[i];
        diff_sq += d * d;
        ref_sq += mag_x.v[i] * mag_x.v[i];
      }
      log_l1 /= T(numel);
      T diff_norm = std::sqrt(diff_sq);
      T sc_den = std::sqrt(ref_sq) + eps;
      total += (log_l1 + diff_norm / sc_den) * inv_used;

      if (grad) {
        Mat<T> dmag(mag_y.rows, mag_y.cols);
        T inv_numel = T(1) / T(numel);
        for (size_t i = 0; i < numel; ++i) {
          T lx = std::log(std::max(mag_x.v[i], eps));
          T ly = std::log(std::max(mag_y.v[i], eps));
          T g = T(0);
          if (mag_y.v[i] > eps) {
            T sgn = ly > lx ? T(1) : (ly < lx ? T(-1) : T(0));
            g += sgn * inv_numel / mag_y.v[i];
          }
          if (diff_norm > T(0)) g += (mag_y.v[i] - mag_x.v[i]) / (diff_norm * sc_den);
          dmag.v[i] = g * inv_used;
        }
        stft->backward_mag(dmag, spec_y, n, grad);
      }
    }
    return total;
  }

 private:
  MrStftConfig cfg_;
  std::vector<std::unique_ptr<dsp::Stft<T>>> stfts_;
};

}  // namespace spg::losses
