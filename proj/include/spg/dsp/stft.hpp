#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "spg/dsp/fft.hpp"
#include "spg/util/mat.hpp"

namespace spg::dsp {

// Frame-wise magnitude STFT with the exact adjoint needed to push loss
// gradients back to the waveform. No centering: frame f covers
// x[f*hop, f*hop + win). Window is periodic Hann.
template <typename T>
class Stft {
 public:
  Stft(int win, int hop, int nfft) : win_(win), hop_(hop), nfft_(nfft), fft_(nfft) {
    if (hop <= 0 || win <= 0 || hop >= win || win > nfft)
      throw ConfigError("STFT requires 0 < hop < win <= nfft");
    window_.resize(win);
    for (int i = 0; i < win; ++i)
      window_[i] = T(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win));
  }

  int win() const { return win_; }
  int hop() const { return hop_; }
  int nfft() const { return nfft_; }
  int bins() const { return nfft_ / 2 + 1; }
  int num_frames(int len) const { return len < win_ ? 0 : 1 + (len - win_) / hop_; }

  // mag: [frames][bins]; spec (optional): matching complex spectra.
  void magnitudes(const T* x, int len, Mat<T>& mag,
                  std::vector<std::complex<T>>* spec = nullptr) const {
    int frames = num_frames(len);
    mag.resize(frames, bins());
    if (spec) spec->assign(size_t(frames) * bins(), std::complex<T>(0));
    std::vector<std::complex<T>> buf(nfft_);
    for (int f = 0; f < frames; ++f) {
      const T* seg = x + size_t(f) * hop_;
      for (int i = 0; i < win_; ++i) buf[i] = std::complex<T>(seg[i] * window_[i], T(0));
      for (int i = win_; i < nfft_; ++i) buf[i] = std::complex<T>(0);
      fft_.forward(buf.data());
      for (int b = 0; b < bins(); ++b) {
        mag.at(f, b) = std::abs(buf[b]);
        if (spec) (*spec)[size_t(f) * bins() + b] = buf[b];
      }
    }
  }

  // Accumulates dL/dx given dL/dmag and the complex spectra saved by
  // magnitudes(). Bins with zero magnitude get zero gradient.
  void backward_mag(const Mat<T>& dmag, const std::vector<std::complex<T>>& spec, int len,
                    T* dx) const {
    int frames = dmag.rows;
    std::vector<std::complex<T>> buf(nfft_);
    for (int f = 0; f < frames; ++f) {
      for (int i = 0; i < nfft_; ++i) buf[i] = std::complex<T>(0);
      for (int b = 0; b < bins(); ++b) {
        std::complex<T> X = spec[size_t(f) * bins() + b];
        T m = std::abs(X);
        if (m > T(0)) {
          T g = dmag.at(f, b) / m;
          buf[b] = std::complex<T>(g * X.real(), g * X.imag());
        }
      }
      fft_.inverse_unnormalized(buf.data());
      T* out = dx + size_t(f) * hop_;
      int lim = std::min(win_, len - f * hop_);
      for (int i = 0; i < lim; ++i) out[i] += buf[i].real() * window_[i];
    }
  }

 private:
  int win_, hop_, nfft_;
  std::vector<T> window_;
  Fft<T> fft_;
};

}  // namespace spg::dsp
