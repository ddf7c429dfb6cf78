#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "spg/util/errors.hpp"

namespace spg::dsp {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, power-of-two sizes. Twiddles are
// precomputed in double and cast, so results are identical across builds.
template <typename T>
class Fft {
 public:
  explicit Fft(int n) : n_(n) {
    if (!is_pow2(n)) throw ConfigError("FFT size must be a power of two, got " + std::to_string(n));
    rev_.resize(n);
    int lg = 0;
    while ((1 << lg) < n) ++lg;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < lg; ++b) r |= ((i >> b) & 1) << (lg - 1 - b);
      rev_[i] = r;
    }
    tw_.resize(n / 2);
    for (int k = 0; k < n / 2; ++k) {
      double ang = -2.0 * std::numbers::pi * k / n;
      tw_[k] = std::complex<T>(T(std::cos(ang)), T(std::sin(ang)));
    }
  }

  int size() const { return n_; }

  void forward(std::complex<T>* x) const {
    for (int i = 0; i < n_; ++i)
      if (rev_[i] > i) std::swap(x[i], x[rev_[i]]);
    for (int len = 2; len <= n_; len <<= 1) {
      int half = len >> 1, step = n_ / len;
      for (int i = 0; i < n_; i += len) {
        for (int k = 0; k < half; ++k) {
          std::complex<T> u = x[i + k];
          std::complex<T> t = x[i + k + half] * tw_[size_t(k) * step];
          x[i + k] = u + t;
          x[i + k + half] = u - t;
        }
      }
    }
  }

  // Unnormalized inverse: conj(forward(conj(x))). Divide by n for the
  // normalized inverse.
  void inverse_unnormalized(std::complex<T>* x) const {
    for (int i = 0; i < n_; ++i) x[i] = std::conj(x[i]);
    forward(x);
    for (int i = 0; i < n_; ++i) x[i] = std::conj(x[i]);
  }

 private:
  int n_;
  std::vector<int> rev_;
  std::vector<std::complex<T>> tw_;
};

}  // namespace spg::dsp
