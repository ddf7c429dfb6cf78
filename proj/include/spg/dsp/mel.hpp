#pragma once

#include <cmath>
#include <vector>

#include "spg/dsp/stft.hpp"
#include "spg/util/mat.hpp"

namespace spg::dsp {

// Log-mel features on a reflect-padded signal. Padding is sized so that a
// signal of N*hop samples yields exactly N frames, which keeps feature
// frames aligned with label frames.
template <typename T>
class MelExtractor {
 public:
  MelExtractor(int sample_rate, int n_mels, int win = 512, int hop = 320)
      : sr_(sample_rate), n_mels_(n_mels), stft_(win, hop, win) {
    double fmin = 50.0, fmax = sample_rate / 2.0 - 400.0;
    int bins = stft_.bins();
    auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    std::vector<double> edges(size_t(n_mels) + 2);
    double m0 = hz_to_mel(fmin), m1 = hz_to_mel(fmax);
    for (int i = 0; i < n_mels + 2; ++i)
      edges[i] = mel_to_hz(m0 + (m1 - m0) * i / (n_mels + 1));
    filters_.resize(n_mels, bins);
    filters_.fill(T(0));
    for (int m = 0; m < n_mels; ++m) {
      double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
      for (int b = 0; b < bins; ++b) {
        double f = double(b) * sample_rate / stft_.nfft();
        double w = 0.0;
        if (f > lo && f < mid) w = (f - lo) / (mid - lo);
        else if (f >= mid && f < hi) w = (hi - f) / (hi - mid);
        filters_.at(m, b) = T(w);
      }
    }
  }

  int n_mels() const { return n_mels_; }
  int hop() const { return stft_.hop(); }

  // Returns [n_mels][frames] with frames = len / hop for aligned lengths.
  Mat<T> compute(const T* x, int len) const {
    int pad = (stft_.win() - stft_.hop()) / 2;
    if (len <= pad) throw DataError("signal too short for mel analysis");
    std::vector<T> padded(size_t(len) + 2 * pad);
    for (int i = 0; i < pad; ++i) padded[i] = x[pad - i];
    for (int i = 0; i < len; ++i) padded[size_t(pad) + i] = x[i];
    for (int i = 0; i < pad; ++i) padded[size_t(pad) + len + i] = x[len - 2 - i];
    Mat<T> mag;
    stft_.magnitudes(padded.data(), int(padded.size()), mag);
    Mat<T> out(n_mels_, mag.rows);
    for (int f = 0; f < mag.rows; ++f) {
      for (int m = 0; m < n_mels_; ++m) {
        T acc = T(0);
        const T* fr = filters_.row(m);
        const T* mg = mag.row(f);
        for (int b = 0; b < filters_.cols; ++b) acc += fr[b] * mg[b] * mg[b];
        out.at(m, f) = std::log(acc + T(1e-10));
      }
    }
    return out;
  }

 private:
  int sr_, n_mels_;
  Stft<T> stft_;
  Mat<T> filters_;
};

}  // namespace spg::dsp
