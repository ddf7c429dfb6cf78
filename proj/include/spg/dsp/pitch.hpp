#pragma once

#include <vector>

namespace spg::dsp {

// Autocorrelation F0 tracker. Returns one value per hop-spaced frame;
// 0 marks unvoiced frames. Search range is 70..400 Hz.
struct PitchConfig {
  int sample_rate = 16000;
  int frame = 640;
  int hop = 320;
  double fmin = 70.0;
  double fmax = 400.0;
  double voicing_threshold = 0.5;
  double energy_floor = 1e-5;
};

std::vector<float> track_f0(const float* x, int len, const PitchConfig& cfg = {});

}  // namespace spg::dsp
