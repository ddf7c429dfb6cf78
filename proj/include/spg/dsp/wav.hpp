#pragma once

#include <string>
#include <vector>

namespace spg::dsp {

// Mono 16-bit PCM only. Samples are scaled to [-1, 1] on read; writes
// clamp, scale by 32767 and round to nearest.
struct WavData {
  int sample_rate = 0;
  std::vector<float> samples;
};

WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const float* x, size_t n, int sample_rate);

}  // namespace spg::dsp
