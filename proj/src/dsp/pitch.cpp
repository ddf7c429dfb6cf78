#include "spg/dsp/pitch.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace spg::dsp {

std::vector<float> track_f0(const float* x, int len, const PitchConfig& cfg) {
  std::vector<float> out;
  if (len < cfg.frame) return out;
  int frames = 1 + (len - cfg.frame) / cfg.hop;
  int lag_min = std::max(2, int(cfg.sample_rate / cfg.fmax));
  int lag_max = std::min(cfg.frame / 2, int(cfg.sample_rate / cfg.fmin));
  out.resize(frames, 0.0f);

  std::vector<double> seg(cfg.frame);
  std::vector<double> r(lag_max + 2, 0.0);
  for (int f = 0; f < frames; ++f) {
    const float* p = x + size_t(f) * cfg.hop;
    double mean = 0.0;
    for (int i = 0; i < cfg.frame; ++i) mean += p[i];
    mean /= cfg.frame;
    double energy = 0.0;
    for (int i = 0; i < cfg.frame; ++i) {
      seg[i] = p[i] - mean;
      energy += seg[i] * seg[i];
    }
    if (energy / cfg.frame < cfg.energy_floor) continue;

    // Normalized autocorrelation over the search range (one extra lag on
    // each side for peak interpolation).
    int lo = std::max(2, lag_min - 1);
    for (int lag = lo; lag <= std::min(lag_max + 1, cfg.frame - 1); ++lag) {
      double num = 0.0, e0 = 0.0, e1 = 0.0;
      int n = cfg.frame - lag;
      for (int i = 0; i < n; ++i) {
        num += seg[i] * seg[i + lag];
        e0 += seg[i] * seg[i];
        e1 += seg[i + lag] * seg[i + lag];
      }
      double denom = std::sqrt(e0 * e1);
      r[lag] = denom > 0.0 ? num / denom : 0.0;
    }

    double best_r = 0.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) best_r = std::max(best_r, r[lag]);
    if (best_r < cfg.voicing_threshold) continue;

    // Correlation at 2x/3x the period is nearly as high as at the period
    // itself, so a global argmax drifts to subharmonics. Take the smallest
    // local peak within 10% of the global maximum instead.
    int pick = 0;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] >= 0.9 * best_r && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
        pick = lag;
        break;
      }
    }
    if (pick == 0) continue;

    double lag = pick;
    double a = r[pick - 1], b = r[pick], c = r[pick + 1];
    double denom = a - 2.0 * b + c;
    if (std::abs(denom) > 1e-12) {
      double delta = 0.5 * (a - c) / denom;
      if (delta > -1.0 && delta < 1.0) lag += delta;
    }
    out[f] = float(cfg.sample_rate / lag);
  }
  return out;
}

}  // namespace spg::dsp
