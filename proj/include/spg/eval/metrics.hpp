#pragma once

#include <cstdint>
#include <vector>

#include "spg/util/mat.hpp"

namespace spg::eval {

// Scale-invariant signal to distortion ratio in dB, clamped to [-60, 60].
// The estimate is projected onto the reference, so global gain changes do
// not count as distortion.
double si_sdr(const float* ref, const float* est, int n);

// Edit distance between two label sequences.
int levenshtein(const std::vector<int>& a, const std::vector<int>& b);

// Collapses consecutive repeats and drops the silence label, turning a
// frame sequence into a phone string.
std::vector<int> collapse_labels(const std::vector<int>& frames, int silence_id = 0);

// Edit distance between collapsed sequences over the collapsed reference
// length. An empty reference with a non-empty hypothesis counts as 1 per
// inserted phone.
double phone_error_rate(const std::vector<int>& ref_frames, const std::vector<int>& hyp_frames,
                        int silence_id = 0);

// Confident-but-wrong recognizer frames on coded audio, restricted to
// non-silent frames the recognizer got right on the clean input. Those
// frames carried recoverable content; confidently flipping them is content
// invention rather than mere degradation.
struct Hallucination {
  int confident_wrong = 0;
  int eligible = 0;
  double rate = 0.0;
};

Hallucination hallucination_stats(const Mat<float>& logits_clean, const Mat<float>& logits_coded,
                                  const std::vector<int>& labels, double confidence = 0.9,
                                  int silence_id = 0);

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b);

// Pearson correlation of pitch tracks over frames voiced in both. Needs a
// minimum of mutually voiced frames to mean anything.
struct PitchCorrelation {
  bool computable = false;
  double r = 0.0;
  int frames = 0;
};

PitchCorrelation pitch_correlation(const std::vector<float>& f0_ref,
                                   const std::vector<float>& f0_est, int min_frames = 10);

// Percentile bootstrap over per-utterance values.
struct Ci {
  double mean = 0.0, lo = 0.0, hi = 0.0;
  int n = 0;
};

Ci bootstrap_mean_ci(const std::vector<double>& values, int resamples = 1000, uint64_t seed = 1);

// Paired bootstrap of mean(a) - mean(b); a and b must be aligned by item.
Ci bootstrap_diff_ci(const std::vector<double>& a, const std::vector<double>& b,
                     int resamples = 1000, uint64_t seed = 1);

}  // namespace spg::eval
