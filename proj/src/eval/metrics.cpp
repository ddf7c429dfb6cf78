#include "spg/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "spg/util/errors.hpp"
#include "spg/util/rng.hpp"

namespace spg::eval {

double si_sdr(const float* ref, const float* est, int n) {
  double dot = 0, ref_sq = 0;
  for (int i = 0; i < n; ++i) {
    dot += double(est[i]) * ref[i];
    ref_sq += double(ref[i]) * ref[i];
  }
  if (ref_sq < 1e-12) return -60.0;
  double alpha = dot / ref_sq;
  double sig = 0, err = 0;
  for (int i = 0; i < n; ++i) {
    double t = alpha * ref[i];
    double e = est[i] - t;
    sig += t * t;
    err += e * e;
  }
  if (sig < 1e-12) return -60.0;  // estimate carries no reference component
  if (err < 1e-12) return 60.0;
  return std::clamp(10.0 * std::log10(sig / err), -60.0, 60.0);
}

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = int(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = int(i);
    for (size_t j = 1; j <= m; ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

std::vector<int> collapse_labels(const std::vector<int>& frames, int silence_id) {
  std::vector<int> out;
  int last = silence_id - 1;
  for (int f : frames) {
    if (f != last && f != silence_id) out.push_back(f);
    last = f;
  }
  return out;
}

double phone_error_rate(const std::vector<int>& ref_frames, const std::vector<int>& hyp_frames,
                        int silence_id) {
  auto ref = collapse_labels(ref_frames, silence_id);
  auto hyp = collapse_labels(hyp_frames, silence_id);
  int dist = levenshtein(ref, hyp);
  if (ref.empty()) return hyp.empty() ? 0.0 : double(hyp.size());
  return double(dist) / double(ref.size());
}

Hallucination hallucination_stats(const Mat<float>& logits_clean, const Mat<float>& logits_coded,
                                  const std::vector<int>& labels, double confidence,
                                  int silence_id) {
  int C = logits_clean.rows;
  int Tn = std::min({logits_clean.cols, logits_coded.cols, int(labels.size())});
  Hallucination h;
  std::vector<double> p(C);
  for (int t = 0; t < Tn; ++t) {
    if (labels[t] == silence_id) continue;
    int best_clean = 0;
    for (int c = 1; c < C; ++c)
      if (logits_clean.at(c, t) > logits_clean.at(best_clean, t)) best_clean = c;
    if (best_clean != labels[t]) continue;
    ++h.eligible;

    double mx = logits_coded.at(0, t);
    for (int c = 1; c < C; ++c) mx = std::max(mx, double(logits_coded.at(c, t)));
    double z = 0;
    int best = 0;
    for (int c = 0; c < C; ++c) {
      p[c] = std::exp(double(logits_coded.at(c, t)) - mx);
      z += p[c];
      if (logits_coded.at(c, t) > logits_coded.at(best, t)) best = c;
    }
    if (best != labels[t] && p[best] / z >= confidence) ++h.confident_wrong;
  }
  h.rate = h.eligible > 0 ? double(h.confident_wrong) / h.eligible : 0.0;
  return h;
}

double cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty()) throw ConfigError("cosine needs equal-length vectors");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += double(a[i]) * b[i];
    na += double(a[i]) * a[i];
    nb += double(b[i]) * b[i];
  }
  double den = std::sqrt(na) * std::sqrt(nb);
  return den > 0 ? dot / den : 0.0;
}

PitchCorrelation pitch_correlation(const std::vector<float>& f0_ref,
                                   const std::vector<float>& f0_est, int min_frames) {
  std::vector<double> x, y;
  size_t n = std::min(f0_ref.size(), f0_est.size());
  for (size_t i = 0; i < n; ++i) {
    if (f0_ref[i] > 0 && f0_est[i] > 0) {
      x.push_back(f0_ref[i]);
      y.push_back(f0_est[i]);
    }
  }
  PitchCorrelation pc;
  pc.frames = int(x.size());
  if (pc.frames < min_frames) return pc;
  double mx = 0, my = 0;
  for (int i = 0; i < pc.frames; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= pc.frames;
  my /= pc.frames;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < pc.frames; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx < 1e-12 || syy < 1e-12) return pc;  // constant track, undefined
  pc.computable = true;
  pc.r = sxy / std::sqrt(sxx * syy);
  return pc;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

Ci percentile_ci(std::vector<double> stats, double mean, int n) {
  std::sort(stats.begin(), stats.end());
  auto at = [&](double q) {
    double pos = q * double(stats.size() - 1);
    size_t lo = size_t(pos);
    size_t hi = std::min(lo + 1, stats.size() - 1);
    double frac = pos - double(lo);
    return stats[lo] * (1 - frac) + stats[hi] * frac;
  };
  Ci ci;
  ci.mean = mean;
  ci.lo = at(0.025);
  ci.hi = at(0.975);
  ci.n = n;
  return ci;
}

}  // namespace

Ci bootstrap_mean_ci(const std::vector<double>& values, int resamples, uint64_t seed) {
  Ci ci;
  ci.mean = mean_of(values);
  ci.n = int(values.size());
  if (values.size() < 2) {
    ci.lo = ci.hi = ci.mean;
    return ci;
  }
  std::vector<double> stats(resamples);
  for (int r = 0; r < resamples; ++r) {
    Rng rng = Rng(seed).derive("resample", uint64_t(r));
    double s = 0;
    for (size_t i = 0; i < values.size(); ++i) s += values[rng.below(values.size())];
    stats[r] = s / double(values.size());
  }
  return percentile_ci(std::move(stats), ci.mean, int(values.size()));
}

Ci bootstrap_diff_ci(const std::vector<double>& a, const std::vector<double>& b, int resamples,
                     uint64_t seed) {
  if (a.size() != b.size()) throw ConfigError("paired bootstrap needs aligned samples");
  std::vector<double> diff(a.size());
  for (size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return bootstrap_mean_ci(diff, resamples, seed);
}

}  // namespace spg::eval
