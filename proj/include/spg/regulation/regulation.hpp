#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "spg/util/errors.hpp"

namespace spg::regulation {

// Weight schedule for the semantic-consistency term. Rate-adaptive mode
// leans on the prior where the waveform losses are starved of bits and
// backs off once the bitrate can carry the detail on its own; static mode
// applies one weight everywhere (used for the sweep arms).
struct AlphaSchedule {
  bool rate_adaptive = true;
  double static_alpha = 0.1;     // used when rate_adaptive is false
  double low_rate_alpha = 0.1;   // below boundary_kbps
  double high_rate_alpha = 0.01; // at or above boundary_kbps
  double boundary_kbps = 6.0;
};

inline double alpha_for_bitrate(const AlphaSchedule& s, double kbps) {
  if (!s.rate_adaptive) return s.static_alpha;
  return kbps < s.boundary_kbps ? s.low_rate_alpha : s.high_rate_alpha;
}

inline AlphaSchedule alpha_schedule_from_json(const nlohmann::json& j) {
  AlphaSchedule s;
  s.rate_adaptive = j.value("rate_adaptive", s.rate_adaptive);
  s.static_alpha = j.value("static_alpha", s.static_alpha);
  s.low_rate_alpha = j.value("low_rate_alpha", s.low_rate_alpha);
  s.high_rate_alpha = j.value("high_rate_alpha", s.high_rate_alpha);
  s.boundary_kbps = j.value("boundary_kbps", s.boundary_kbps);
  return s;
}

inline nlohmann::json alpha_schedule_to_json(const AlphaSchedule& s) {
  return {{"rate_adaptive", s.rate_adaptive},
          {"static_alpha", s.static_alpha},
          {"low_rate_alpha", s.low_rate_alpha},
          {"high_rate_alpha", s.high_rate_alpha},
          {"boundary_kbps", s.boundary_kbps}};
}

// Fixed weights for the non-semantic terms of the training objective.
struct LossWeights {
  double l1 = 1.0;
  double mr_stft = 1.0;
  double commit = 0.25;
  double adv = 0.0;  // adversarial term off by default
};

inline LossWeights loss_weights_from_json(const nlohmann::json& j) {
  LossWeights w;
  w.l1 = j.value("l1", w.l1);
  w.mr_stft = j.value("mr_stft", w.mr_stft);
  w.commit = j.value("commit", w.commit);
  w.adv = j.value("adv", w.adv);
  return w;
}

inline nlohmann::json loss_weights_to_json(const LossWeights& w) {
  return {{"l1", w.l1}, {"mr_stft", w.mr_stft}, {"commit", w.commit}, {"adv", w.adv}};
}

// Unweighted per-batch loss values plus the semantic weight that applied
// to the batch (per-sample weights are averaged in by the caller).
struct LossTerms {
  double l1 = 0.0;
  double mr_stft = 0.0;
  double commit = 0.0;
  double semantic = 0.0;
  double adv = 0.0;
  double alpha = 0.0;
};

inline double total_loss(const LossTerms& t, const LossWeights& w) {
  return w.l1 * t.l1 + w.mr_stft * t.mr_stft + w.commit * t.commit +
         t.alpha * t.semantic + w.adv * t.adv;
}

// Aborts training on the first non-finite term rather than letting NaNs
// silently poison the EMA codebooks and optimizer state.
inline void check_finite(const LossTerms& t, long step) {
  auto bad = [&](double v, const char* name) {
    if (std::isfinite(v)) return;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "non-finite %s loss at step %ld", name, step);
    throw TrainingAbort(buf);
  };
  bad(t.l1, "l1");
  bad(t.mr_stft, "mr_stft");
  bad(t.commit, "commit");
  bad(t.semantic, "semantic");
  bad(t.adv, "adv");
}

}  // namespace spg::regulation
