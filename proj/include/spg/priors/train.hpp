#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "spg/priors/prior.hpp"

namespace spg::priors {

struct PriorTrainConfig {
  PriorKind kind = PriorKind::linguistic;
  uint64_t seed = 1;
  int epochs = 8;
  int steps_per_epoch = 150;
  int batch = 16;
  int crop_frames = 40;  // 20 ms label frames per training crop
  double lr = 2e-4;

  // Synthesis of training data (drawn on the fly; the wide speaker range
  // keeps prior robustness from limiting downstream comparisons).
  int min_frames = 30, max_frames = 70;

  // Augmentation (linguistic priors only): pitch re-synthesis, voice
  // re-draw and additive noise, labels unchanged.
  double p_pitch = 0.5, pitch_shift = 0.2;
  double p_redraw = 0.5;
  double p_noise = 0.7, snr_lo = 0.0, snr_hi = 20.0;

  // Masked-prediction (acoustic priors only).
  int mask_min_frames = 2, mask_max_frames = 4;

  // Probe evaluation.
  int probe_utts = 80;
  int probe_steps = 300;

  // Gate thresholds. A prior that fails its gate is saved but flagged, and
  // the trainer refuses to use it.
  double ling_phone_min = 0.80, ling_f0_max = 0.35;
  double ac_f0_min = 0.50, ac_phone_margin = 0.05;
};

PriorTrainConfig prior_train_config_from_json(const nlohmann::json& j);
nlohmann::json prior_train_config_to_json(const PriorTrainConfig& cfg);

struct GateReport {
  double phone_probe_acc = 0.0;
  double f0_probe_acc = 0.0;
  double phone_majority = 0.0;  // constant-prediction baseline for the phone probe
  double task_metric = 0.0;     // clean frame accuracy / masked-prediction error
  bool passed = false;
  std::string detail;

  nlohmann::json to_json() const;
};

// Trains a prior from scratch, probes it, writes the checkpoint (with the
// gate report in its metadata) and returns the report.
GateReport train_prior(const PriorTrainConfig& cfg, const std::string& out_path,
                       std::ostream& log);

// Re-runs probes on a loaded prior (used by tests and the acceptance gate).
GateReport probe_prior(Prior<float>& prior, const PriorTrainConfig& cfg);

}  // namespace spg::priors
