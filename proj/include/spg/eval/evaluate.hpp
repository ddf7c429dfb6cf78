#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "spg/codec/codec.hpp"
#include "spg/corpus/corpus.hpp"
#include "spg/eval/eval_models.hpp"
#include "spg/eval/metrics.hpp"
#include "spg/priors/prior.hpp"

namespace spg::eval {

// Input degradation applied before encoding. The reference side of every
// metric stays clean, so the numbers measure what the coded signal kept of
// the underlying speech.
struct EvalCondition {
  std::string name = "clean";
  double snr_db = std::numeric_limits<double>::quiet_NaN();  // NaN: no noise
  uint64_t noise_seed = 777;
};

EvalCondition snr_condition(double snr_db, uint64_t noise_seed = 777);

struct UttMetrics {
  std::string id;
  double per = 0.0;        // recognizer on coded audio vs reference labels
  double clean_per = 0.0;  // recognizer on the clean input (judge sanity)
  double l1 = 0.0;
  double mr_stft = 0.0;
  double si_sdr = 0.0;
  double speaker_cos = 0.0;
  int hall_confident_wrong = 0;
  int hall_eligible = 0;
  bool pitch_computable = false;
  double pitch_r = 0.0;
  double feat_cos = std::numeric_limits<double>::quiet_NaN();  // probe prior
  double realized_kbps = 0.0;
};

struct TierReport {
  std::string arm, split, condition, tier;
  double kbps_nominal = 0.0;
  int utterances = 0;
  Ci per, l1, mr_stft, si_sdr, speaker_cos, pitch_r, feat_cos, hall_rate;
  double hallucination_pooled = 0.0;  // sum confident-wrong / sum eligible
  double mean_realized_kbps = 0.0;
  std::vector<UttMetrics> per_utt;  // manifest order; pairs across arms
};

// The frozen judges, loaded once and shared across arms. The probe prior is
// optional and only feeds the feature-cosine column.
struct Evaluator {
  std::unique_ptr<Recognizer> recognizer;
  std::unique_ptr<SpeakerEmbedder> embedder;
  std::unique_ptr<priors::Prior<float>> probe_prior;
};

Evaluator load_evaluator(const std::string& recognizer_path, const std::string& embedder_path,
                         const std::string& probe_prior_path = "");

// Codes every entry through the real bitstream at the given tier and
// measures it. Entries must all belong to one split.
TierReport evaluate_tier(codec::Codec<float>& cod, const codec::Tier& tier,
                         const std::string& corpus_dir,
                         const std::vector<corpus::ManifestEntry>& entries, Evaluator& ev,
                         const EvalCondition& cond, int bootstrap_resamples = 1000,
                         uint64_t bootstrap_seed = 1);

nlohmann::json tier_report_to_json(const TierReport& r);
TierReport tier_report_from_json(const nlohmann::json& j);
void write_tier_report(const std::string& path, const TierReport& r);
TierReport read_tier_report(const std::string& path);

}  // namespace spg::eval
