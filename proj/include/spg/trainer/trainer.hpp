#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spg/codec/codec.hpp"
#include "spg/regulation/regulation.hpp"

namespace spg::trainer {

// End-to-end codec training. Deterministic given the config: data order,
// crops, tier draws and codebook reseeds are all derived from (seed, step),
// so two runs with the same config produce bit-identical checkpoints and an
// interrupted run resumed from its rolling checkpoint does too. Arms of a
// comparison that share a seed see identical batches.
struct TrainConfig {
  uint64_t seed = 1;
  int epochs = 30;
  int batch = 16;
  int crop_frames = 30;      // latent frames per training crop
  double lr = 2e-4;
  double lr_min_frac = 0.1;  // cosine floor, as a fraction of lr
  codec::CodecConfig codec;
  regulation::AlphaSchedule alpha;
  regulation::LossWeights weights;
  // Tiers sampled per training example, one uniform draw each.
  std::vector<std::string> tier_names = {"1.5kbps", "3kbps", "6kbps", "12kbps"};

  // Semantic supervision. Empty prior_path disables the term. external_dir
  // switches the target side to precomputed per-utterance features; the
  // prior network still provides the prediction side.
  std::string prior_path;
  bool shuffle_semantic_target = false;  // mismatched-target control arm
  std::string external_dir;
  bool ignore_prior_gate = false;

  int checkpoint_every = 5;  // epochs between rolling checkpoints
  int log_every = 25;        // steps between csv rows
  uint64_t disc_seed = 9000; // critic init; used only when weights.adv > 0
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

struct TrainStats {
  long steps = 0;
  int epochs = 0;
  regulation::LossTerms last;  // batch means at the final step
  double last_total = 0.0;
  long dead_resets = 0;
  bool resumed = false;
  bool already_complete = false;
  std::string checkpoint_path;  // the frozen final checkpoint
};

// Trains a codec on the train split of the corpus at corpus_dir, writing
// into out_dir: codec_last.spgb + optim_last.spgb (rolling, resumable),
// train_log.csv (appended on resume) and codec_final.spgb on completion.
// If codec_final.spgb already exists the run returns immediately.
// max_epochs_this_call > 0 stops after that many epochs of work (saving a
// rolling checkpoint), leaving the rest to a later resume.
TrainStats train_codec(const TrainConfig& cfg, const std::string& corpus_dir,
                       const std::string& out_dir, std::ostream& log,
                       int max_epochs_this_call = 0);

}  // namespace spg::trainer
