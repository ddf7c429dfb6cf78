#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "spg/corpus/corpus.hpp"
#include "spg/eval/eval_models.hpp"
#include "spg/priors/train.hpp"
#include "spg/trainer/trainer.hpp"

namespace spg::lab {

// One training arm of the experiment matrix. Arms share the trainer template
// (seeds included) so they see identical init and batch order; only the
// semantic-supervision columns below differ.
struct ArmSpec {
  std::string name;
  std::string prior;  // "", "acoustic" or "linguistic"
  bool shuffle = false;
  bool rate_adaptive = true;     // false: train every sample at static_alpha
  double static_alpha = 0.1;
};

ArmSpec arm_spec_from_json(const nlohmann::json& j);
nlohmann::json arm_spec_to_json(const ArmSpec& a);

// Baseline, both prior kinds, the shuffle control and a static-weight sweep.
std::vector<ArmSpec> default_arms();

struct RecipeConfig {
  corpus::CorpusConfig corpus;

  priors::PriorTrainConfig prior;  // template; kind and seed set per prior
  uint64_t linguistic_seed = 101;
  uint64_t acoustic_seed = 202;

  eval::EvalModelConfig eval_models;

  trainer::TrainConfig train;  // template; prior columns set per arm
  std::vector<ArmSpec> arms = default_arms();

  std::vector<std::string> eval_tiers = {"1.5kbps", "3kbps", "6kbps", "12kbps"};
  std::vector<std::string> eval_splits = {"test_seen", "test_unseen"};

  // Noise sweep: one tier, a subset of arms, coder input degraded only.
  std::vector<double> noise_snrs = {20.0, 10.0, 5.0};
  std::string noise_tier = "1.5kbps";
  std::vector<std::string> noise_arms = {"baseline", "linguistic"};
  uint64_t noise_seed = 777;

  int bootstrap_resamples = 1000;
  uint64_t bootstrap_seed = 1;
  int eval_utterances = 0;  // cap per split, 0 keeps every utterance

  // Reference bitstreams written per arm for byte-level reproducibility checks.
  int bitstream_utterances = 4;
};

RecipeConfig recipe_config_from_json(const nlohmann::json& j);
nlohmann::json recipe_config_to_json(const RecipeConfig& cfg);

struct RecipeStatus {
  std::vector<std::string> trained_arms;
  std::vector<std::pair<std::string, std::string>> failed_arms;  // name, error
  int evals_written = 0;
  int evals_skipped = 0;
};

// Runs the whole lab under `root`: corpus, priors, judge models, every arm,
// evaluations and reference bitstreams. Every stage skips work whose artifact
// already exists, so an interrupted run resumes where it stopped. A failing
// arm is recorded and the rest continue.
RecipeStatus run_recipe(const RecipeConfig& cfg, const std::string& root, std::ostream& log);

// Artifact locations under a recipe root.
std::string corpus_dir(const std::string& root);
std::string prior_path(const std::string& root, const std::string& kind);
std::string recognizer_path(const std::string& root);
std::string embedder_path(const std::string& root);
std::string arm_dir(const std::string& root, const std::string& arm);
std::string eval_report_path(const std::string& root, const std::string& arm,
                             const std::string& split, const std::string& tier,
                             const std::string& condition);

}  // namespace spg::lab
