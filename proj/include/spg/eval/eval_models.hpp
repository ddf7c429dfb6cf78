#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spg/nn/layers.hpp"
#include "spg/nn/serialize.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

namespace spg::eval {

// Models used only to measure codecs. They are trained once on synthetic
// speech drawn from the wide voice range (a superset of the codec's seen
// and unseen splits) and then frozen, so every codec under test faces the
// same judge. Their architectures deliberately differ from the feature
// extractors the codecs train against.

struct EvalModelConfig {
  uint64_t seed = 404;
  int epochs = 8;
  int steps_per_epoch = 150;
  int batch = 16;
  int crop_frames = 40;
  double lr = 2e-4;
  int min_frames = 30, max_frames = 70;
  double p_pitch = 0.5, pitch_shift = 0.2;
  double p_redraw = 0.5;
  double p_noise = 0.7, snr_lo = 0.0, snr_hi = 20.0;
  int eval_utts = 60;
  double recognizer_min_acc = 0.85;   // clean frame accuracy gate
  int embedder_speakers = 64;
  double embedder_min_acc = 0.80;     // held-out speaker id gate
};

EvalModelConfig eval_model_config_from_json(const nlohmann::json& j);
nlohmann::json eval_model_config_to_json(const EvalModelConfig& c);

// Frame phone recognizer. Waveform [1][n] -> logits [12][n/320].
class Recognizer {
 public:
  explicit Recognizer(uint64_t seed);

  Mat<float> logits(const Mat<float>& x) { return net.forward(x); }
  std::vector<nn::ParamRef<float>> params() {
    std::vector<nn::ParamRef<float>> out;
    net.collect_params("rec", out);
    return out;
  }
  uint64_t seed() const { return seed_; }
  void save(const std::string& path, const nlohmann::json& extra_meta);

  nn::Sequential<float> net;

 private:
  uint64_t seed_;
};

std::unique_ptr<Recognizer> load_recognizer(const std::string& path);

// Utterance-level voice embedding, trained as a closed-set speaker
// classifier; the embedding is the pooled penultimate activation.
class SpeakerEmbedder {
 public:
  SpeakerEmbedder(uint64_t seed, int n_speakers);

  std::vector<float> embed(const Mat<float>& x) {
    Mat<float> e = trunk.forward(x);
    return e.v;
  }
  Mat<float> logits(const Mat<float>& x) { return head.forward(trunk.forward(x)); }
  std::vector<nn::ParamRef<float>> params() {
    std::vector<nn::ParamRef<float>> out;
    trunk.collect_params("trunk", out);
    head.collect_params("head", out);
    return out;
  }
  uint64_t seed() const { return seed_; }
  int n_speakers() const { return n_speakers_; }
  void save(const std::string& path, const nlohmann::json& extra_meta);

  nn::Sequential<float> trunk, head;

 private:
  uint64_t seed_;
  int n_speakers_;
};

std::unique_ptr<SpeakerEmbedder> load_embedder(const std::string& path);

// Both trainers return the held-out accuracy and store it in the
// checkpoint metadata; callers decide whether a miss is fatal.
double train_recognizer(const EvalModelConfig& cfg, const std::string& out_path, std::ostream& log);
double train_embedder(const EvalModelConfig& cfg, const std::string& out_path, std::ostream& log);

}  // namespace spg::eval
