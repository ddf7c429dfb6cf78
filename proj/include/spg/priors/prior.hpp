#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "spg/nn/layers.hpp"
#include "spg/nn/serialize.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

namespace spg::priors {

// Feature extractors that stand in for "what matters" in the signal.
//   acoustic:   trained to predict log-mel frames behind masked spans, so
//               its features keep spectral and speaker detail.
//   linguistic: trained to classify phones under pitch, voice and noise
//               augmentation, so its features drop speaker detail.
//   external:   features precomputed elsewhere (loaded from files);
//               target/evaluation side only since it has no gradients.
enum class PriorKind { acoustic, linguistic, external };

PriorKind prior_kind_from_string(const std::string& s);
std::string to_string(PriorKind k);

constexpr int kFeatureDim = 48;
constexpr int kMelBands = 40;

// Waveform [1][n] -> features [kFeatureDim][n/320] plus a task head used
// only during prior training. The trunk output is the feature map the
// semantic loss consumes.
template <typename T>
class Prior {
 public:
  Prior(PriorKind kind, uint64_t seed) : kind_(kind), seed_(seed) {
    if (kind == PriorKind::external)
      throw ConfigError("external priors load features from files, not a network");
    build();
    init();
  }

  PriorKind kind() const { return kind_; }
  uint64_t seed() const { return seed_; }

  Mat<T> features(const Mat<T>& x) { return trunk.forward(x); }
  // dL/dx for the most recent features() call. Parameter gradients inside
  // the prior are accumulated but never applied once the prior is frozen.
  Mat<T> features_backward(const Mat<T>& dfeat) { return trunk.backward(dfeat); }

  Mat<T> head_forward(const Mat<T>& feat) { return head.forward(feat); }
  Mat<T> head_backward(const Mat<T>& dout) { return head.backward(dout); }

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    trunk.collect_params("trunk", out);
    head.collect_params("head", out);
    return out;
  }

  void save(const std::string& path, const nlohmann::json& extra_meta) {
    nlohmann::json meta = extra_meta;
    meta["kind"] = "prior";
    meta["prior_kind"] = to_string(kind_);
    meta["seed"] = seed_;
    auto p = params();
    nn::write_blob_file(path, meta, nn::params_to_blobs(p));
  }

  nn::Sequential<T> trunk, head;

 private:
  void build() {
    auto add_conv = [&](nn::Sequential<T>& net, int cin, int cout, int k, int s) {
      convs_.push_back(net.template add<nn::Conv1d<T>>(cin, cout, k, s));
    };
    // Strides multiply to 320 so feature frames line up with label frames.
    add_conv(trunk, 1, 16, 8, 4);
    trunk.template add<nn::Activation<T>>(nn::Act::elu);
    add_conv(trunk, 16, 24, 8, 4);
    trunk.template add<nn::Activation<T>>(nn::Act::elu);
    add_conv(trunk, 24, 32, 10, 5);
    trunk.template add<nn::Activation<T>>(nn::Act::elu);
    add_conv(trunk, 32, 48, 8, 4);
    trunk.template add<nn::Activation<T>>(nn::Act::elu);
    add_conv(trunk, 48, 48, 3, 1);
    if (kind_ == PriorKind::linguistic) {
      // One more context block: the trunk ends right before the classifier.
      trunk.template add<nn::Activation<T>>(nn::Act::elu);
      add_conv(trunk, 48, kFeatureDim, 3, 1);
      head.template add<nn::Activation<T>>(nn::Act::elu);
      add_conv(head, kFeatureDim, 12, 1, 1);
    } else {
      // Features come from the middle context block; the rest of the
      // context stack lives in the head.
      head.template add<nn::Activation<T>>(nn::Act::elu);
      add_conv(head, kFeatureDim, 48, 3, 1);
      head.template add<nn::Activation<T>>(nn::Act::elu);
      add_conv(head, 48, kMelBands, 3, 1);
    }
  }

  void init() {
    Rng rng(seed_);
    for (size_t i = 0; i < convs_.size(); ++i) convs_[i]->init_kaiming(rng.derive("conv", i));
  }

  PriorKind kind_;
  uint64_t seed_;
  std::vector<nn::Conv1d<T>*> convs_;
};

template <typename T>
std::unique_ptr<Prior<T>> load_prior(const std::string& path) {
  std::vector<nn::TensorBlob> blobs;
  nlohmann::json meta = nn::read_blob_file(path, blobs);
  if (meta.value("kind", "") != "prior") throw DataError("not a prior checkpoint: " + path);
  auto prior = std::make_unique<Prior<T>>(prior_kind_from_string(meta.at("prior_kind")),
                                          meta.at("seed").get<uint64_t>());
  auto params = prior->params();
  nn::blobs_to_params(blobs, params);
  return prior;
}

// Precomputed features: a directory of checkpoint-container files named
// <utterance-id>.spgb, each holding one tensor "features" of shape
// [kFeatureDim][frames].
class ExternalFeatures {
 public:
  explicit ExternalFeatures(const std::string& dir) : dir_(dir) {}
  Mat<float> features_for(const std::string& utt_id) const;
  static void write_features(const std::string& dir, const std::string& utt_id,
                             const Mat<float>& feats);

 private:
  std::string dir_;
};

}  // namespace spg::priors
