#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "spg/codec/rvq.hpp"
#include "spg/nn/layers.hpp"
#include "spg/nn/serialize.hpp"
#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

namespace spg::codec {

// Bitrate tiers: with a 1024-entry codebook at 50 latent frames per second,
// each stage contributes exactly 0.5 kbps.
struct Tier {
  std::string name;
  double kbps;
  int n_q;
};

const std::vector<Tier>& tiers();
const Tier& tier_by_name(const std::string& name);  // accepts "1.5kbps" or "1.5"
const Tier& tier_by_n_q(int n_q);

struct CodecConfig {
  int sample_rate = 16000;
  int frame_rate = 50;
  std::vector<int> strides = {2, 4, 5, 8};  // product must be sample_rate / frame_rate
  std::vector<int> channels = {16, 24, 32, 48};  // per downsampling stage input width
  int latent_dim = 64;
  int K = 1024;
  int n_q_max = 24;
  uint64_t seed = 1;

  int hop() const {
    int h = 1;
    for (int s : strides) h *= s;
    return h;
  }
};

// Convolutional encoder/decoder around the residual quantizer. Data layout
// is [1][samples] in, [latent_dim][frames] at the bottleneck.
template <typename T>
class Codec {
 public:
  explicit Codec(const CodecConfig& cfg) : rvq(cfg.K, cfg.latent_dim, cfg.n_q_max), cfg_(cfg) {
    if (cfg.hop() != cfg.sample_rate / cfg.frame_rate)
      throw ConfigError("stride product must equal samples per latent frame");
    if (cfg.channels.size() != cfg.strides.size())
      throw ConfigError("one channel width per stride is required");
    build();
  }

  const CodecConfig& config() const { return cfg_; }

  void init_params(Rng rng) {
    size_t li = 0;
    auto next = [&](const char* tag) { return rng.derive(tag, li++); };
    for (auto* c : enc_convs_) c->init_kaiming(next("enc"));
    for (auto* c : dec_convs_) c->init_kaiming(next("dec"));
    for (auto* c : dec_deconvs_) c->init_kaiming(next("dec_t"));
    rvq.init_random(rng.derive("rvq"));
  }

  // x: [1][n], n a multiple of hop(). Returns [latent_dim][n/hop()].
  Mat<T> encode_latent(const Mat<T>& x) { return encoder.forward(x); }
  Mat<T> decode_latent(const Mat<T>& zq) { return decoder.forward(zq); }

  nn::Sequential<T> encoder, decoder;
  Rvq<T> rvq;

  std::vector<nn::ParamRef<T>> params() {
    std::vector<nn::ParamRef<T>> out;
    encoder.collect_params("enc", out);
    decoder.collect_params("dec", out);
    return out;
  }

  void save(const std::string& path, const nlohmann::json& extra_meta);
  nlohmann::json load_into(const std::string& path);  // config must match

 private:
  void build() {
    auto& ch = cfg_.channels;
    size_t n = cfg_.strides.size();
    enc_convs_.push_back(encoder.template add<nn::Conv1d<T>>(1, ch[0], 7, 1));
    encoder.template add<nn::Activation<T>>(nn::Act::elu);
    for (size_t i = 0; i < n; ++i) {
      int cin = ch[i];
      int cout = i + 1 < n ? ch[i + 1] : cfg_.latent_dim;
      int s = cfg_.strides[i];
      enc_convs_.push_back(encoder.template add<nn::Conv1d<T>>(cin, cout, 2 * s, s));
      encoder.template add<nn::Activation<T>>(nn::Act::elu);
    }
    enc_convs_.push_back(
        encoder.template add<nn::Conv1d<T>>(cfg_.latent_dim, cfg_.latent_dim, 3, 1));

    dec_convs_.push_back(decoder.template add<nn::Conv1d<T>>(cfg_.latent_dim, cfg_.latent_dim, 3, 1));
    decoder.template add<nn::Activation<T>>(nn::Act::elu);
    for (size_t i = n; i-- > 0;) {
      int cin = i + 1 < n ? ch[i + 1] : cfg_.latent_dim;
      int cout = ch[i];
      int s = cfg_.strides[i];
      dec_deconvs_.push_back(decoder.template add<nn::ConvTranspose1d<T>>(cin, cout, 2 * s, s));
      decoder.template add<nn::Activation<T>>(nn::Act::elu);
    }
    dec_convs_.push_back(decoder.template add<nn::Conv1d<T>>(ch[0], 1, 7, 1));
    decoder.template add<nn::Activation<T>>(nn::Act::tanh);
  }

  CodecConfig cfg_;
  std::vector<nn::Conv1d<T>*> enc_convs_;
  std::vector<nn::Conv1d<T>*> dec_convs_;
  std::vector<nn::ConvTranspose1d<T>*> dec_deconvs_;
};

nlohmann::json codec_config_to_json(const CodecConfig& cfg);
CodecConfig codec_config_from_json(const nlohmann::json& j);

// Pads with zeros to a whole number of latent frames.
template <typename T>
Mat<T> to_model_input(const std::vector<float>& samples, int hop) {
  int n = int(samples.size());
  int padded = (n + hop - 1) / hop * hop;
  Mat<T> x(1, padded);
  for (int i = 0; i < n; ++i) x.at(0, i) = T(samples[i]);
  return x;
}

template <typename T>
void codec_save_impl(Codec<T>& c, const std::string& path, const nlohmann::json& extra_meta) {
  auto params = c.params();
  auto blobs = nn::params_to_blobs(params);
  for (int q = 0; q < c.rvq.n_q_max; ++q) {
    nn::TensorBlob cb;
    cb.name = "rvq.codebook." + std::to_string(q);
    cb.dims = {uint32_t(c.rvq.K), uint32_t(c.rvq.D)};
    cb.data.assign(c.rvq.codebooks[q].v.begin(), c.rvq.codebooks[q].v.end());
    blobs.push_back(std::move(cb));
    nn::TensorBlob cn;
    cn.name = "rvq.counts." + std::to_string(q);
    cn.dims = {uint32_t(c.rvq.K)};
    cn.data.assign(c.rvq.counts[q].begin(), c.rvq.counts[q].end());
    blobs.push_back(std::move(cn));
    nn::TensorBlob cs;
    cs.name = "rvq.sums." + std::to_string(q);
    cs.dims = {uint32_t(c.rvq.K), uint32_t(c.rvq.D)};
    cs.data.assign(c.rvq.sums[q].v.begin(), c.rvq.sums[q].v.end());
    blobs.push_back(std::move(cs));
  }
  nlohmann::json meta = extra_meta;
  meta["kind"] = "codec";
  meta["config"] = codec_config_to_json(c.config());
  nn::write_blob_file(path, meta, blobs);
}

template <typename T>
nlohmann::json codec_load_impl(Codec<T>& c, const std::string& path) {
  std::vector<nn::TensorBlob> blobs;
  nlohmann::json meta = nn::read_blob_file(path, blobs);
  if (meta.value("kind", "") != "codec") throw DataError("not a codec checkpoint: " + path);
  auto params = c.params();
  nn::blobs_to_params(blobs, params);
  auto find = [&](const std::string& name) -> const nn::TensorBlob& {
    for (const auto& b : blobs)
      if (b.name == name) return b;
    throw DataError("codec checkpoint is missing " + name);
  };
  for (int q = 0; q < c.rvq.n_q_max; ++q) {
    const auto& cb = find("rvq.codebook." + std::to_string(q));
    const auto& cn = find("rvq.counts." + std::to_string(q));
    const auto& cs = find("rvq.sums." + std::to_string(q));
    if (cb.data.size() != c.rvq.codebooks[q].v.size() || cn.data.size() != c.rvq.counts[q].size())
      throw DataError("codec checkpoint codebook shape mismatch");
    for (size_t i = 0; i < cb.data.size(); ++i) c.rvq.codebooks[q].v[i] = T(cb.data[i]);
    for (size_t i = 0; i < cn.data.size(); ++i) c.rvq.counts[q][i] = T(cn.data[i]);
    for (size_t i = 0; i < cs.data.size(); ++i) c.rvq.sums[q].v[i] = T(cs.data[i]);
  }
  return meta;
}

template <typename T>
void Codec<T>::save(const std::string& path, const nlohmann::json& extra_meta) {
  codec_save_impl(*this, path, extra_meta);
}

template <typename T>
nlohmann::json Codec<T>::load_into(const std::string& path) {
  return codec_load_impl(*this, path);
}

// Loads a codec, constructing it from the stored config.
template <typename T>
std::pair<std::unique_ptr<Codec<T>>, nlohmann::json> load_codec(const std::string& path) {
  std::vector<nn::TensorBlob> blobs;
  nlohmann::json meta = nn::read_blob_file(path, blobs);
  if (meta.value("kind", "") != "codec") throw DataError("not a codec checkpoint: " + path);
  auto codec = std::make_unique<Codec<T>>(codec_config_from_json(meta.at("config")));
  codec->load_into(path);
  return {std::move(codec), meta};
}

}  // namespace spg::codec
