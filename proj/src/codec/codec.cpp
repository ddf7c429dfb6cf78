#include "spg/codec/codec.hpp"

namespace spg::codec {

const std::vector<Tier>& tiers() {
  static const std::vector<Tier> t = {
      {"1.5kbps", 1.5, 3},
      {"3kbps", 3.0, 6},
      {"6kbps", 6.0, 12},
      {"12kbps", 12.0, 24},
  };
  return t;
}

const Tier& tier_by_name(const std::string& name) {
  for (const auto& t : tiers()) {
    if (t.name == name) return t;
    if (t.name.substr(0, t.name.size() - 4) == name) return t;  // bare "1.5"
  }
  throw ConfigError("unknown tier '" + name + "' (expected 1.5kbps, 3kbps, 6kbps or 12kbps)");
}

const Tier& tier_by_n_q(int n_q) {
  for (const auto& t : tiers())
    if (t.n_q == n_q) return t;
  throw ConfigError("no tier with " + std::to_string(n_q) + " quantizer stages");
}

nlohmann::json codec_config_to_json(const CodecConfig& cfg) {
  return {
      {"sample_rate", cfg.sample_rate},
      {"frame_rate", cfg.frame_rate},
      {"strides", cfg.strides},
      {"channels", cfg.channels},
      {"latent_dim", cfg.latent_dim},
      {"K", cfg.K},
      {"n_q_max", cfg.n_q_max},
      {"seed", cfg.seed},
  };
}

CodecConfig codec_config_from_json(const nlohmann::json& j) {
  CodecConfig cfg;
  cfg.sample_rate = j.value("sample_rate", cfg.sample_rate);
  cfg.frame_rate = j.value("frame_rate", cfg.frame_rate);
  if (j.contains("strides")) cfg.strides = j["strides"].get<std::vector<int>>();
  if (j.contains("channels")) cfg.channels = j["channels"].get<std::vector<int>>();
  cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
  cfg.K = j.value("K", cfg.K);
  cfg.n_q_max = j.value("n_q_max", cfg.n_q_max);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

}  // namespace spg::codec
