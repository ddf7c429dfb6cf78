#include "spg/lab/recipe.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "spg/codec/bitstream.hpp"
#include "spg/codec/codec.hpp"
#include "spg/dsp/wav.hpp"
#include "spg/eval/evaluate.hpp"
#include "spg/nn/serialize.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/hash.hpp"

namespace fs = std::filesystem;

namespace spg::lab {

std::string corpus_dir(const std::string& root) { return root + "/corpus"; }
std::string prior_path(const std::string& root, const std::string& kind) {
  return root + "/priors/" + kind + ".spgb";
}
std::string recognizer_path(const std::string& root) {
  return root + "/eval_models/recognizer.spgb";
}
std::string embedder_path(const std::string& root) { return root + "/eval_models/embedder.spgb"; }
std::string arm_dir(const std::string& root, const std::string& arm) {
  return root + "/arms/" + arm;
}
std::string eval_report_path(const std::string& root, const std::string& arm,
                             const std::string& split, const std::string& tier,
                             const std::string& condition) {
  return root + "/eval/" + arm + "/" + split + "_" + tier + "_" + condition + ".json";
}

std::vector<ArmSpec> default_arms() {
  return {
      {"baseline", "", false, true, 0.0},
      {"acoustic", "acoustic", false, true, 0.0},
      {"linguistic", "linguistic", false, true, 0.0},
      {"shuffled", "linguistic", true, true, 0.0},
      {"alpha_0.01", "linguistic", false, false, 0.01},
      {"alpha_0.05", "linguistic", false, false, 0.05},
      {"alpha_0.1", "linguistic", false, false, 0.1},
      {"alpha_0.2", "linguistic", false, false, 0.2},
  };
}

ArmSpec arm_spec_from_json(const nlohmann::json& j) {
  ArmSpec a;
  a.name = j.at("name").get<std::string>();
  a.prior = j.value("prior", a.prior);
  a.shuffle = j.value("shuffle", a.shuffle);
  a.rate_adaptive = j.value("rate_adaptive", a.rate_adaptive);
  a.static_alpha = j.value("static_alpha", a.static_alpha);
  if (a.name.empty() || a.name.find('/') != std::string::npos)
    throw ConfigError("arm names become directory names; '" + a.name + "' does not qualify");
  if (!a.prior.empty() && a.prior != "acoustic" && a.prior != "linguistic")
    throw ConfigError("unknown prior kind for arm " + a.name + ": " + a.prior);
  return a;
}

nlohmann::json arm_spec_to_json(const ArmSpec& a) {
  return {{"name", a.name},
          {"prior", a.prior},
          {"shuffle", a.shuffle},
          {"rate_adaptive", a.rate_adaptive},
          {"static_alpha", a.static_alpha}};
}

RecipeConfig recipe_config_from_json(const nlohmann::json& j) {
  RecipeConfig c;
  if (j.contains("corpus")) c.corpus = corpus::corpus_config_from_json(j.at("corpus"));
  if (j.contains("prior")) c.prior = priors::prior_train_config_from_json(j.at("prior"));
  c.linguistic_seed = j.value("linguistic_seed", c.linguistic_seed);
  c.acoustic_seed = j.value("acoustic_seed", c.acoustic_seed);
  if (j.contains("eval_models"))
    c.eval_models = eval::eval_model_config_from_json(j.at("eval_models"));
  if (j.contains("train")) c.train = trainer::train_config_from_json(j.at("train"));
  if (j.contains("arms")) {
    c.arms.clear();
    for (const auto& a : j.at("arms")) c.arms.push_back(arm_spec_from_json(a));
  }
  if (j.contains("eval_tiers")) c.eval_tiers = j.at("eval_tiers").get<std::vector<std::string>>();
  if (j.contains("eval_splits"))
    c.eval_splits = j.at("eval_splits").get<std::vector<std::string>>();
  if (j.contains("noise_snrs")) c.noise_snrs = j.at("noise_snrs").get<std::vector<double>>();
  c.noise_tier = j.value("noise_tier", c.noise_tier);
  if (j.contains("noise_arms")) c.noise_arms = j.at("noise_arms").get<std::vector<std::string>>();
  c.noise_seed = j.value("noise_seed", c.noise_seed);
  c.bootstrap_resamples = j.value("bootstrap_resamples", c.bootstrap_resamples);
  c.bootstrap_seed = j.value("bootstrap_seed", c.bootstrap_seed);
  c.eval_utterances = j.value("eval_utterances", c.eval_utterances);
  c.bitstream_utterances = j.value("bitstream_utterances", c.bitstream_utterances);
  return c;
}

nlohmann::json recipe_config_to_json(const RecipeConfig& c) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : c.arms) arms.push_back(arm_spec_to_json(a));
  return {{"corpus", corpus::corpus_config_to_json(c.corpus)},
          {"prior", priors::prior_train_config_to_json(c.prior)},
          {"linguistic_seed", c.linguistic_seed},
          {"acoustic_seed", c.acoustic_seed},
          {"eval_models", eval::eval_model_config_to_json(c.eval_models)},
          {"train", trainer::train_config_to_json(c.train)},
          {"arms", arms},
          {"eval_tiers", c.eval_tiers},
          {"eval_splits", c.eval_splits},
          {"noise_snrs", c.noise_snrs},
          {"noise_tier", c.noise_tier},
          {"noise_arms", c.noise_arms},
          {"noise_seed", c.noise_seed},
          {"bootstrap_resamples", c.bootstrap_resamples},
          {"bootstrap_seed", c.bootstrap_seed},
          {"eval_utterances", c.eval_utterances},
          {"bitstream_utterances", c.bitstream_utterances}};
}

namespace {

nlohmann::json checkpoint_meta(const std::string& path) {
  std::vector<nn::TensorBlob> blobs;
  return nn::read_blob_file(path, blobs);
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash " + path);
  Fnv64 h;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) h.update(buf, size_t(in.gcount()));
  return hex64(h.value());
}

// Train-or-load for one prior; returns its gate report as json.
nlohmann::json ensure_prior(const RecipeConfig& cfg, const std::string& root,
                            priors::PriorKind kind, uint64_t seed, std::ostream& log) {
  std::string kind_name = kind == priors::PriorKind::acoustic ? "acoustic" : "linguistic";
  std::string path = prior_path(root, kind_name);
  if (fs::exists(path)) {
    nlohmann::json gate = checkpoint_meta(path).value("gate", nlohmann::json::object());
    log << "[recipe] prior " << kind_name << " already trained (gate passed="
        << gate.value("passed", false) << ")\n";
    return gate;
  }
  priors::PriorTrainConfig pc = cfg.prior;
  pc.kind = kind;
  pc.seed = seed;
  log << "[recipe] training " << kind_name << " prior\n";
  priors::GateReport gr = priors::train_prior(pc, path, log);
  log << "[recipe] prior " << kind_name << " gate " << (gr.passed ? "passed" : "FAILED") << ": "
      << gr.detail << "\n";
  return gr.to_json();
}

std::vector<corpus::ManifestEntry> split_entries(const std::string& cdir,
                                                 const std::string& split, int cap) {
  auto all = corpus::load_manifest(cdir + "/manifest.jsonl");
  auto es = corpus::filter_split(all, split);
  if (cap > 0 && int(es.size()) > cap) es.resize(size_t(cap));
  return es;
}

void write_reference_bitstreams(const RecipeConfig& cfg, const std::string& root,
                                const std::string& arm, codec::Codec<float>& cod,
                                std::ostream& log) {
  if (cfg.bitstream_utterances <= 0) return;
  auto entries = split_entries(corpus_dir(root), "test_seen", cfg.bitstream_utterances);
  std::string dir = root + "/bitstreams/" + arm;
  fs::create_directories(dir);
  int hop = cod.config().hop();
  for (const auto& e : entries) {
    auto wav = dsp::read_wav((fs::path(corpus_dir(root)) / e.wav).string());
    Mat<float> x = codec::to_model_input<float>(wav.samples, hop);
    Mat<float> z = cod.encode_latent(x);
    for (const auto& tname : cfg.eval_tiers) {
      const codec::Tier& t = codec::tier_by_name(tname);
      if (t.n_q > cod.config().n_q_max) continue;
      std::string path = dir + "/" + e.id + "_" + t.name + ".spgc";
      if (fs::exists(path)) continue;
      auto res = cod.rvq.quantize(z, t.n_q);
      codec::BitstreamHeader h;
      h.K = uint32_t(cod.config().K);
      h.n_q = uint16_t(t.n_q);
      h.frame_rate = uint32_t(cod.config().frame_rate);
      h.latent_frames = uint32_t(res.indices.cols);
      h.orig_samples = uint32_t(wav.samples.size());
      // Interrupted runs resume on file presence, so land the file whole.
      codec::write_bitstream_file(path + ".tmp", codec::pack_bitstream(h, res.indices));
      fs::rename(path + ".tmp", path);
    }
  }
  log << "[recipe] reference bitstreams for " << arm << " in place\n";
}

}  // namespace

RecipeStatus run_recipe(const RecipeConfig& cfg, const std::string& root, std::ostream& log) {
  RecipeStatus status;
  fs::create_directories(fs::path(root) / "priors");
  fs::create_directories(fs::path(root) / "eval_models");
  fs::create_directories(fs::path(root) / "arms");
  fs::create_directories(fs::path(root) / "eval");

  std::string cdir = corpus_dir(root);
  if (!fs::exists(fs::path(cdir) / "manifest.jsonl")) {
    log << "[recipe] building corpus\n";
    corpus::build_corpus(cfg.corpus, cdir);
  } else {
    log << "[recipe] corpus already built\n";
  }

  nlohmann::json gates;
  gates["linguistic"] =
      ensure_prior(cfg, root, priors::PriorKind::linguistic, cfg.linguistic_seed, log);
  gates["acoustic"] =
      ensure_prior(cfg, root, priors::PriorKind::acoustic, cfg.acoustic_seed, log);

  std::string rec_path = recognizer_path(root);
  if (!fs::exists(rec_path)) {
    log << "[recipe] training phone recognizer\n";
    double acc = eval::train_recognizer(cfg.eval_models, rec_path, log);
    log << "[recipe] recognizer held-out accuracy " << acc
        << (acc >= cfg.eval_models.recognizer_min_acc ? "" : " (BELOW GATE)") << "\n";
  }
  std::string emb_path = embedder_path(root);
  if (!fs::exists(emb_path)) {
    log << "[recipe] training speaker embedder\n";
    double acc = eval::train_embedder(cfg.eval_models, emb_path, log);
    log << "[recipe] embedder held-out accuracy " << acc
        << (acc >= cfg.eval_models.embedder_min_acc ? "" : " (BELOW GATE)") << "\n";
  }

  for (const auto& arm : cfg.arms) {
    trainer::TrainConfig t = cfg.train;
    t.prior_path = arm.prior.empty() ? "" : prior_path(root, arm.prior);
    t.shuffle_semantic_target = arm.shuffle;
    if (!arm.rate_adaptive) {
      t.alpha.rate_adaptive = false;
      t.alpha.static_alpha = arm.static_alpha;
    }
    try {
      log << "[recipe] arm " << arm.name << "\n";
      auto stats = trainer::train_codec(t, cdir, arm_dir(root, arm.name), log);
      log << "[recipe] arm " << arm.name << (stats.already_complete ? " already" : "")
          << " complete after " << stats.epochs << " epochs\n";
      status.trained_arms.push_back(arm.name);
    } catch (const std::exception& ex) {
      log << "[recipe] arm " << arm.name << " FAILED: " << ex.what() << "\n";
      status.failed_arms.emplace_back(arm.name, ex.what());
    }
  }

  // Judges load once; the linguistic prior doubles as the feature probe so
  // the shuffle control has a feature-space column.
  std::string probe = fs::exists(prior_path(root, "linguistic")) ? prior_path(root, "linguistic")
                                                                 : std::string();
  eval::Evaluator judges = eval::load_evaluator(rec_path, emb_path, probe);

  for (const auto& arm_name : status.trained_arms) {
    std::string final_path = arm_dir(root, arm_name) + "/codec_final.spgb";
    auto [cod, meta] = codec::load_codec<float>(final_path);
    fs::create_directories(fs::path(root) / "eval" / arm_name);

    auto run_one = [&](const std::string& split, const codec::Tier& tier,
                       const eval::EvalCondition& cond) {
      std::string out = eval_report_path(root, arm_name, split, tier.name, cond.name);
      if (fs::exists(out)) {
        ++status.evals_skipped;
        return;
      }
      auto entries = split_entries(cdir, split, cfg.eval_utterances);
      auto rep = eval::evaluate_tier(*cod, tier, cdir, entries, judges, cond,
                                     cfg.bootstrap_resamples, cfg.bootstrap_seed);
      rep.arm = arm_name;
      eval::write_tier_report(out, rep);
      ++status.evals_written;
      log << "[recipe] eval " << arm_name << " " << split << " " << tier.name << " " << cond.name
          << ": PER " << rep.per.mean << ", L1 " << rep.l1.mean << "\n";
    };

    for (const auto& split : cfg.eval_splits)
      for (const auto& tname : cfg.eval_tiers) {
        const codec::Tier& tier = codec::tier_by_name(tname);
        if (tier.n_q > cod->config().n_q_max) continue;
        run_one(split, tier, eval::EvalCondition{});
      }

    bool in_noise_set = false;
    for (const auto& n : cfg.noise_arms) in_noise_set |= (n == arm_name);
    if (in_noise_set) {
      const codec::Tier& tier = codec::tier_by_name(cfg.noise_tier);
      for (double snr : cfg.noise_snrs)
        run_one("test_seen", tier, eval::snr_condition(snr, cfg.noise_seed));
    }

    write_reference_bitstreams(cfg, root, arm_name, *cod, log);
  }

  nlohmann::json prov;
  prov["schema"] = 1;
  prov["recipe"] = recipe_config_to_json(cfg);
  prov["recipe_hash"] = hex64(fnv64(prov["recipe"].dump()));
  prov["prior_gates"] = gates;
  prov["recognizer"] = checkpoint_meta(rec_path);
  prov["embedder"] = checkpoint_meta(emb_path);
  prov["trained_arms"] = status.trained_arms;
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& [name, err] : status.failed_arms)
    failures.push_back({{"arm", name}, {"error", err}});
  prov["failed_arms"] = failures;
  nlohmann::json digests;
  digests["priors/linguistic.spgb"] = file_digest(prior_path(root, "linguistic"));
  digests["priors/acoustic.spgb"] = file_digest(prior_path(root, "acoustic"));
  digests["eval_models/recognizer.spgb"] = file_digest(rec_path);
  digests["eval_models/embedder.spgb"] = file_digest(emb_path);
  for (const auto& arm_name : status.trained_arms)
    digests["arms/" + arm_name + "/codec_final.spgb"] =
        file_digest(arm_dir(root, arm_name) + "/codec_final.spgb");
  prov["artifact_digests"] = digests;
  {
    std::string tmp = root + "/provenance.json.tmp";
    std::ofstream out(tmp, std::ios::trunc);
    out << prov.dump(1) << "\n";
    out.close();
    fs::rename(tmp, root + "/provenance.json");
  }
  log << "[recipe] done: " << status.trained_arms.size() << " arms trained, "
      << status.evals_written << " evaluations written, " << status.evals_skipped
      << " reused\n";
  return status;
}

}  // namespace spg::lab
