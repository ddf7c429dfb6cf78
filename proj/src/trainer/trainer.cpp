#include "spg/trainer/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <utility>

#include "spg/corpus/corpus.hpp"
#include "spg/dsp/wav.hpp"
#include "spg/losses/adversarial.hpp"
#include "spg/losses/recon.hpp"
#include "spg/nn/adam.hpp"
#include "spg/nn/serialize.hpp"
#include "spg/priors/prior.hpp"
#include "spg/priors/semantic.hpp"
#include "spg/util/errors.hpp"

namespace fs = std::filesystem;

namespace spg::trainer {

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.seed = j.value("seed", c.seed);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.crop_frames = j.value("crop_frames", c.crop_frames);
  c.lr = j.value("lr", c.lr);
  c.lr_min_frac = j.value("lr_min_frac", c.lr_min_frac);
  if (j.contains("codec")) c.codec = codec::codec_config_from_json(j.at("codec"));
  if (j.contains("alpha")) c.alpha = regulation::alpha_schedule_from_json(j.at("alpha"));
  if (j.contains("weights")) c.weights = regulation::loss_weights_from_json(j.at("weights"));
  if (j.contains("tiers")) c.tier_names = j.at("tiers").get<std::vector<std::string>>();
  c.prior_path = j.value("prior_path", c.prior_path);
  c.shuffle_semantic_target = j.value("shuffle_semantic_target", c.shuffle_semantic_target);
  c.external_dir = j.value("external_dir", c.external_dir);
  c.ignore_prior_gate = j.value("ignore_prior_gate", c.ignore_prior_gate);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.log_every = j.value("log_every", c.log_every);
  c.disc_seed = j.value("disc_seed", c.disc_seed);
  return c;
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"seed", c.seed},
          {"epochs", c.epochs},
          {"batch", c.batch},
          {"crop_frames", c.crop_frames},
          {"lr", c.lr},
          {"lr_min_frac", c.lr_min_frac},
          {"codec", codec::codec_config_to_json(c.codec)},
          {"alpha", regulation::alpha_schedule_to_json(c.alpha)},
          {"weights", regulation::loss_weights_to_json(c.weights)},
          {"tiers", c.tier_names},
          {"prior_path", c.prior_path},
          {"shuffle_semantic_target", c.shuffle_semantic_target},
          {"external_dir", c.external_dir},
          {"ignore_prior_gate", c.ignore_prior_gate},
          {"checkpoint_every", c.checkpoint_every},
          {"log_every", c.log_every},
          {"disc_seed", c.disc_seed}};
}

namespace {

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::vector<nn::TensorBlob> blobs;
  return nn::read_blob_file(path, blobs);
}

Mat<float> slice_cols(const Mat<float>& m, int off, int len, const std::string& what) {
  if (off < 0 || off + len > m.cols)
    throw DataError(what + ": have " + std::to_string(m.cols) + " frames, need [" +
                    std::to_string(off) + ", " + std::to_string(off + len) + ")");
  Mat<float> out(m.rows, len);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < len; ++c) out.at(r, c) = m.at(r, off + c);
  return out;
}

// Per-stage assignment pool collected over one batch, the input to both the
// EMA update and the dead-code reseed.
struct StagePool {
  std::vector<float> rows;  // frames * D, row-major
  std::vector<int> idx;
};

struct OptimState {
  std::unique_ptr<nn::Adam<float>> adam;
  std::vector<nn::ParamRef<float>> params;
};

void save_optimizer(const std::string& path, long step, OptimState& codec_opt,
                    OptimState* disc_opt) {
  std::vector<nn::TensorBlob> blobs;
  auto push_slots = [&](const char* prefix, OptimState& o) {
    for (size_t i = 0; i < o.params.size(); ++i) {
      nn::TensorBlob m, v;
      m.name = std::string(prefix) + ".m." + o.params[i].name;
      m.dims = {uint32_t(o.adam->slot_m(i).size())};
      m.data.assign(o.adam->slot_m(i).begin(), o.adam->slot_m(i).end());
      v.name = std::string(prefix) + ".v." + o.params[i].name;
      v.dims = {uint32_t(o.adam->slot_v(i).size())};
      v.data.assign(o.adam->slot_v(i).begin(), o.adam->slot_v(i).end());
      blobs.push_back(std::move(m));
      blobs.push_back(std::move(v));
    }
  };
  push_slots("adam", codec_opt);
  nlohmann::json meta = {{"kind", "optim"}, {"step", step}, {"adam_steps", codec_opt.adam->steps()}};
  if (disc_opt) {
    push_slots("disc_adam", *disc_opt);
    for (const auto& p : disc_opt->params) {
      nn::TensorBlob b;
      b.name = "disc_param." + p.name;
      b.dims = {uint32_t(p.w->size())};
      b.data.assign(p.w->begin(), p.w->end());
      blobs.push_back(std::move(b));
    }
    meta["disc_adam_steps"] = disc_opt->adam->steps();
  }
  nn::write_blob_file(path, meta, blobs);
}

void load_optimizer(const std::string& path, long expect_step, OptimState& codec_opt,
                    OptimState* disc_opt) {
  std::vector<nn::TensorBlob> blobs;
  nlohmann::json meta = nn::read_blob_file(path, blobs);
  if (meta.value("kind", "") != "optim") throw DataError("not an optimizer checkpoint: " + path);
  if (meta.value("step", -1L) != expect_step)
    throw DataError("rolling checkpoint pair is inconsistent; delete the run directory to restart");
  auto find = [&](const std::string& name) -> const nn::TensorBlob& {
    for (const auto& b : blobs)
      if (b.name == name) return b;
    throw DataError("optimizer checkpoint is missing " + name);
  };
  auto pull_slots = [&](const char* prefix, OptimState& o) {
    for (size_t i = 0; i < o.params.size(); ++i) {
      const auto& m = find(std::string(prefix) + ".m." + o.params[i].name);
      const auto& v = find(std::string(prefix) + ".v." + o.params[i].name);
      if (m.data.size() != o.adam->slot_m(i).size() || v.data.size() != o.adam->slot_v(i).size())
        throw DataError("optimizer slot shape mismatch for " + o.params[i].name);
      o.adam->slot_m(i).assign(m.data.begin(), m.data.end());
      o.adam->slot_v(i).assign(v.data.begin(), v.data.end());
    }
  };
  pull_slots("adam", codec_opt);
  codec_opt.adam->set_steps(meta.value("adam_steps", 0L));
  if (disc_opt) {
    pull_slots("disc_adam", *disc_opt);
    for (const auto& p : disc_opt->params) {
      const auto& b = find("disc_param." + p.name);
      if (b.data.size() != p.w->size()) throw DataError("critic shape mismatch for " + p.name);
      p.w->assign(b.data.begin(), b.data.end());
    }
    disc_opt->adam->set_steps(meta.value("disc_adam_steps", 0L));
  }
}

}  // namespace

TrainStats train_codec(const TrainConfig& cfg, const std::string& corpus_dir,
                       const std::string& out_dir, std::ostream& log, int max_epochs_this_call) {
  if (cfg.epochs < 1 || cfg.batch < 1 || cfg.crop_frames < 1)
    throw ConfigError("epochs, batch and crop_frames must be positive");
  if (cfg.tier_names.empty()) throw ConfigError("at least one bitrate tier is required");
  if (!cfg.external_dir.empty() && cfg.prior_path.empty())
    throw ConfigError("external features define the target side only; a prior network is still "
                      "needed for the prediction side");
  std::vector<codec::Tier> arm_tiers;
  for (const auto& name : cfg.tier_names) arm_tiers.push_back(codec::tier_by_name(name));
  for (const auto& t : arm_tiers)
    if (t.n_q > cfg.codec.n_q_max) throw ConfigError("tier " + t.name + " exceeds n_q_max");

  fs::create_directories(out_dir);
  std::string final_path = (fs::path(out_dir) / "codec_final.spgb").string();
  std::string last_path = (fs::path(out_dir) / "codec_last.spgb").string();
  std::string optim_path = (fs::path(out_dir) / "optim_last.spgb").string();
  std::string csv_path = (fs::path(out_dir) / "train_log.csv").string();

  TrainStats stats;
  stats.checkpoint_path = final_path;
  if (fs::exists(final_path)) {
    nlohmann::json meta = read_checkpoint_meta(final_path);
    if (train_config_to_json(cfg) != meta.value("train_config", nlohmann::json()))
      throw ConfigError("completed run at " + out_dir + " used a different config");
    stats.already_complete = true;
    stats.steps = meta.value("steps", 0L);
    stats.epochs = cfg.epochs;
    log << "already complete: " << final_path << "\n";
    return stats;
  }

  // Training data: the train split, fully resident.
  auto manifest = corpus::load_manifest((fs::path(corpus_dir) / "manifest.jsonl").string());
  auto train_entries = corpus::filter_split(manifest, "train");
  if (train_entries.empty()) throw ConfigError("corpus has no train split: " + corpus_dir);
  std::vector<corpus::Utterance> utts(train_entries.size());
  std::vector<std::string> ids(train_entries.size());
  for (size_t i = 0; i < train_entries.size(); ++i) {
    auto wav = dsp::read_wav((fs::path(corpus_dir) / train_entries[i].wav).string());
    utts[i].samples = std::move(wav.samples);
    utts[i].labels = train_entries[i].labels;
    utts[i].speaker = train_entries[i].voice;
    ids[i] = train_entries[i].id;
  }

  codec::Codec<float> codec(cfg.codec);
  codec.init_params(Rng(cfg.codec.seed));

  std::unique_ptr<priors::Prior<float>> prior;
  std::vector<nn::ParamRef<float>> prior_params;
  if (!cfg.prior_path.empty()) {
    nlohmann::json pmeta = read_checkpoint_meta(cfg.prior_path);
    bool gate_ok = pmeta.value("gate", nlohmann::json::object()).value("passed", false);
    if (!gate_ok && !cfg.ignore_prior_gate)
      throw GateFailure("prior failed its specialization gate: " + cfg.prior_path);
    prior = priors::load_prior<float>(cfg.prior_path);
    prior_params = prior->params();
  }
  std::unique_ptr<priors::ExternalFeatures> ext;
  if (!cfg.external_dir.empty()) ext = std::make_unique<priors::ExternalFeatures>(cfg.external_dir);

  OptimState opt;
  opt.params = codec.params();
  opt.adam = std::make_unique<nn::Adam<float>>(opt.params);

  bool use_adv = cfg.weights.adv > 0.0;
  std::unique_ptr<losses::DiscriminatorBank<float>> disc;
  OptimState disc_opt;
  if (use_adv) {
    disc = std::make_unique<losses::DiscriminatorBank<float>>(Rng(cfg.disc_seed));
    disc_opt.params = disc->params();
    disc_opt.adam = std::make_unique<nn::Adam<float>>(disc_opt.params);
  }

  int n = int(utts.size());
  long steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  long total_steps = steps_per_epoch * cfg.epochs;
  long gstep = 0;
  int start_epoch = 0;

  if (fs::exists(last_path)) {
    nlohmann::json meta = codec.load_into(last_path);
    if (train_config_to_json(cfg) != meta.value("train_config", nlohmann::json()))
      throw ConfigError("rolling checkpoint at " + out_dir + " used a different config");
    gstep = meta.at("progress").value("step", 0L);
    start_epoch = meta.at("progress").value("next_epoch", 0);
    load_optimizer(optim_path, gstep, opt, use_adv ? &disc_opt : nullptr);
    stats.resumed = true;
    log << "resuming at epoch " << start_epoch << ", step " << gstep << "\n";
  }

  std::ofstream csv(csv_path, std::ios::app);
  if (!csv) throw DataError("cannot open " + csv_path);
  if (fs::file_size(csv_path) == 0)
    csv << "step,lr,alpha,l1,mr_stft,commit,semantic,adv,disc,total,resets\n";

  losses::MrStftLoss<float> mr;
  const auto& w = cfg.weights;
  double lr_min = cfg.lr * cfg.lr_min_frac;

  auto save_rolling = [&](int next_epoch) {
    save_optimizer(optim_path, gstep, opt, use_adv ? &disc_opt : nullptr);
    codec.save(last_path, {{"train_config", train_config_to_json(cfg)},
                           {"progress", {{"next_epoch", next_epoch}, {"step", gstep}}}});
  };

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto order = Rng(cfg.seed).derive("order", uint64_t(epoch)).permutation(n);
    for (int pos = 0; pos < n; pos += cfg.batch) {
      int B = std::min(cfg.batch, n - pos);
      double lr = nn::cosine_lr(gstep, total_steps, cfg.lr, lr_min);

      nn::zero_grads(opt.params);
      if (prior) nn::zero_grads(prior_params);
      std::vector<StagePool> pools(size_t(cfg.codec.n_q_max));
      std::vector<Mat<float>> adv_x, adv_y;  // crops kept for the critic pass

      regulation::LossTerms terms;
      double weighted_sem = 0.0, disc_loss = 0.0;
      for (int i = 0; i < B; ++i) {
        Rng sr = Rng(cfg.seed).derive("data", uint64_t(gstep)).derive("sample", uint64_t(i));
        const auto& full = utts[size_t(order[pos + i])];
        int frame_off = 0;
        corpus::Utterance crop =
            corpus::crop_utterance(full, cfg.crop_frames, sr.derive("crop"), &frame_off);
        Mat<float> x = corpus::wave_input(crop.samples);
        int ns = x.cols;

        const codec::Tier& tier = arm_tiers[sr.below(arm_tiers.size())];
        double alpha = regulation::alpha_for_bitrate(cfg.alpha, tier.kbps);

        Mat<float> z = codec.encode_latent(x);
        auto res = codec.rvq.quantize(z, tier.n_q, true);
        Mat<float> y = codec.decode_latent(res.zq);

        Mat<float> g1(1, ns), g2(1, ns);
        double l1 = losses::l1_loss<float>(x.data(), y.data(), ns, g1.data());
        double mrv = mr.compute(x.data(), y.data(), ns, g2.data());
        Mat<float> dy(1, ns);
        for (int k = 0; k < ns; ++k)
          dy.v[size_t(k)] = float(w.l1) * g1.v[size_t(k)] + float(w.mr_stft) * g2.v[size_t(k)];

        double sem = 0.0;
        if (prior) {
          Mat<float> target;
          if (ext) {
            Mat<float> file_feats = ext->features_for(ids[size_t(order[pos + i])]);
            target = slice_cols(file_feats, frame_off, int(crop.labels.size()),
                                "external features for " + ids[size_t(order[pos + i])]);
          } else {
            target = prior->features(x);
          }
          if (cfg.shuffle_semantic_target)
            target = priors::shuffle_frames(target, sr.derive("shuffle"));
          Mat<float> pred = prior->features(y);
          priors::align_frames(target, pred);
          Mat<float> dfeat(pred.rows, pred.cols);
          sem = priors::semantic_loss(target, pred, &dfeat);
          Mat<float> dx_sem = prior->features_backward(dfeat);
          for (int k = 0; k < ns; ++k) dy.v[size_t(k)] += float(alpha) * dx_sem.v[size_t(k)];
        }

        double adv_gen = 0.0;
        if (use_adv) {
          auto fake_scores = disc->score_all(y);
          std::vector<Mat<float>> dscores;
          adv_gen = losses::lsgan_generator_loss(fake_scores, &dscores);
          Mat<float> dx_adv = disc->backward_all(dscores, ns);
          for (int k = 0; k < ns; ++k) dy.v[size_t(k)] += float(w.adv) * dx_adv.v[size_t(k)];
          adv_x.push_back(x);
          adv_y.push_back(y);
        }

        // Straight-through: decoder gradients pass the quantizer unchanged;
        // the commitment term pulls the latent toward its codes.
        Mat<float> dz = codec.decoder.backward(dy);
        double commit = 0.0;
        float cg = 2.0f / float(z.v.size());
        for (size_t k = 0; k < z.v.size(); ++k) {
          float d = z.v[k] - res.zq.v[k];
          commit += double(d) * d;
          dz.v[k] += float(w.commit) * cg * d;
        }
        commit /= double(z.v.size());
        codec.encoder.backward(dz);

        for (int s = 0; s < tier.n_q; ++s) {
          auto& pool = pools[size_t(s)];
          const Mat<float>& si = res.stage_inputs[size_t(s)];
          pool.rows.insert(pool.rows.end(), si.v.begin(), si.v.end());
          for (int t = 0; t < res.indices.cols; ++t) pool.idx.push_back(res.indices.at(s, t));
        }

        terms.l1 += l1 / B;
        terms.mr_stft += mrv / B;
        terms.commit += commit / B;
        terms.semantic += sem / B;
        terms.adv += adv_gen / B;
        terms.alpha += alpha / B;
        weighted_sem += alpha * sem / B;
      }

      nn::scale_grads(opt.params, 1.0f / float(B));
      opt.adam->step(float(lr));

      int D = cfg.codec.latent_dim;
      std::vector<Mat<float>> stage_mats(pools.size());
      for (size_t s = 0; s < pools.size(); ++s) {
        if (pools[s].idx.empty()) continue;
        Mat<float> m(int(pools[s].idx.size()), D);
        m.v = std::move(pools[s].rows);
        stage_mats[s] = std::move(m);
        codec.rvq.ema_update_stage(int(s), stage_mats[s], pools[s].idx);
      }
      int resets =
          codec.rvq.reinit_dead_codes(stage_mats, Rng(cfg.seed).derive("reinit", uint64_t(gstep)));
      stats.dead_resets += resets;

      if (use_adv) {
        // The critic trains against this batch's generator output, scored
        // fresh so its tape is not left over from the generator pass.
        nn::zero_grads(disc_opt.params);
        const std::vector<Mat<float>> none;
        for (int i = 0; i < int(adv_x.size()); ++i) {
          std::vector<Mat<float>> dreal, dfake;
          auto real_scores = disc->score_all(adv_x[size_t(i)]);
          disc_loss +=
              losses::lsgan_discriminator_loss<float>(real_scores, none, &dreal, nullptr) / B;
          disc->backward_all(dreal, adv_x[size_t(i)].cols);
          auto fake_scores = disc->score_all(adv_y[size_t(i)]);
          disc_loss +=
              losses::lsgan_discriminator_loss<float>(none, fake_scores, nullptr, &dfake) / B;
          disc->backward_all(dfake, adv_y[size_t(i)].cols);
        }
        nn::scale_grads(disc_opt.params, 1.0f / float(B));
        disc_opt.adam->step(float(lr));
      }

      regulation::check_finite(terms, gstep);
      double total = w.l1 * terms.l1 + w.mr_stft * terms.mr_stft + w.commit * terms.commit +
                     weighted_sem + w.adv * terms.adv;
      ++gstep;
      stats.last = terms;
      stats.last_total = total;

      if (gstep == 1 || gstep % cfg.log_every == 0 || gstep == total_steps) {
        char row[256];
        std::snprintf(row, sizeof(row), "%ld,%.6g,%.4g,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                      gstep, lr, terms.alpha, terms.l1, terms.mr_stft, terms.commit,
                      terms.semantic, terms.adv, disc_loss, total, resets);
        csv << row;
        csv.flush();
        log << "epoch " << epoch << " step " << gstep << "/" << total_steps << " total " << total
            << " (l1 " << terms.l1 << ", mrstft " << terms.mr_stft << ", sem " << terms.semantic
            << ")\n";
      }
    }
    if ((epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) save_rolling(epoch + 1);
    if (max_epochs_this_call > 0 && epoch + 1 - start_epoch >= max_epochs_this_call &&
        epoch + 1 < cfg.epochs) {
      save_rolling(epoch + 1);
      stats.steps = gstep;
      stats.epochs = epoch + 1;
      log << "pausing after epoch " << epoch + 1 << " at step " << gstep << "\n";
      return stats;
    }
  }

  codec.save(final_path, {{"train_config", train_config_to_json(cfg)},
                          {"completed", true},
                          {"steps", gstep}});
  // Refresh the rolling pair too so a later resume attempt sees a
  // consistent state instead of a stale mid-run step.
  save_rolling(cfg.epochs);
  stats.steps = gstep;
  stats.epochs = cfg.epochs;
  log << "finished " << gstep << " steps -> " << final_path << "\n";
  return stats;
}

}  // namespace spg::trainer
