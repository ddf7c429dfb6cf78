#include "spg/eval/eval_models.hpp"

#include <algorithm>
#include <cmath>

#include "spg/corpus/corpus.hpp"
#include "spg/losses/classification.hpp"
#include "spg/nn/adam.hpp"
#include "spg/util/errors.hpp"

namespace spg::eval {

EvalModelConfig eval_model_config_from_json(const nlohmann::json& j) {
  EvalModelConfig c;
  c.seed = j.value("seed", c.seed);
  c.epochs = j.value("epochs", c.epochs);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  c.batch = j.value("batch", c.batch);
  c.crop_frames = j.value("crop_frames", c.crop_frames);
  c.lr = j.value("lr", c.lr);
  c.min_frames = j.value("min_frames", c.min_frames);
  c.max_frames = j.value("max_frames", c.max_frames);
  c.p_pitch = j.value("p_pitch", c.p_pitch);
  c.pitch_shift = j.value("pitch_shift", c.pitch_shift);
  c.p_redraw = j.value("p_redraw", c.p_redraw);
  c.p_noise = j.value("p_noise", c.p_noise);
  c.snr_lo = j.value("snr_lo", c.snr_lo);
  c.snr_hi = j.value("snr_hi", c.snr_hi);
  c.eval_utts = j.value("eval_utts", c.eval_utts);
  c.recognizer_min_acc = j.value("recognizer_min_acc", c.recognizer_min_acc);
  c.embedder_speakers = j.value("embedder_speakers", c.embedder_speakers);
  c.embedder_min_acc = j.value("embedder_min_acc", c.embedder_min_acc);
  return c;
}

nlohmann::json eval_model_config_to_json(const EvalModelConfig& c) {
  return {
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"steps_per_epoch", c.steps_per_epoch},
      {"batch", c.batch},
      {"crop_frames", c.crop_frames},
      {"lr", c.lr},
      {"min_frames", c.min_frames},
      {"max_frames", c.max_frames},
      {"p_pitch", c.p_pitch},
      {"pitch_shift", c.pitch_shift},
      {"p_redraw", c.p_redraw},
      {"p_noise", c.p_noise},
      {"snr_lo", c.snr_lo},
      {"snr_hi", c.snr_hi},
      {"eval_utts", c.eval_utts},
      {"recognizer_min_acc", c.recognizer_min_acc},
      {"embedder_speakers", c.embedder_speakers},
      {"embedder_min_acc", c.embedder_min_acc},
  };
}

Recognizer::Recognizer(uint64_t seed) : seed_(seed) {
  // Different stride order, kernel sizes and widths than the feature
  // extractors the codecs train against.
  std::vector<nn::Conv1d<float>*> convs;
  auto add = [&](int cin, int cout, int k, int s) {
    convs.push_back(net.add<nn::Conv1d<float>>(cin, cout, k, s));
  };
  add(1, 20, 10, 5);
  net.add<nn::Activation<float>>(nn::Act::elu);
  add(20, 28, 8, 4);
  net.add<nn::Activation<float>>(nn::Act::elu);
  add(28, 36, 8, 4);
  net.add<nn::Activation<float>>(nn::Act::elu);
  add(36, 44, 8, 4);
  net.add<nn::Activation<float>>(nn::Act::elu);
  add(44, 44, 5, 1);
  net.add<nn::Activation<float>>(nn::Act::elu);
  add(44, 12, 1, 1);
  Rng rng(seed);
  for (size_t i = 0; i < convs.size(); ++i) convs[i]->init_kaiming(rng.derive("conv", i));
}

void Recognizer::save(const std::string& path, const nlohmann::json& extra_meta) {
  nlohmann::json meta = extra_meta;
  meta["kind"] = "recognizer";
  meta["seed"] = seed_;
  auto p = params();
  nn::write_blob_file(path, meta, nn::params_to_blobs(p));
}

std::unique_ptr<Recognizer> load_recognizer(const std::string& path) {
  std::vector<nn::TensorBlob> blobs;
  nlohmann::json meta = nn::read_blob_file(path, blobs);
  if (meta.value("kind", "") != "recognizer")
    throw DataError("not a recognizer checkpoint: " + path);
  auto rec = std::make_unique<Recognizer>(meta.at("seed").get<uint64_t>());
  auto params = rec->params();
  nn::blobs_to_params(blobs, params);
  return rec;
}

SpeakerEmbedder::SpeakerEmbedder(uint64_t seed, int n_speakers)
    : seed_(seed), n_speakers_(n_speakers) {
  std::vector<nn::Conv1d<float>*> convs;
  auto add = [&](nn::Sequential<float>& net, int cin, int cout, int k, int s) {
    convs.push_back(net.add<nn::Conv1d<float>>(cin, cout, k, s));
  };
  add(trunk, 1, 12, 15, 5);
  trunk.add<nn::Activation<float>>(nn::Act::elu);
  add(trunk, 12, 20, 8, 4);
  trunk.add<nn::Activation<float>>(nn::Act::elu);
  add(trunk, 20, 28, 8, 4);
  trunk.add<nn::Activation<float>>(nn::Act::elu);
  add(trunk, 28, 40, 8, 4);
  trunk.add<nn::Activation<float>>(nn::Act::elu);
  add(trunk, 40, 48, 3, 1);
  trunk.add<nn::GlobalMeanPool<float>>();
  add(head, 48, n_speakers, 1, 1);
  Rng rng(seed);
  for (size_t i = 0; i < convs.size(); ++i) convs[i]->init_kaiming(rng.derive("conv", i));
}

void SpeakerEmbedder::save(const std::string& path, const nlohmann::json& extra_meta) {
  nlohmann::json meta = extra_meta;
  meta["kind"] = "embedder";
  meta["seed"] = seed_;
  meta["n_speakers"] = n_speakers_;
  auto p = params();
  nn::write_blob_file(path, meta, nn::params_to_blobs(p));
}

std::unique_ptr<SpeakerEmbedder> load_embedder(const std::string& path) {
  std::vector<nn::TensorBlob> blobs;
  nlohmann::json meta = nn::read_blob_file(path, blobs);
  if (meta.value("kind", "") != "embedder") throw DataError("not an embedder checkpoint: " + path);
  auto emb = std::make_unique<SpeakerEmbedder>(meta.at("seed").get<uint64_t>(),
                                               meta.at("n_speakers").get<int>());
  auto params = emb->params();
  nn::blobs_to_params(blobs, params);
  return emb;
}

namespace {

corpus::SampleConfig recognizer_samples(const EvalModelConfig& cfg, bool augment) {
  corpus::SampleConfig sc;
  sc.range = corpus::wide_speaker_range();
  sc.min_frames = cfg.min_frames;
  sc.max_frames = cfg.max_frames;
  sc.augment = augment;
  sc.p_pitch = cfg.p_pitch;
  sc.pitch_shift = cfg.pitch_shift;
  sc.p_redraw = cfg.p_redraw;
  sc.p_noise = cfg.p_noise;
  sc.snr_lo = cfg.snr_lo;
  sc.snr_hi = cfg.snr_hi;
  return sc;
}

double recognizer_clean_accuracy(Recognizer& rec, const EvalModelConfig& cfg) {
  Rng root(cfg.seed);
  corpus::SampleConfig sc = recognizer_samples(cfg, false);
  double num = 0, den = 0;
  for (int i = 0; i < cfg.eval_utts; ++i) {
    auto utt = corpus::sample_utterance(sc, root.derive("rec_eval", i));
    Mat<float> logits = rec.logits(corpus::wave_input(utt.samples));
    auto pred = losses::argmax_frames(logits);
    int n = std::min(int(pred.size()), int(utt.labels.size()));
    for (int t = 0; t < n; ++t) {
      num += pred[t] == utt.labels[t] ? 1 : 0;
      den += 1;
    }
  }
  return den > 0 ? num / den : 0.0;
}

}  // namespace

double train_recognizer(const EvalModelConfig& cfg, const std::string& out_path,
                        std::ostream& log) {
  Recognizer rec(cfg.seed);
  auto params = rec.params();
  nn::Adam<float> opt(params);
  Rng root(cfg.seed);
  corpus::SampleConfig sc = recognizer_samples(cfg, true);

  long total_steps = long(cfg.epochs) * cfg.steps_per_epoch;
  for (long step = 0; step < total_steps; ++step) {
    opt.zero_grad();
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      Rng r = root.derive("step", step).derive("sample", b);
      auto utt = corpus::crop_utterance(corpus::sample_utterance(sc, r.derive("utt")),
                                        cfg.crop_frames, r.derive("crop"));
      Mat<float> logits = rec.logits(corpus::wave_input(utt.samples));
      Mat<float> dlogits(logits.rows, logits.cols);
      loss_sum += losses::softmax_xent(logits, utt.labels, &dlogits);
      rec.net.backward(dlogits);
    }
    nn::scale_grads(params, 1.0f / float(cfg.batch));
    opt.step(nn::cosine_lr<float>(step, total_steps, float(cfg.lr), float(cfg.lr) * 0.1f));
    if (step % 50 == 0 || step + 1 == total_steps)
      log << "recognizer step " << step << "/" << total_steps << " loss " << loss_sum / cfg.batch
          << "\n";
  }

  double acc = recognizer_clean_accuracy(rec, cfg);
  log << "recognizer clean frame accuracy " << acc << " (gate " << cfg.recognizer_min_acc << ")\n";
  rec.save(out_path, {{"train_config", eval_model_config_to_json(cfg)},
                      {"clean_accuracy", acc},
                      {"gate_passed", acc >= cfg.recognizer_min_acc}});
  return acc;
}

double train_embedder(const EvalModelConfig& cfg, const std::string& out_path, std::ostream& log) {
  SpeakerEmbedder emb(cfg.seed, cfg.embedder_speakers);
  auto params = emb.params();
  nn::Adam<float> opt(params);
  Rng root(cfg.seed);

  // A fixed roster of voices; identity must survive augmentation, so only
  // additive noise is applied, never pitch or voice redraws.
  std::vector<corpus::Speaker> roster(cfg.embedder_speakers);
  for (int i = 0; i < cfg.embedder_speakers; ++i)
    roster[i] = corpus::sample_speaker(corpus::wide_speaker_range(), root.derive("emb_speaker", i));

  auto render_for = [&](int id, Rng r, bool augment) {
    auto plan = corpus::plan_utterance(r.derive("plan"), cfg.min_frames, cfg.max_frames);
    auto utt = corpus::render_utterance(plan, roster[id], r.derive("render"));
    if (augment) {
      Rng a = r.derive("aug");
      if (a.uniform() < cfg.p_noise)
        corpus::add_noise(utt.samples.data(), utt.samples.size(),
                          a.uniform(cfg.snr_lo, cfg.snr_hi), a.derive("draw"));
    }
    return utt;
  };

  long total_steps = long(cfg.epochs) * cfg.steps_per_epoch;
  for (long step = 0; step < total_steps; ++step) {
    opt.zero_grad();
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      Rng r = root.derive("step", step).derive("sample", b);
      int id = int(r.below(uint64_t(cfg.embedder_speakers)));
      auto utt = corpus::crop_utterance(render_for(id, r.derive("utt"), true), cfg.crop_frames,
                                        r.derive("crop"));
      Mat<float> logits = emb.logits(corpus::wave_input(utt.samples));
      Mat<float> dlogits(logits.rows, logits.cols);
      loss_sum += losses::softmax_xent(logits, std::vector<int>{id}, &dlogits);
      emb.trunk.backward(emb.head.backward(dlogits));
    }
    nn::scale_grads(params, 1.0f / float(cfg.batch));
    opt.step(nn::cosine_lr<float>(step, total_steps, float(cfg.lr), float(cfg.lr) * 0.1f));
    if (step % 50 == 0 || step + 1 == total_steps)
      log << "embedder step " << step << "/" << total_steps << " loss " << loss_sum / cfg.batch
          << "\n";
  }

  // Held-out identification accuracy on clean renders of unseen plans.
  double num = 0, den = 0;
  for (int i = 0; i < cfg.eval_utts; ++i) {
    Rng r = root.derive("emb_eval", i);
    int id = int(r.below(uint64_t(cfg.embedder_speakers)));
    auto utt = render_for(id, r.derive("utt"), false);
    Mat<float> logits = emb.logits(corpus::wave_input(utt.samples));
    num += losses::argmax_frames(logits)[0] == id ? 1 : 0;
    den += 1;
  }
  double acc = den > 0 ? num / den : 0.0;
  log << "embedder held-out speaker accuracy " << acc << " (gate " << cfg.embedder_min_acc
      << ")\n";
  emb.save(out_path, {{"train_config", eval_model_config_to_json(cfg)},
                      {"holdout_accuracy", acc},
                      {"gate_passed", acc >= cfg.embedder_min_acc}});
  return acc;
}

}  // namespace spg::eval
