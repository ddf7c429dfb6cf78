#include "spg/priors/train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "spg/corpus/corpus.hpp"
#include "spg/dsp/mel.hpp"
#include "spg/dsp/pitch.hpp"
#include "spg/eval/probe.hpp"
#include "spg/losses/classification.hpp"
#include "spg/nn/adam.hpp"

namespace spg::priors {

using corpus::kFrameSamples;

PriorTrainConfig prior_train_config_from_json(const nlohmann::json& j) {
  PriorTrainConfig c;
  c.kind = prior_kind_from_string(j.value("kind", "linguistic"));
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
  c.mask_min_frames = j.value("mask_min_frames", c.mask_min_frames);
  c.mask_max_frames = j.value("mask_max_frames", c.mask_max_frames);
  c.probe_utts = j.value("probe_utts", c.probe_utts);
  c.probe_steps = j.value("probe_steps", c.probe_steps);
  c.ling_phone_min = j.value("ling_phone_min", c.ling_phone_min);
  c.ling_f0_max = j.value("ling_f0_max", c.ling_f0_max);
  c.ac_f0_min = j.value("ac_f0_min", c.ac_f0_min);
  c.ac_phone_margin = j.value("ac_phone_margin", c.ac_phone_margin);
  return c;
}

nlohmann::json prior_train_config_to_json(const PriorTrainConfig& c) {
  return {
      {"kind", to_string(c.kind)},
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
      {"mask_min_frames", c.mask_min_frames},
      {"mask_max_frames", c.mask_max_frames},
      {"probe_utts", c.probe_utts},
      {"probe_steps", c.probe_steps},
      {"ling_phone_min", c.ling_phone_min},
      {"ling_f0_max", c.ling_f0_max},
      {"ac_f0_min", c.ac_f0_min},
      {"ac_phone_margin", c.ac_phone_margin},
  };
}

nlohmann::json GateReport::to_json() const {
  return {
      {"phone_probe_acc", phone_probe_acc}, {"f0_probe_acc", f0_probe_acc},
      {"phone_majority", phone_majority},   {"task_metric", task_metric},
      {"passed", passed},                   {"detail", detail},
  };
}

namespace {

struct CropView {
  Mat<float> x;            // [1][frames * 320]
  std::vector<int> labels; // per frame
  int frames = 0;
};

CropView crop_view(const corpus::Utterance& utt, int crop_frames, Rng rng) {
  auto c = corpus::crop_utterance(utt, crop_frames, rng);
  CropView cv;
  cv.frames = int(c.labels.size());
  cv.x = corpus::wave_input(c.samples);
  cv.labels = std::move(c.labels);
  return cv;
}

corpus::SampleConfig sample_config_for(const PriorTrainConfig& cfg, bool augment) {
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

// Collects per-frame probe datasets from fresh clean utterances.
struct ProbeData {
  std::vector<std::vector<float>> phone_x_train, phone_x_eval;
  std::vector<int> phone_y_train, phone_y_eval;
  std::vector<std::vector<float>> f0_x_train, f0_x_eval;
  std::vector<int> f0_y_train, f0_y_eval;
  double task_metric = 0.0;
};

ProbeData collect_probe_data(Prior<float>& prior, const PriorTrainConfig& cfg) {
  ProbeData pd;
  Rng root(cfg.seed);
  corpus::SampleConfig sc = sample_config_for(cfg, false);

  // F0 quartile edges come from the probe-train utterances only.
  std::vector<double> train_f0s;
  struct UttFeats {
    Mat<float> feats;
    std::vector<int> labels;
    std::vector<float> f0;
    bool train;
  };
  std::vector<UttFeats> cache;
  int n_train_utts = cfg.probe_utts * 7 / 10;

  double task_acc_num = 0, task_acc_den = 0, task_l1 = 0;
  int task_l1_count = 0;
  dsp::MelExtractor<float> mel(corpus::kSampleRate, kMelBands);

  for (int i = 0; i < cfg.probe_utts; ++i) {
    auto utt = corpus::sample_utterance(sc, root.derive("probe_utt", i));
    UttFeats uf;
    uf.train = i < n_train_utts;
    uf.labels = utt.labels;
    Mat<float> x = corpus::wave_input(utt.samples);
    uf.feats = prior.features(x);
    uf.f0 = dsp::track_f0(utt.samples.data(), int(utt.samples.size()));
    if (uf.train)
      for (float v : uf.f0)
        if (v > 0) train_f0s.push_back(v);

    // Task metric on held-out utterances: clean frame accuracy for the
    // classifier head, masked-prediction error for the regressor head.
    if (!uf.train) {
      if (prior.kind() == PriorKind::linguistic) {
        Mat<float> logits = prior.head_forward(uf.feats);
        auto pred = losses::argmax_frames(logits);
        int n = std::min(int(pred.size()), int(uf.labels.size()));
        for (int t = 0; t < n; ++t) {
          task_acc_num += pred[t] == uf.labels[t] ? 1 : 0;
          task_acc_den += 1;
        }
      } else {
        Mat<float> target = mel.compute(x.data(), x.cols);
        Rng mrng = root.derive("probe_mask", i);
        int frames = int(uf.labels.size());
        int span = std::min(frames, cfg.mask_min_frames +
                                        int(mrng.below(uint64_t(cfg.mask_max_frames -
                                                                cfg.mask_min_frames + 1))));
        int moff = int(mrng.below(uint64_t(frames - span) + 1));
        Mat<float> masked = x;
        for (int t = moff; t < moff + span; ++t)
          for (int s = 0; s < kFrameSamples; ++s) masked.at(0, t * kFrameSamples + s) = 0.0f;
        Mat<float> pred = prior.head_forward(prior.features(masked));
        int cols = std::min(pred.cols, target.cols);
        for (int t = moff; t < std::min(moff + span, cols); ++t)
          for (int f = 0; f < pred.rows; ++f) {
            task_l1 += std::abs(pred.at(f, t) - target.at(f, t));
            ++task_l1_count;
          }
      }
    }
    cache.push_back(std::move(uf));
  }

  auto edges = eval::quartile_edges(train_f0s);
  for (auto& uf : cache) {
    int Tf = uf.feats.cols;
    for (int t = 0; t < Tf; ++t) {
      std::vector<float> v(uf.feats.rows);
      for (int f = 0; f < uf.feats.rows; ++f) v[f] = uf.feats.at(f, t);
      if (t < int(uf.labels.size())) {
        if (uf.train) {
          pd.phone_x_train.push_back(v);
          pd.phone_y_train.push_back(uf.labels[t]);
        } else {
          pd.phone_x_eval.push_back(v);
          pd.phone_y_eval.push_back(uf.labels[t]);
        }
      }
      if (t < int(uf.f0.size()) && uf.f0[t] > 0) {
        int cls = eval::quartile_class(uf.f0[t], edges);
        if (uf.train) {
          pd.f0_x_train.push_back(v);
          pd.f0_y_train.push_back(cls);
        } else {
          pd.f0_x_eval.push_back(v);
          pd.f0_y_eval.push_back(cls);
        }
      }
    }
  }
  pd.task_metric = prior.kind() == PriorKind::linguistic
                       ? (task_acc_den > 0 ? task_acc_num / task_acc_den : 0.0)
                       : (task_l1_count > 0 ? task_l1 / task_l1_count : 0.0);
  return pd;
}

}  // namespace

GateReport probe_prior(Prior<float>& prior, const PriorTrainConfig& cfg) {
  ProbeData pd = collect_probe_data(prior, cfg);
  auto phone = eval::train_linear_probe(pd.phone_x_train, pd.phone_y_train, pd.phone_x_eval,
                                        pd.phone_y_eval, 12, cfg.seed ^ 0xA1, cfg.probe_steps);
  auto f0 = eval::train_linear_probe(pd.f0_x_train, pd.f0_y_train, pd.f0_x_eval, pd.f0_y_eval, 4,
                                     cfg.seed ^ 0xF0, cfg.probe_steps);
  GateReport rep;
  rep.phone_probe_acc = phone.accuracy;
  rep.f0_probe_acc = f0.accuracy;
  rep.phone_majority = phone.majority_baseline;
  rep.task_metric = pd.task_metric;

  char buf[256];
  if (prior.kind() == PriorKind::linguistic) {
    rep.passed = phone.accuracy >= cfg.ling_phone_min && f0.accuracy <= cfg.ling_f0_max;
    std::snprintf(buf, sizeof(buf),
                  "linguistic gate: phone probe %.3f (need >= %.2f), f0 probe %.3f (need <= %.2f)",
                  phone.accuracy, cfg.ling_phone_min, f0.accuracy, cfg.ling_f0_max);
  } else {
    rep.passed = f0.accuracy >= cfg.ac_f0_min &&
                 phone.accuracy > phone.majority_baseline + cfg.ac_phone_margin;
    std::snprintf(buf, sizeof(buf),
                  "acoustic gate: f0 probe %.3f (need >= %.2f), phone probe %.3f (need > %.3f)",
                  f0.accuracy, cfg.ac_f0_min, phone.accuracy,
                  phone.majority_baseline + cfg.ac_phone_margin);
  }
  rep.detail = buf;
  return rep;
}

GateReport train_prior(const PriorTrainConfig& cfg, const std::string& out_path,
                       std::ostream& log) {
  if (cfg.kind == PriorKind::external)
    throw ConfigError("external priors are not trained; point the trainer at a feature directory");
  Prior<float> prior(cfg.kind, cfg.seed);
  auto params = prior.params();
  nn::Adam<float> opt(params);
  dsp::MelExtractor<float> mel(corpus::kSampleRate, kMelBands);

  Rng root(cfg.seed);
  corpus::SampleConfig sc = sample_config_for(cfg, cfg.kind == PriorKind::linguistic);

  long total_steps = long(cfg.epochs) * cfg.steps_per_epoch;
  for (long step = 0; step < total_steps; ++step) {
    opt.zero_grad();
    double loss_sum = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      Rng r = root.derive("step", step).derive("sample", b);
      auto utt = corpus::sample_utterance(sc, r.derive("utt"));
      CropView cv = crop_view(utt, cfg.crop_frames, r.derive("crop"));

      if (cfg.kind == PriorKind::linguistic) {
        Mat<float> feats = prior.features(cv.x);
        Mat<float> logits = prior.head_forward(feats);
        Mat<float> dlogits(logits.rows, logits.cols);
        loss_sum += losses::softmax_xent(logits, cv.labels, &dlogits);
        prior.features_backward(prior.head_backward(dlogits));
      } else {
        Mat<float> target = mel.compute(cv.x.data(), cv.x.cols);
        Rng mrng = r.derive("mask");
        int span = cfg.mask_min_frames +
                   int(mrng.below(uint64_t(cfg.mask_max_frames - cfg.mask_min_frames + 1)));
        span = std::min(span, cv.frames);
        int moff = int(mrng.below(uint64_t(cv.frames - span) + 1));
        Mat<float> masked = cv.x;
        for (int t = moff; t < moff + span; ++t)
          for (int s = 0; s < kFrameSamples; ++s) masked.at(0, t * kFrameSamples + s) = 0.0f;

        Mat<float> pred = prior.head_forward(prior.features(masked));
        int cols = std::min(pred.cols, target.cols);
        int hi = std::min(moff + span, cols);
        int numel = (hi - moff) * pred.rows;
        if (numel <= 0) continue;
        Mat<float> dpred(pred.rows, pred.cols);
        float inv = 1.0f / float(numel);
        float l = 0.0f;
        for (int t = moff; t < hi; ++t)
          for (int f = 0; f < pred.rows; ++f) {
            float d = pred.at(f, t) - target.at(f, t);
            l += std::abs(d) * inv;
            dpred.at(f, t) = (d > 0 ? inv : (d < 0 ? -inv : 0.0f));
          }
        loss_sum += l;
        prior.features_backward(prior.head_backward(dpred));
      }
    }
    nn::scale_grads(params, 1.0f / float(cfg.batch));
    opt.step(nn::cosine_lr<float>(step, total_steps, float(cfg.lr), float(cfg.lr) * 0.1f));
    if (step % 50 == 0 || step + 1 == total_steps)
      log << "prior[" << to_string(cfg.kind) << "] step " << step << "/" << total_steps
          << " loss " << loss_sum / cfg.batch << "\n";
  }

  GateReport rep = probe_prior(prior, cfg);
  log << rep.detail << "\n";
  nlohmann::json meta = {{"train_config", prior_train_config_to_json(cfg)},
                         {"gate", rep.to_json()}};
  prior.save(out_path, meta);
  return rep;
}

}  // namespace spg::priors
