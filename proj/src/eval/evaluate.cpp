#include "spg/eval/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "spg/codec/bitstream.hpp"
#include "spg/dsp/pitch.hpp"
#include "spg/dsp/wav.hpp"
#include "spg/losses/classification.hpp"
#include "spg/losses/recon.hpp"
#include "spg/priors/semantic.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/rng.hpp"

namespace fs = std::filesystem;

namespace spg::eval {

EvalCondition snr_condition(double snr_db, uint64_t noise_seed) {
  EvalCondition c;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "snr%g", snr_db);
  c.name = buf;
  c.snr_db = snr_db;
  c.noise_seed = noise_seed;
  return c;
}

Evaluator load_evaluator(const std::string& recognizer_path, const std::string& embedder_path,
                         const std::string& probe_prior_path) {
  Evaluator ev;
  ev.recognizer = load_recognizer(recognizer_path);
  ev.embedder = load_embedder(embedder_path);
  if (!probe_prior_path.empty()) ev.probe_prior = priors::load_prior<float>(probe_prior_path);
  return ev;
}

TierReport evaluate_tier(codec::Codec<float>& cod, const codec::Tier& tier,
                         const std::string& corpus_dir,
                         const std::vector<corpus::ManifestEntry>& entries, Evaluator& ev,
                         const EvalCondition& cond, int bootstrap_resamples,
                         uint64_t bootstrap_seed) {
  if (entries.empty()) throw ConfigError("nothing to evaluate");
  if (!ev.recognizer || !ev.embedder) throw ConfigError("evaluator needs both judges loaded");

  TierReport rep;
  rep.split = entries.front().split;
  rep.condition = cond.name;
  rep.tier = tier.name;
  rep.kbps_nominal = tier.kbps;

  losses::MrStftLoss<float> mr;
  int hop = cod.config().hop();
  bool noisy = std::isfinite(cond.snr_db);

  std::vector<double> v_per, v_l1, v_mr, v_sdr, v_spk, v_pitch, v_feat, v_hall;
  long hall_cw = 0, hall_elig = 0;
  double kbps_sum = 0.0;

  for (const auto& e : entries) {
    auto wav = dsp::read_wav((fs::path(corpus_dir) / e.wav).string());
    const std::vector<float>& clean = wav.samples;

    std::vector<float> coder_in = clean;
    if (noisy)
      corpus::add_noise(coder_in.data(), coder_in.size(), cond.snr_db,
                        Rng(cond.noise_seed).derive(e.id));

    // Through the actual stream format: encode, pack, unpack, decode.
    Mat<float> x_in = codec::to_model_input<float>(coder_in, hop);
    Mat<float> z = cod.encode_latent(x_in);
    auto res = cod.rvq.quantize(z, tier.n_q);
    codec::BitstreamHeader h;
    h.K = uint32_t(cod.config().K);
    h.n_q = uint16_t(tier.n_q);
    h.frame_rate = uint32_t(cod.config().frame_rate);
    h.latent_frames = uint32_t(res.indices.cols);
    h.orig_samples = uint32_t(clean.size());
    std::string raw = codec::pack_bitstream(h, res.indices);

    Mat<int> rx_indices;
    codec::BitstreamHeader rx = codec::unpack_bitstream(raw, rx_indices);
    Mat<float> y_full = cod.decode_latent(cod.rvq.dequantize(rx_indices));
    if (y_full.cols < int(rx.orig_samples))
      throw DataError("decoded signal shorter than the coded source: " + e.id);

    int n = int(rx.orig_samples);
    const float* x = clean.data();
    const float* y = y_full.data();

    UttMetrics m;
    m.id = e.id;
    m.realized_kbps = codec::realized_kbps(raw.size(), rx.latent_frames, rx.frame_rate);
    m.l1 = losses::l1_loss<float>(x, y, n);
    m.mr_stft = mr.compute(x, y, n);
    m.si_sdr = si_sdr(x, y, n);

    Mat<float> xw = corpus::wave_input(clean);
    Mat<float> yw(1, n);
    for (int i = 0; i < n; ++i) yw.at(0, i) = y[i];

    Mat<float> lg_clean = ev.recognizer->logits(xw);
    Mat<float> lg_coded = ev.recognizer->logits(yw);
    m.clean_per = phone_error_rate(e.labels, losses::argmax_frames(lg_clean));
    m.per = phone_error_rate(e.labels, losses::argmax_frames(lg_coded));
    Hallucination hall = hallucination_stats(lg_clean, lg_coded, e.labels);
    m.hall_confident_wrong = hall.confident_wrong;
    m.hall_eligible = hall.eligible;

    m.speaker_cos = cosine_similarity(ev.embedder->embed(xw), ev.embedder->embed(yw));

    auto f0_ref = dsp::track_f0(x, n);
    auto f0_est = dsp::track_f0(y, n);
    PitchCorrelation pc = pitch_correlation(f0_ref, f0_est);
    m.pitch_computable = pc.computable;
    m.pitch_r = pc.r;

    if (ev.probe_prior) {
      Mat<float> fx = ev.probe_prior->features(xw);
      Mat<float> fy = ev.probe_prior->features(yw);
      priors::align_frames(fx, fy);
      m.feat_cos = priors::mean_frame_cosine(fx, fy);
      v_feat.push_back(m.feat_cos);
    }

    v_per.push_back(m.per);
    v_l1.push_back(m.l1);
    v_mr.push_back(m.mr_stft);
    v_sdr.push_back(m.si_sdr);
    v_spk.push_back(m.speaker_cos);
    if (m.pitch_computable) v_pitch.push_back(m.pitch_r);
    if (m.hall_eligible > 0) v_hall.push_back(double(m.hall_confident_wrong) / m.hall_eligible);
    hall_cw += m.hall_confident_wrong;
    hall_elig += m.hall_eligible;
    kbps_sum += m.realized_kbps;
    rep.per_utt.push_back(std::move(m));
  }

  int R = bootstrap_resamples;
  uint64_t S = bootstrap_seed;
  rep.utterances = int(rep.per_utt.size());
  rep.per = bootstrap_mean_ci(v_per, R, S);
  rep.l1 = bootstrap_mean_ci(v_l1, R, S);
  rep.mr_stft = bootstrap_mean_ci(v_mr, R, S);
  rep.si_sdr = bootstrap_mean_ci(v_sdr, R, S);
  rep.speaker_cos = bootstrap_mean_ci(v_spk, R, S);
  rep.pitch_r = bootstrap_mean_ci(v_pitch, R, S);
  if (!v_feat.empty()) rep.feat_cos = bootstrap_mean_ci(v_feat, R, S);
  rep.hall_rate = bootstrap_mean_ci(v_hall, R, S);
  rep.hallucination_pooled = hall_elig > 0 ? double(hall_cw) / double(hall_elig) : 0.0;
  rep.mean_realized_kbps = kbps_sum / double(rep.utterances);
  return rep;
}

namespace {

nlohmann::json ci_to_json(const Ci& c) {
  return {{"mean", c.mean}, {"lo", c.lo}, {"hi", c.hi}, {"n", c.n}};
}

Ci ci_from_json(const nlohmann::json& j) {
  Ci c;
  c.mean = j.value("mean", 0.0);
  c.lo = j.value("lo", 0.0);
  c.hi = j.value("hi", 0.0);
  c.n = j.value("n", 0);
  return c;
}

double json_num(const nlohmann::json& j, const char* key, double dflt) {
  if (!j.contains(key) || j.at(key).is_null()) return dflt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json tier_report_to_json(const TierReport& r) {
  nlohmann::json per_utt = nlohmann::json::array();
  for (const auto& m : r.per_utt) {
    per_utt.push_back({{"id", m.id},
                       {"per", m.per},
                       {"clean_per", m.clean_per},
                       {"l1", m.l1},
                       {"mr_stft", m.mr_stft},
                       {"si_sdr", m.si_sdr},
                       {"speaker_cos", m.speaker_cos},
                       {"hall_confident_wrong", m.hall_confident_wrong},
                       {"hall_eligible", m.hall_eligible},
                       {"pitch_computable", m.pitch_computable},
                       {"pitch_r", m.pitch_r},
                       {"feat_cos", std::isfinite(m.feat_cos) ? nlohmann::json(m.feat_cos)
                                                              : nlohmann::json()},
                       {"realized_kbps", m.realized_kbps}});
  }
  return {{"arm", r.arm},
          {"split", r.split},
          {"condition", r.condition},
          {"tier", r.tier},
          {"kbps_nominal", r.kbps_nominal},
          {"utterances", r.utterances},
          {"per", ci_to_json(r.per)},
          {"l1", ci_to_json(r.l1)},
          {"mr_stft", ci_to_json(r.mr_stft)},
          {"si_sdr", ci_to_json(r.si_sdr)},
          {"speaker_cos", ci_to_json(r.speaker_cos)},
          {"pitch_r", ci_to_json(r.pitch_r)},
          {"feat_cos", ci_to_json(r.feat_cos)},
          {"hall_rate", ci_to_json(r.hall_rate)},
          {"hallucination_pooled", r.hallucination_pooled},
          {"mean_realized_kbps", r.mean_realized_kbps},
          {"per_utt", per_utt}};
}

TierReport tier_report_from_json(const nlohmann::json& j) {
  TierReport r;
  r.arm = j.value("arm", "");
  r.split = j.value("split", "");
  r.condition = j.value("condition", "");
  r.tier = j.value("tier", "");
  r.kbps_nominal = j.value("kbps_nominal", 0.0);
  r.utterances = j.value("utterances", 0);
  r.per = ci_from_json(j.at("per"));
  r.l1 = ci_from_json(j.at("l1"));
  r.mr_stft = ci_from_json(j.at("mr_stft"));
  r.si_sdr = ci_from_json(j.at("si_sdr"));
  r.speaker_cos = ci_from_json(j.at("speaker_cos"));
  r.pitch_r = ci_from_json(j.at("pitch_r"));
  r.feat_cos = ci_from_json(j.at("feat_cos"));
  r.hall_rate = ci_from_json(j.at("hall_rate"));
  r.hallucination_pooled = j.value("hallucination_pooled", 0.0);
  r.mean_realized_kbps = j.value("mean_realized_kbps", 0.0);
  for (const auto& u : j.value("per_utt", nlohmann::json::array())) {
    UttMetrics m;
    m.id = u.value("id", "");
    m.per = u.value("per", 0.0);
    m.clean_per = u.value("clean_per", 0.0);
    m.l1 = u.value("l1", 0.0);
    m.mr_stft = u.value("mr_stft", 0.0);
    m.si_sdr = u.value("si_sdr", 0.0);
    m.speaker_cos = u.value("speaker_cos", 0.0);
    m.hall_confident_wrong = u.value("hall_confident_wrong", 0);
    m.hall_eligible = u.value("hall_eligible", 0);
    m.pitch_computable = u.value("pitch_computable", false);
    m.pitch_r = u.value("pitch_r", 0.0);
    m.feat_cos = json_num(u, "feat_cos", std::numeric_limits<double>::quiet_NaN());
    m.realized_kbps = u.value("realized_kbps", 0.0);
    r.per_utt.push_back(std::move(m));
  }
  return r;
}

void write_tier_report(const std::string& path, const TierReport& r) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << tier_report_to_json(r).dump(1) << "\n";
  }
  fs::rename(tmp, path);
}

TierReport read_tier_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return tier_report_from_json(j);
}

}  // namespace spg::eval
