#include "spg/corpus/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "spg/dsp/wav.hpp"
#include "spg/util/errors.hpp"

namespace spg::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<PhoneSpec>& phone_table() {
  static const std::vector<PhoneSpec> table = {
      {0, "sil", PhoneKind::silence, 0, 0, 0, 0, 0},
      {1, "aa", PhoneKind::vowel, 730, 1090, 2440, 0, 0},
      {2, "eh", PhoneKind::vowel, 530, 1840, 2480, 0, 0},
      {3, "iy", PhoneKind::vowel, 270, 2290, 3010, 0, 0},
      {4, "ao", PhoneKind::vowel, 570, 840, 2410, 0, 0},
      {5, "uw", PhoneKind::vowel, 300, 870, 2240, 0, 0},
      {6, "ae", PhoneKind::vowel, 660, 1720, 2410, 0, 0},
      {7, "ss", PhoneKind::fricative, 0, 0, 0, 6200, 1800},
      {8, "sh", PhoneKind::fricative, 0, 0, 0, 3200, 1400},
      {9, "ff", PhoneKind::fricative, 0, 0, 0, 4500, 4000},
      {10, "hh", PhoneKind::fricative, 0, 0, 0, 900, 700},
      {11, "tt", PhoneKind::plosive, 0, 0, 0, 4200, 2600},
  };
  return table;
}

SpeakerRange seen_speaker_range() { return {95, 185, 0.92, 1.08, 0.01, 0.05, 0.25, 0.70}; }
SpeakerRange unseen_speaker_range() { return {195, 255, 1.10, 1.22, 0.01, 0.05, 0.25, 0.70}; }
SpeakerRange wide_speaker_range() { return {90, 260, 0.90, 1.24, 0.01, 0.05, 0.22, 0.75}; }

Speaker sample_speaker(const SpeakerRange& r, Rng rng) {
  Speaker s;
  s.f0_base = rng.uniform(r.f0_lo, r.f0_hi);
  s.formant_scale = rng.uniform(r.fs_lo, r.fs_hi);
  s.f0_jitter = rng.uniform(r.jit_lo, r.jit_hi);
  s.amplitude = rng.uniform(r.amp_lo, r.amp_hi);
  return s;
}

int UttPlan::total_frames() const {
  int n = 0;
  for (int f : frames) n += f;
  return n;
}

UttPlan plan_utterance(Rng rng, int min_frames, int max_frames) {
  UttPlan plan;
  int target = rng.range(min_frames, max_frames);
  auto push = [&](int phone, int frames) {
    plan.phones.push_back(phone);
    plan.frames.push_back(frames);
  };
  push(kSilenceId, rng.range(1, 2));
  int last = kSilenceId;
  while (plan.total_frames() < target) {
    int phone;
    if (rng.uniform() < 0.08 && last != kSilenceId) {
      phone = kSilenceId;
    } else {
      do {
        phone = rng.range(1, kNumPhones - 1);
      } while (phone == last);
    }
    const PhoneSpec& spec = phone_table()[phone];
    int frames;
    switch (spec.kind) {
      case PhoneKind::vowel: frames = rng.range(4, 12); break;
      case PhoneKind::fricative: frames = rng.range(3, 8); break;
      case PhoneKind::plosive: frames = 2; break;
      default: frames = rng.range(2, 4); break;
    }
    push(phone, frames);
    last = phone;
  }
  push(kSilenceId, rng.range(1, 2));

  // Smooth pitch contour: slow random walk plus phrase declination.
  int total = plan.total_frames();
  plan.f0_mult.resize(total);
  double walk = 0.0;
  for (int t = 0; t < total; ++t) {
    walk = 0.92 * walk + 0.08 * rng.normal();
    double decl = 1.0 - 0.12 * double(t) / total;
    plan.f0_mult[t] = std::clamp(decl * std::exp(0.10 * walk), 0.75, 1.30);
  }
  return plan;
}

namespace {

// Two-pole resonator (digital formant filter).
struct Resonator {
  double b1 = 0, b2 = 0, a0 = 1;
  double y1 = 0, y2 = 0;

  void set(double freq, double bw, double sr) {
    double r = std::exp(-std::numbers::pi * bw / sr);
    b2 = -r * r;
    b1 = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / sr);
    a0 = 1.0 - b1 - b2;
  }
  double step(double x) {
    double y = a0 * x + b1 * y1 + b2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

struct VowelTract {
  Resonator r1, r2, r3;
  void set(double f1, double f2, double f3, double scale, double sr) {
    r1.set(f1 * scale, 80, sr);
    r2.set(f2 * scale, 110, sr);
    r3.set(f3 * scale, 160, sr);
  }
  double step(double x) { return r3.step(r2.step(r1.step(x))); }
};

}  // namespace

Utterance render_utterance(const UttPlan& plan, const Speaker& spk, Rng rng) {
  const double sr = kSampleRate;
  int total_frames = plan.total_frames();
  Utterance utt;
  utt.speaker = spk;
  utt.plan = plan;
  utt.labels.reserve(total_frames);
  for (size_t seg = 0; seg < plan.phones.size(); ++seg)
    for (int f = 0; f < plan.frames[seg]; ++f) utt.labels.push_back(plan.phones[seg]);

  size_t n = size_t(total_frames) * kFrameSamples;
  utt.samples.assign(n, 0.0f);

  VowelTract tract;
  Resonator fric;
  double cur_f1 = 500, cur_f2 = 1500, cur_f3 = 2500;
  double phase = 1.0;  // emit a pulse on the first voiced sample
  double voiced_env = 0.0, noise_env = 0.0;
  Rng jit = rng.derive("jitter");
  Rng noise = rng.derive("noise");

  int frame_of_seg_start = 0;
  for (size_t seg = 0; seg < plan.phones.size(); ++seg) {
    const PhoneSpec& spec = phone_table()[plan.phones[seg]];
    bool voiced = spec.kind == PhoneKind::vowel;
    bool is_fric = spec.kind == PhoneKind::fricative;
    bool is_plos = spec.kind == PhoneKind::plosive;
    if (is_fric || is_plos) fric.set(spec.noise_center, spec.noise_bw, sr);

    for (int f = 0; f < plan.frames[seg]; ++f) {
      int t = frame_of_seg_start + f;
      double f0 = spk.f0_base * plan.f0_mult[t] * (1.0 + spk.f0_jitter * jit.normal() * 0.5);
      double tgt1 = voiced ? spec.f1 : 500, tgt2 = voiced ? spec.f2 : 1500,
             tgt3 = voiced ? spec.f3 : 2500;
      double tgt_voiced = voiced ? 1.0 : 0.0;
      // Plosive: first frame is closure, second is a burst.
      bool burst_frame = is_plos && f == 1;
      double tgt_noise = is_fric ? 1.0 : 0.0;

      float* out = utt.samples.data() + size_t(t) * kFrameSamples;
      for (int i = 0; i < kFrameSamples; ++i) {
        // 2.5 ms smoothing of formant targets and envelopes.
        double a = 1.0 / (0.0025 * sr);
        cur_f1 += a * (tgt1 - cur_f1);
        cur_f2 += a * (tgt2 - cur_f2);
        cur_f3 += a * (tgt3 - cur_f3);
        voiced_env += a * (tgt_voiced - voiced_env);
        noise_env += a * (tgt_noise - noise_env);
        if ((i & 63) == 0) tract.set(cur_f1, cur_f2, cur_f3, spk.formant_scale, sr);

        double src = 0.0;
        phase += f0 / sr;
        if (phase >= 1.0) {
          phase -= 1.0;
          src = 14.0 * std::sqrt(120.0 / std::max(f0, 60.0));
        }
        double v = tract.step(src * voiced_env + 0.5 * noise.normal() * voiced_env * 0.02);

        double fr = fric.step(noise.normal()) * 0.35 * noise_env;
        double b = 0.0;
        if (burst_frame && i < 140) {
          double env = i < 24 ? double(i) / 24.0 : std::exp(-(i - 24) / 45.0);
          b = fric.step(noise.normal()) * 1.1 * env;
        }
        out[i] = float(v + fr + b);
      }
    }
    frame_of_seg_start += plan.frames[seg];
  }

  // Scale so non-silence RMS hits the speaker's amplitude target.
  double sumsq = 0.0;
  size_t count = 0;
  for (int t = 0; t < total_frames; ++t) {
    if (utt.labels[t] == kSilenceId) continue;
    const float* p = utt.samples.data() + size_t(t) * kFrameSamples;
    for (int i = 0; i < kFrameSamples; ++i) sumsq += double(p[i]) * p[i];
    count += kFrameSamples;
  }
  double rms = count ? std::sqrt(sumsq / count) : 0.0;
  double gain = rms > 1e-9 ? 0.22 * spk.amplitude / rms : 1.0;
  float peak = 0.0f;
  for (auto& v : utt.samples) {
    v = float(v * gain);
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0.98f)
    for (auto& v : utt.samples) v *= 0.98f / peak;

  // -60 dBFS floor keeps silence from being numerically zero.
  Rng dither = rng.derive("dither");
  for (auto& v : utt.samples) v += float(dither.normal() * 1e-3);
  return utt;
}

Utterance sample_utterance(const SampleConfig& cfg, Rng rng) {
  UttPlan plan = plan_utterance(rng.derive("plan"), cfg.min_frames, cfg.max_frames);
  Speaker spk = sample_speaker(cfg.range, rng.derive("speaker"));
  if (cfg.augment) {
    Rng aug = rng.derive("augment");
    if (aug.uniform() < cfg.p_redraw) spk = sample_speaker(cfg.range, rng.derive("redraw"));
    if (aug.uniform() < cfg.p_pitch)
      spk.f0_base *= aug.uniform(1.0 - cfg.pitch_shift, 1.0 + cfg.pitch_shift);
  }
  Utterance utt = render_utterance(plan, spk, rng.derive("render"));
  if (cfg.augment) {
    Rng aug = rng.derive("noise_aug");
    if (aug.uniform() < cfg.p_noise)
      add_noise(utt.samples.data(), utt.samples.size(), aug.uniform(cfg.snr_lo, cfg.snr_hi),
                aug.derive("draw"));
  }
  return utt;
}

Utterance crop_utterance(const Utterance& utt, int max_frames, Rng rng, int* frame_offset) {
  Utterance out;
  out.speaker = utt.speaker;
  out.plan = utt.plan;
  int total = int(utt.labels.size());
  int frames = std::min(max_frames, total);
  int max_off = total - frames;
  int off = max_off > 0 ? int(rng.below(uint64_t(max_off) + 1)) : 0;
  if (frame_offset) *frame_offset = off;
  out.labels.assign(utt.labels.begin() + off, utt.labels.begin() + off + frames);
  out.samples.assign(utt.samples.begin() + size_t(off) * kFrameSamples,
                     utt.samples.begin() + size_t(off + frames) * kFrameSamples);
  return out;
}

void add_noise(float* x, size_t n, double snr_db, Rng rng) {
  if (n == 0) return;
  double sumsq = 0.0;
  for (size_t i = 0; i < n; ++i) sumsq += double(x[i]) * x[i];
  double rms = std::sqrt(sumsq / double(n));
  if (rms < 1e-9) return;
  double sigma = rms / std::pow(10.0, snr_db / 20.0);
  for (size_t i = 0; i < n; ++i) x[i] += float(sigma * rng.normal());
}

CorpusConfig load_corpus_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open corpus config: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("corpus config is not valid JSON: " + std::string(e.what()));
  }
  return corpus_config_from_json(j);
}

CorpusConfig corpus_config_from_json(const json& j) {
  CorpusConfig cfg;
  if (j.value("schema", 0) != 1) throw ConfigError("corpus config schema must be 1");
  cfg.seed = j.value("seed", uint64_t(1));
  cfg.min_frames = j.value("min_frames", 30);
  cfg.max_frames = j.value("max_frames", 100);
  auto split = [&](const char* name, SplitSpec def) {
    if (!j.contains(name)) return def;
    SplitSpec s;
    s.speakers = j[name].value("speakers", def.speakers);
    s.utterances_per_speaker = j[name].value("utterances_per_speaker", def.utterances_per_speaker);
    return s;
  };
  cfg.train = split("train", cfg.train);
  cfg.val = split("val", cfg.val);
  cfg.test_seen = split("test_seen", cfg.test_seen);
  cfg.test_unseen = split("test_unseen", cfg.test_unseen);
  if (cfg.min_frames < 10 || cfg.max_frames < cfg.min_frames)
    throw ConfigError("corpus config needs 10 <= min_frames <= max_frames");
  if (cfg.val.speakers > cfg.train.speakers || cfg.test_seen.speakers > cfg.train.speakers)
    throw ConfigError("val and test_seen speakers must be a subset of train speakers");
  return cfg;
}

json corpus_config_to_json(const CorpusConfig& cfg) {
  auto split = [](const SplitSpec& s) {
    return json{{"speakers", s.speakers}, {"utterances_per_speaker", s.utterances_per_speaker}};
  };
  return {{"schema", cfg.schema},     {"seed", cfg.seed},
          {"min_frames", cfg.min_frames}, {"max_frames", cfg.max_frames},
          {"train", split(cfg.train)},    {"val", split(cfg.val)},
          {"test_seen", split(cfg.test_seen)}, {"test_unseen", split(cfg.test_unseen)}};
}

void build_corpus(const CorpusConfig& cfg, const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "wav");
  Rng root(cfg.seed);

  std::vector<Speaker> seen(cfg.train.speakers);
  for (int i = 0; i < cfg.train.speakers; ++i)
    seen[i] = sample_speaker(seen_speaker_range(), root.derive("seen_speaker", i));
  std::vector<Speaker> unseen(cfg.test_unseen.speakers);
  for (int i = 0; i < cfg.test_unseen.speakers; ++i)
    unseen[i] = sample_speaker(unseen_speaker_range(), root.derive("unseen_speaker", i));

  std::ofstream mf(fs::path(out_dir) / "manifest.jsonl", std::ios::trunc);
  if (!mf) throw DataError("cannot write manifest in " + out_dir);

  auto emit = [&](const std::string& split, int speaker_idx, bool is_unseen, int utt_idx) {
    const Speaker& spk = is_unseen ? unseen[speaker_idx] : seen[speaker_idx];
    Rng r = root.derive(split).derive("utt", uint64_t(speaker_idx) << 20 | uint64_t(utt_idx));
    UttPlan plan = plan_utterance(r.derive("plan"), cfg.min_frames, cfg.max_frames);
    Utterance utt = render_utterance(plan, spk, r.derive("render"));

    char id[64];
    std::snprintf(id, sizeof(id), "%s_s%02d_u%03d", split.c_str(), speaker_idx, utt_idx);
    std::string wav_rel = std::string("wav/") + id + ".wav";
    dsp::write_wav((fs::path(out_dir) / wav_rel).string(), utt.samples.data(),
                   utt.samples.size(), kSampleRate);
    json rec = {
        {"id", id},
        {"split", split},
        {"wav", wav_rel},
        {"speaker", speaker_idx},
        {"unseen", is_unseen},
        {"f0_base", utt.speaker.f0_base},
        {"f0_jitter", utt.speaker.f0_jitter},
        {"formant_scale", utt.speaker.formant_scale},
        {"amplitude", utt.speaker.amplitude},
        {"labels", utt.labels},
    };
    mf << rec.dump() << "\n";
  };

  for (int s = 0; s < cfg.train.speakers; ++s)
    for (int u = 0; u < cfg.train.utterances_per_speaker; ++u) emit("train", s, false, u);
  for (int s = 0; s < cfg.val.speakers; ++s)
    for (int u = 0; u < cfg.val.utterances_per_speaker; ++u) emit("val", s, false, u);
  for (int s = 0; s < cfg.test_seen.speakers; ++s)
    for (int u = 0; u < cfg.test_seen.utterances_per_speaker; ++u) emit("test_seen", s, false, u);
  for (int s = 0; s < cfg.test_unseen.speakers; ++s)
    for (int u = 0; u < cfg.test_unseen.utterances_per_speaker; ++u)
      emit("test_unseen", s, true, u);
  if (!mf) throw DataError("short write to manifest in " + out_dir);
}

std::vector<ManifestEntry> load_manifest(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw DataError("cannot open manifest: " + manifest_path);
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw DataError("bad manifest line: " + std::string(e.what()));
    }
    ManifestEntry e;
    e.id = j.at("id");
    e.split = j.at("split");
    e.wav = j.at("wav");
    e.speaker = j.at("speaker");
    e.unseen = j.at("unseen");
    e.voice.f0_base = j.at("f0_base");
    e.voice.f0_jitter = j.at("f0_jitter");
    e.voice.formant_scale = j.at("formant_scale");
    e.voice.amplitude = j.at("amplitude");
    e.labels = j.at("labels").get<std::vector<int>>();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ManifestEntry> filter_split(const std::vector<ManifestEntry>& all,
                                        const std::string& split) {
  std::vector<ManifestEntry> out;
  for (const auto& e : all)
    if (e.split == split) out.push_back(e);
  return out;
}

}  // namespace spg::corpus
