#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "spg/corpus/corpus.hpp"
#include "spg/dsp/wav.hpp"
#include "spg/util/errors.hpp"

using namespace spg;
using namespace spg::corpus;
namespace fs = std::filesystem;

namespace {


fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("spg_corpus_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("phone table is consistent") {
  const auto& tab = phone_table();
  REQUIRE(int(tab.size()) == kNumPhones);
  std::set<std::string> names;
  for (int i = 0; i < kNumPhones; ++i) {
    CHECK(tab[i].id == i);
    names.insert(tab[i].name);
    if (tab[i].kind == PhoneKind::vowel) {
      CHECK(tab[i].f1 > 0);
      CHECK(tab[i].f1 < tab[i].f2);
      CHECK(tab[i].f2 < tab[i].f3);
    }
    if (tab[i].kind == PhoneKind::fricative) CHECK(tab[i].noise_center > 0);
  }
  CHECK(names.size() == size_t(kNumPhones));
  CHECK(tab[kSilenceId].kind == PhoneKind::silence);
}

TEST_CASE("seen and unseen speaker ranges are disjoint, wide covers both") {
  auto seen = seen_speaker_range();
  auto unseen = unseen_speaker_range();
  auto wide = wide_speaker_range();
  CHECK(seen.f0_hi < unseen.f0_lo);
  CHECK(seen.fs_hi < unseen.fs_lo);
  CHECK(wide.f0_lo <= seen.f0_lo);
  CHECK(wide.f0_hi >= unseen.f0_hi);
  CHECK(wide.fs_lo <= seen.fs_lo);
  CHECK(wide.fs_hi >= unseen.fs_hi);
}

TEST_CASE("sampled speakers stay inside their range and are deterministic") {
  auto r = seen_speaker_range();
  for (int i = 0; i < 50; ++i) {
    Speaker s = sample_speaker(r, Rng(7).derive("spk", i));
    CHECK(s.f0_base >= r.f0_lo);
    CHECK(s.f0_base <= r.f0_hi);
    CHECK(s.formant_scale >= r.fs_lo);
    CHECK(s.formant_scale <= r.fs_hi);
    CHECK(s.amplitude >= r.amp_lo);
    CHECK(s.amplitude <= r.amp_hi);
  }
  Speaker a = sample_speaker(r, Rng(7).derive("spk", 3));
  Speaker b = sample_speaker(r, Rng(7).derive("spk", 3));
  CHECK(a.f0_base == b.f0_base);
  CHECK(a.formant_scale == b.formant_scale);
}

TEST_CASE("utterance plans respect length bounds and structure") {
  for (int i = 0; i < 40; ++i) {
    UttPlan p = plan_utterance(Rng(11).derive("plan", i), 30, 70);
    int total = p.total_frames();
    CHECK(total >= 30);
    CHECK(total <= 70 + 14);  // one segment plus trailing silence of overshoot
    REQUIRE(p.phones.size() == p.frames.size());
    CHECK(p.phones.front() == kSilenceId);
    CHECK(p.phones.back() == kSilenceId);
    CHECK(int(p.f0_mult.size()) == total);
    bool has_speech = false;
    for (size_t s = 0; s < p.phones.size(); ++s) {
      CHECK(p.phones[s] >= 0);
      CHECK(p.phones[s] < kNumPhones);
      CHECK(p.frames[s] >= 1);
      if (p.phones[s] != kSilenceId) has_speech = true;
      if (s > 0 && p.phones[s] != kSilenceId) CHECK(p.phones[s] != p.phones[s - 1]);
    }
    CHECK(has_speech);
    for (double m : p.f0_mult) {
      CHECK(m >= 0.75);
      CHECK(m <= 1.30);
    }
  }
}

TEST_CASE("rendering produces labeled audio with sane level contrast") {
  UttPlan p = plan_utterance(Rng(21).derive("plan"), 40, 60);
  Speaker spk = sample_speaker(seen_speaker_range(), Rng(21).derive("spk"));
  Utterance u = render_utterance(p, spk, Rng(21).derive("render"));

  REQUIRE(int(u.labels.size()) == p.total_frames());
  REQUIRE(u.samples.size() == u.labels.size() * size_t(kFrameSamples));

  double speech_sq = 0, sil_sq = 0;
  size_t speech_n = 0, sil_n = 0;
  for (size_t t = 0; t < u.labels.size(); ++t) {
    const float* f = u.samples.data() + t * kFrameSamples;
    double sq = 0;
    for (int i = 0; i < kFrameSamples; ++i) sq += double(f[i]) * f[i];
    if (u.labels[t] == kSilenceId) {
      sil_sq += sq;
      sil_n += kFrameSamples;
    } else {
      speech_sq += sq;
      speech_n += kFrameSamples;
    }
  }
  double speech_rms = std::sqrt(speech_sq / speech_n);
  double sil_rms = std::sqrt(sil_sq / sil_n);
  double target = 0.22 * spk.amplitude;
  CHECK(speech_rms > 0.5 * target);
  CHECK(speech_rms < 1.6 * target);
  CHECK(sil_rms < 0.25 * speech_rms);
  float peak = 0;
  for (float v : u.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak <= 1.0f);

  Utterance u2 = render_utterance(p, spk, Rng(21).derive("render"));
  CHECK((u.samples == u2.samples));
}

TEST_CASE("vowel rendering is periodic at the speaker pitch") {
  // One long vowel; autocorrelation at the pitch lag should be strong.
  UttPlan p;
  p.phones = {kSilenceId, 3, kSilenceId};
  p.frames = {1, 30, 1};
  p.f0_mult.assign(32, 1.0);
  Speaker spk;
  spk.f0_base = 125.0;
  spk.f0_jitter = 0.0;
  spk.formant_scale = 1.0;
  spk.amplitude = 0.5;
  Utterance u = render_utterance(p, spk, Rng(5));

  int lag = int(std::lround(16000.0 / 125.0));
  const float* x = u.samples.data() + 8 * kFrameSamples;  // steady interior
  int n = 16 * kFrameSamples;
  double r0 = 0, rl = 0;
  for (int i = 0; i < n; ++i) r0 += double(x[i]) * x[i];
  for (int i = 0; i < n - lag; ++i) rl += double(x[i]) * x[i + lag];
  CHECK(rl / r0 > 0.5);
}

TEST_CASE("add_noise hits the requested signal to noise ratio") {
  std::vector<float> clean(16000);
  for (size_t i = 0; i < clean.size(); ++i)
    clean[i] = float(0.3 * std::sin(2.0 * 3.14159265358979 * 220.0 * double(i) / 16000.0));
  for (double snr : {0.0, 10.0, 20.0}) {
    std::vector<float> noisy = clean;
    add_noise(noisy.data(), noisy.size(), snr, Rng(42).derive("n", uint64_t(snr)));
    double sig_sq = 0, noi_sq = 0;
    for (size_t i = 0; i < clean.size(); ++i) {
      sig_sq += double(clean[i]) * clean[i];
      double d = double(noisy[i]) - clean[i];
      noi_sq += d * d;
    }
    double measured = 10.0 * std::log10(sig_sq / noi_sq);
    CHECK(measured == doctest::Approx(snr).epsilon(0.08));
  }
}

TEST_CASE("on-the-fly sampler is deterministic and label-aligned") {
  SampleConfig cfg;
  cfg.min_frames = 30;
  cfg.max_frames = 50;
  Utterance a = sample_utterance(cfg, Rng(9).derive("u", 4));
  Utterance b = sample_utterance(cfg, Rng(9).derive("u", 4));
  CHECK((a.samples == b.samples));
  CHECK((a.labels == b.labels));
  CHECK(a.samples.size() == a.labels.size() * size_t(kFrameSamples));

  cfg.augment = true;
  Utterance c = sample_utterance(cfg, Rng(9).derive("u", 4));
  Utterance d = sample_utterance(cfg, Rng(9).derive("u", 4));
  CHECK((c.samples == d.samples));
  CHECK((c.labels == a.labels));  // augmentation never changes the plan labels
}

TEST_CASE("corpus build writes a loadable, deterministic manifest") {
  CorpusConfig cfg;
  cfg.seed = 77;
  cfg.min_frames = 30;
  cfg.max_frames = 40;
  cfg.train = {3, 2};
  cfg.val = {2, 1};
  cfg.test_seen = {2, 1};
  cfg.test_unseen = {2, 1};

  auto dir = temp_dir("build");
  build_corpus(cfg, dir.string());
  auto all = load_manifest((dir / "manifest.jsonl").string());
  CHECK(all.size() == size_t(3 * 2 + 2 + 2 + 2));
  CHECK(filter_split(all, "train").size() == 6);
  CHECK(filter_split(all, "val").size() == 2);
  CHECK(filter_split(all, "test_seen").size() == 2);
  CHECK(filter_split(all, "test_unseen").size() == 2);

  for (const auto& e : all) {
    CHECK(e.unseen == (e.split == "test_unseen"));
    auto wav = dsp::read_wav((dir / e.wav).string());
    CHECK(wav.sample_rate == kSampleRate);
    CHECK(wav.samples.size() == e.labels.size() * size_t(kFrameSamples));
    if (e.unseen) {
      CHECK(e.voice.f0_base >= unseen_speaker_range().f0_lo);
    } else {
      CHECK(e.voice.f0_base <= seen_speaker_range().f0_hi);
    }
  }

  // val reuses the train voices per speaker index.
  auto train = filter_split(all, "train");
  auto val = filter_split(all, "val");
  CHECK(val[0].voice.f0_base == train[0].voice.f0_base);

  auto dir2 = temp_dir("build2");
  build_corpus(cfg, dir2.string());
  std::ifstream f1(dir / "manifest.jsonl"), f2(dir2 / "manifest.jsonl");
  std::string m1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string m2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK((m1 == m2));
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST_CASE("corpus config parsing validates schema and splits") {
  auto dir = temp_dir("cfg");
  auto write = [&](const char* name, const std::string& body) {
    std::ofstream f(dir / name);
    f << body;
    return (dir / name).string();
  };

  auto ok = write("ok.json",
                  R"({"schema":1,"seed":5,"train":{"speakers":4,"utterances_per_speaker":3},)"
                  R"("val":{"speakers":2,"utterances_per_speaker":1},)"
                  R"("test_seen":{"speakers":2,"utterances_per_speaker":1},)"
                  R"("test_unseen":{"speakers":2,"utterances_per_speaker":1}})");
  CorpusConfig cfg = load_corpus_config(ok);
  CHECK(cfg.seed == 5);
  CHECK(cfg.train.speakers == 4);
  CHECK(cfg.train.utterances_per_speaker == 3);
  CHECK(cfg.val.speakers == 2);

  CHECK_THROWS_AS(load_corpus_config(write("bad1.json", R"({"schema":2})")), ConfigError);
  CHECK_THROWS_AS(load_corpus_config(write("bad2.json", "not json")), ConfigError);
  CHECK_THROWS_AS(load_corpus_config(write("bad3.json", R"({"schema":1,"min_frames":50,"max_frames":20})")),
                  ConfigError);
  CHECK_THROWS_AS(
      load_corpus_config(write("bad4.json",
                               R"({"schema":1,"train":{"speakers":2},"val":{"speakers":5}})")),
      ConfigError);
  CHECK_THROWS_AS(load_corpus_config((dir / "missing.json").string()), ConfigError);
  fs::remove_all(dir);
}
