#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "spg/util/mat.hpp"
#include "spg/util/rng.hpp"

namespace spg::corpus {

// Synthetic phone inventory: 0 is silence, 1..6 are vowels rendered as
// formant triples, 7..10 are fricatives rendered as shaped noise, 11 is a
// plosive rendered as closure plus burst.
enum class PhoneKind { silence, vowel, fricative, plosive };

struct PhoneSpec {
  int id;
  const char* name;
  PhoneKind kind;
  double f1, f2, f3;           // vowel formants, Hz
  double noise_center, noise_bw;  // fricative shaping, Hz
};

constexpr int kNumPhones = 12;
constexpr int kSilenceId = 0;
constexpr int kSampleRate = 16000;
constexpr int kFrameSamples = 320;  // 20 ms label frames
constexpr int kFrameRateHz = 50;

const std::vector<PhoneSpec>& phone_table();

// Voice identity. Seen (training) and unseen ranges are disjoint in both
// pitch and vocal tract scale so generalization splits are meaningful.
struct Speaker {
  double f0_base = 140.0;
  double f0_jitter = 0.02;
  double formant_scale = 1.0;
  double amplitude = 0.5;
};

struct SpeakerRange {
  double f0_lo, f0_hi;
  double fs_lo, fs_hi;
  double jit_lo, jit_hi;
  double amp_lo, amp_hi;
};

SpeakerRange seen_speaker_range();
SpeakerRange unseen_speaker_range();
// Superset of both, used when training evaluation models so their own
// speaker robustness is not the bottleneck.
SpeakerRange wide_speaker_range();

Speaker sample_speaker(const SpeakerRange& r, Rng rng);

// Phone sequence, per-segment durations in label frames, and a smooth
// per-frame pitch multiplier. The plan is voice-independent; rendering it
// with different speakers yields augmented versions of the same content.
struct UttPlan {
  std::vector<int> phones;
  std::vector<int> frames;
  std::vector<double> f0_mult;  // one per label frame
  int total_frames() const;
};

UttPlan plan_utterance(Rng rng, int min_frames, int max_frames);

struct Utterance {
  std::vector<float> samples;
  std::vector<int> labels;  // phone id per 20 ms frame
  Speaker speaker;
  UttPlan plan;
};

Utterance render_utterance(const UttPlan& plan, const Speaker& spk, Rng rng);

// Adds white noise at the given SNR relative to the signal RMS.
void add_noise(float* x, size_t n, double snr_db, Rng rng);

// One-call sampler for on-the-fly training data. With augment set, the
// rendered voice may be re-drawn, pitch-shifted and/or mixed with noise;
// the frame labels always describe the underlying plan.
struct SampleConfig {
  SpeakerRange range = wide_speaker_range();
  int min_frames = 30, max_frames = 70;
  bool augment = false;
  double p_pitch = 0.5, pitch_shift = 0.2;
  double p_redraw = 0.5;
  double p_noise = 0.7, snr_lo = 0.0, snr_hi = 20.0;
};

Utterance sample_utterance(const SampleConfig& cfg, Rng rng);

// Random frame-aligned crop of at most max_frames label frames. Speaker
// and plan carry over from the source utterance unchanged. frame_offset,
// when given, receives the first kept label frame.
Utterance crop_utterance(const Utterance& utt, int max_frames, Rng rng,
                         int* frame_offset = nullptr);

// [1][n] network input view of a waveform.
inline Mat<float> wave_input(const std::vector<float>& samples) {
  Mat<float> x(1, int(samples.size()));
  for (size_t i = 0; i < samples.size(); ++i) x.at(0, int(i)) = samples[i];
  return x;
}

struct SplitSpec {
  int speakers = 0;
  int utterances_per_speaker = 0;
};

struct CorpusConfig {
  int schema = 1;
  uint64_t seed = 1;
  int min_frames = 30;
  int max_frames = 100;
  SplitSpec train{40, 50};
  SplitSpec val{40, 5};
  SplitSpec test_seen{10, 10};
  SplitSpec test_unseen{10, 10};
};

CorpusConfig load_corpus_config(const std::string& path);
CorpusConfig corpus_config_from_json(const nlohmann::json& j);
nlohmann::json corpus_config_to_json(const CorpusConfig& cfg);

// Writes wav/<id>.wav files plus manifest.jsonl (one record per utterance:
// id, split, wav path, speaker parameters, frame labels).
void build_corpus(const CorpusConfig& cfg, const std::string& out_dir);

struct ManifestEntry {
  std::string id;
  std::string split;
  std::string wav;  // relative to the manifest directory
  int speaker = 0;
  bool unseen = false;
  Speaker voice;
  std::vector<int> labels;
};

std::vector<ManifestEntry> load_manifest(const std::string& manifest_path);
// Entries of one split, in manifest order.
std::vector<ManifestEntry> filter_split(const std::vector<ManifestEntry>& all,
                                        const std::string& split);

}  // namespace spg::corpus
