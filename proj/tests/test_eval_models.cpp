#include <doctest.h>

#include <filesystem>

#include "spg/eval/eval_models.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/rng.hpp"

using namespace spg;
using namespace spg::eval;

namespace {

Mat<float> test_wave(int n, uint64_t seed) {
  Rng rng(seed);
  Mat<float> x(1, n);
  for (int i = 0; i < n; ++i) x.at(0, i) = 0.3f * float(rng.normal());
  return x;
}

}  // namespace

TEST_CASE("recognizer maps waveform to one logit column per label frame") {
  Recognizer rec(7);
  Mat<float> x = test_wave(3200, 1);
  Mat<float> y = rec.logits(x);
  CHECK(y.rows == 12);
  CHECK(y.cols == 10);  // 3200 samples / 320 per frame

  Mat<float> y2 = Recognizer(7).logits(x);
  CHECK((y.v == y2.v));  // same seed, same init
  Mat<float> y3 = Recognizer(8).logits(x);
  CHECK_FALSE((y.v == y3.v));
}

TEST_CASE("embedder produces fixed-size embeddings and per-speaker logits") {
  SpeakerEmbedder emb(9, 64);
  Mat<float> x = test_wave(6400, 2);
  std::vector<float> e = emb.embed(x);
  CHECK(e.size() == 48);
  Mat<float> lg = emb.logits(x);
  CHECK(lg.rows == 64);
  CHECK(lg.cols == 1);

  // Embedding length does not depend on utterance length.
  CHECK(emb.embed(test_wave(3200, 3)).size() == 48);
  CHECK(SpeakerEmbedder(9, 64).embed(x) == emb.embed(x));
}

TEST_CASE("eval model checkpoints round trip") {
  auto dir = std::filesystem::temp_directory_path() / "spg_eval_models";
  std::filesystem::create_directories(dir);
  Mat<float> x = test_wave(3200, 4);

  Recognizer rec(21);
  Mat<float> before = rec.logits(x);
  std::string rec_path = (dir / "rec.spgb").string();
  rec.save(rec_path, {{"note", "test"}});
  auto loaded = load_recognizer(rec_path);
  CHECK(loaded->seed() == 21);
  CHECK((loaded->logits(x).v == before.v));

  SpeakerEmbedder emb(22, 16);
  std::vector<float> ebefore = emb.embed(x);
  std::string emb_path = (dir / "emb.spgb").string();
  emb.save(emb_path, {{"note", "test"}});
  auto eloaded = load_embedder(emb_path);
  CHECK(eloaded->n_speakers() == 16);
  CHECK((eloaded->embed(x) == ebefore));

  // Kind tags keep the two checkpoint types from being confused.
  CHECK_THROWS_AS(load_recognizer(emb_path), DataError);
  CHECK_THROWS_AS(load_embedder(rec_path), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("eval model config json round trip") {
  EvalModelConfig c;
  c.seed = 99;
  c.epochs = 3;
  c.embedder_speakers = 32;
  c.recognizer_min_acc = 0.7;
  EvalModelConfig r = eval_model_config_from_json(eval_model_config_to_json(c));
  CHECK(r.seed == 99);
  CHECK(r.epochs == 3);
  CHECK(r.embedder_speakers == 32);
  CHECK(r.recognizer_min_acc == doctest::Approx(0.7));
  CHECK(r.batch == c.batch);
  CHECK(r.snr_hi == doctest::Approx(c.snr_hi));
}
