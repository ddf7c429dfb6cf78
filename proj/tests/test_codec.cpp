#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "spg/codec/bitstream.hpp"
#include "spg/codec/codec.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/rng.hpp"

using namespace spg;
using namespace spg::codec;

namespace {

CodecConfig small_config() {
  CodecConfig cfg;
  cfg.channels = {4, 6, 8, 12};
  cfg.latent_dim = 16;
  cfg.K = 64;
  cfg.n_q_max = 8;
  return cfg;
}

Mat<float> noise_input(int n, Rng rng) {
  Mat<float> x(1, n);
  for (auto& v : x.v) v = float(rng.normal() * 0.2);
  return x;
}

}  // namespace

TEST_CASE("bitrate tiers map stage counts to exact rates") {
  REQUIRE(tiers().size() == 4);
  double expect_kbps[] = {1.5, 3.0, 6.0, 12.0};
  int expect_n_q[] = {3, 6, 12, 24};
  for (size_t i = 0; i < 4; ++i) {
    CHECK(tiers()[i].kbps == expect_kbps[i]);
    CHECK(tiers()[i].n_q == expect_n_q[i]);
    // The advertised rate is exactly the payload rate of the default stream.
    CHECK(bits_per_second(1024, tiers()[i].n_q, 50) == expect_kbps[i] * 1000.0);
  }
  CHECK(tier_by_name("1.5kbps").n_q == 3);
  CHECK(tier_by_name("1.5").n_q == 3);
  CHECK(tier_by_name("12").n_q == 24);
  CHECK(tier_by_n_q(6).kbps == 3.0);
  CHECK_THROWS_AS(tier_by_name("2kbps"), ConfigError);
  CHECK_THROWS_AS(tier_by_n_q(5), ConfigError);
}

TEST_CASE("encoder and decoder preserve the frame geometry") {
  Codec<float> codec(small_config());
  codec.init_params(Rng(1));

  int n = 10 * 320;
  Mat<float> x = noise_input(n, Rng(2));
  Mat<float> z = codec.encode_latent(x);
  CHECK(z.rows == 16);
  CHECK(z.cols == 10);

  Mat<float> y = codec.decode_latent(z);
  CHECK(y.rows == 1);
  CHECK(y.cols == n);
  for (float v : y.v) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }

  CodecConfig bad = small_config();
  bad.strides = {2, 4, 5, 4};
  CHECK_THROWS_AS(Codec<float>{bad}, ConfigError);
  bad = small_config();
  bad.channels = {4, 6};
  CHECK_THROWS_AS(Codec<float>{bad}, ConfigError);
}

TEST_CASE("model input padding rounds up to whole frames") {
  std::vector<float> s(3210, 0.5f);
  Mat<float> x = to_model_input<float>(s, 320);
  CHECK(x.cols == 3520);
  CHECK(x.at(0, 3209) == 0.5f);
  CHECK(x.at(0, 3210) == 0.0f);
  CHECK(x.at(0, 3519) == 0.0f);
}

TEST_CASE("checkpoints restore the exact model") {
  auto dir = std::filesystem::temp_directory_path() / "spg_codec_ckpt";
  std::filesystem::create_directories(dir);
  auto path = (dir / "codec.spgb").string();

  Codec<float> a(small_config());
  a.init_params(Rng(3));
  a.save(path, {{"note", "test"}});

  auto [b, meta] = load_codec<float>(path);
  CHECK(meta.value("note", "") == "test");
  CHECK(b->config().latent_dim == 16);

  Mat<float> x = noise_input(6 * 320, Rng(4));
  Mat<float> za = a.encode_latent(x);
  Mat<float> zb = b->encode_latent(x);
  REQUIRE(za.v.size() == zb.v.size());
  CHECK(std::memcmp(za.data(), zb.data(), za.v.size() * sizeof(float)) == 0);

  auto ra = a.rvq.quantize(za, 4);
  auto rb = b->rvq.quantize(zb, 4);
  CHECK((ra.indices.v == rb.indices.v));

  Mat<float> ya = a.decode_latent(ra.zq);
  Mat<float> yb = b->decode_latent(rb.zq);
  CHECK(std::memcmp(ya.data(), yb.data(), ya.v.size() * sizeof(float)) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("coded streams decode to the quantized reconstruction bitwise") {
  Codec<float> codec(small_config());
  codec.init_params(Rng(5));

  int orig = 7 * 320 - 13;  // not frame aligned
  std::vector<float> samples(orig);
  {
    Rng rng(6);
    for (auto& v : samples) v = float(rng.normal() * 0.2);
  }

  // Encode path.
  Mat<float> x = to_model_input<float>(samples, codec.config().hop());
  Mat<float> z = codec.encode_latent(x);
  auto q = codec.rvq.quantize(z, 4);
  BitstreamHeader h;
  h.K = uint32_t(codec.config().K);
  h.n_q = 4;
  h.frame_rate = uint32_t(codec.config().frame_rate);
  h.latent_frames = uint32_t(z.cols);
  h.orig_samples = uint32_t(orig);
  std::string raw = pack_bitstream(h, q.indices);

  // Decode path from the stream alone.
  Mat<int> idx;
  BitstreamHeader g = unpack_bitstream(raw, idx);
  Mat<float> zq = codec.rvq.dequantize(idx);
  CHECK(std::memcmp(zq.data(), q.zq.data(), zq.v.size() * sizeof(float)) == 0);
  Mat<float> y_direct = codec.decode_latent(q.zq);
  Mat<float> y_stream = codec.decode_latent(zq);
  CHECK(std::memcmp(y_stream.data(), y_direct.data(), y_stream.v.size() * sizeof(float)) == 0);

  // The header carries everything needed to trim the padding.
  CHECK(g.orig_samples == uint32_t(orig));
  CHECK(int(g.latent_frames) * codec.config().hop() == y_stream.cols);
  CHECK(int(g.orig_samples) <= y_stream.cols);
}

TEST_CASE("codec config survives the json round-trip") {
  CodecConfig cfg = small_config();
  cfg.seed = 99;
  CodecConfig back = codec_config_from_json(codec_config_to_json(cfg));
  CHECK(back.sample_rate == cfg.sample_rate);
  CHECK(back.frame_rate == cfg.frame_rate);
  CHECK(back.strides == cfg.strides);
  CHECK(back.channels == cfg.channels);
  CHECK(back.latent_dim == cfg.latent_dim);
  CHECK(back.K == cfg.K);
  CHECK(back.n_q_max == cfg.n_q_max);
  CHECK(back.seed == cfg.seed);
}
