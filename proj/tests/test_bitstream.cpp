#include <doctest.h>

#include <filesystem>
#include <string>

#include "spg/codec/bitstream.hpp"
#include "spg/codec/rvq.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/rng.hpp"

using namespace spg;
using namespace spg::codec;

namespace {

Mat<int> random_indices(int n_q, int T, int K, Rng rng) {
  Mat<int> m(n_q, T);
  for (auto& v : m.v) v = int(rng.below(uint64_t(K)));
  return m;
}

BitstreamHeader header_for(const Mat<int>& idx, uint32_t K, uint32_t orig = 12345) {
  BitstreamHeader h;
  h.K = K;
  h.n_q = uint16_t(idx.rows);
  h.frame_rate = 50;
  h.latent_frames = uint32_t(idx.cols);
  h.orig_samples = orig;
  return h;
}

}  // namespace

TEST_CASE("pack and unpack round-trip header and indices exactly") {
  for (int n_q : {1, 3, 6, 12, 24}) {
    Mat<int> idx = random_indices(n_q, 97, 1024, Rng(1).derive("i", n_q));
    auto h = header_for(idx, 1024);
    std::string raw = pack_bitstream(h, idx);

    // 10-bit indices, stage-major, byte-rounded after the fixed header.
    size_t payload_bits = size_t(n_q) * 97 * 10;
    CHECK(raw.size() == kBitstreamHeaderBytes + (payload_bits + 7) / 8);

    Mat<int> out;
    BitstreamHeader g = unpack_bitstream(raw, out);
    CHECK(g.K == h.K);
    CHECK(g.n_q == h.n_q);
    CHECK(g.frame_rate == h.frame_rate);
    CHECK(g.latent_frames == h.latent_frames);
    CHECK(g.orig_samples == h.orig_samples);
    REQUIRE(out.rows == idx.rows);
    REQUIRE(out.cols == idx.cols);
    CHECK((out.v == idx.v));
  }
}

TEST_CASE("non power of two codebooks pack with ceil(log2 K) bits") {
  Mat<int> idx = random_indices(4, 31, 600, Rng(9));
  auto h = header_for(idx, 600);
  std::string raw = pack_bitstream(h, idx);
  CHECK(raw.size() == kBitstreamHeaderBytes + (size_t(4) * 31 * 10 + 7) / 8);
  Mat<int> out;
  unpack_bitstream(raw, out);
  CHECK((out.v == idx.v));
}

TEST_CASE("malformed streams are rejected") {
  Mat<int> idx = random_indices(3, 40, 1024, Rng(2));
  auto h = header_for(idx, 1024);
  std::string raw = pack_bitstream(h, idx);

  std::string bad_magic = raw;
  bad_magic[0] = 'X';
  Mat<int> out;
  CHECK_THROWS_AS(unpack_bitstream(bad_magic, out), DataError);

  std::string truncated = raw.substr(0, raw.size() - 3);
  CHECK_THROWS_AS(unpack_bitstream(truncated, out), DataError);

  std::string tiny = raw.substr(0, 8);
  CHECK_THROWS_AS(unpack_bitstream(tiny, out), DataError);

  // Header and matrix must agree, and indices must fit the codebook.
  BitstreamHeader wrong = h;
  wrong.latent_frames = 39;
  CHECK_THROWS_AS(pack_bitstream(wrong, idx), ConfigError);
  Mat<int> oob = idx;
  oob.at(0, 0) = 1024;
  CHECK_THROWS_AS(pack_bitstream(h, oob), DataError);
}

TEST_CASE("stream files round-trip through disk") {
  Mat<int> idx = random_indices(6, 55, 1024, Rng(3));
  auto h = header_for(idx, 1024, 17600);
  std::string raw = pack_bitstream(h, idx);
  auto path = (std::filesystem::temp_directory_path() / "spg_stream_test.spgc").string();
  write_bitstream_file(path, raw);
  std::string back = read_bitstream_file(path);
  CHECK((back == raw));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_bitstream_file(path), DataError);
}

TEST_CASE("realized rate matches the tier targets at byte granularity") {
  // 10-bit indices at 50 Hz: each stage is exactly 0.5 kbps when the
  // payload is byte-aligned; byte rounding washes out over long streams.
  for (auto [n_q, kbps] : {std::pair{3, 1.5}, {6, 3.0}, {12, 6.0}, {24, 12.0}}) {
    int frames = 400;  // 8 seconds, payload bits divisible by 8
    Mat<int> idx = random_indices(n_q, frames, 1024, Rng(4).derive("r", n_q));
    auto h = header_for(idx, 1024);
    std::string raw = pack_bitstream(h, idx);
    CHECK(realized_kbps(raw.size(), h.latent_frames, h.frame_rate) == doctest::Approx(kbps).epsilon(1e-12));
  }
  // Non-aligned payload: rounding adds less than one byte per stream.
  Mat<int> idx = random_indices(3, 41, 1024, Rng(5));
  auto h = header_for(idx, 1024);
  std::string raw = pack_bitstream(h, idx);
  double rate = realized_kbps(raw.size(), h.latent_frames, h.frame_rate);
  CHECK(rate >= 1.5);
  CHECK(rate < 1.5 + 8.0 / (41.0 / 50.0) / 1000.0 + 1e-9);
}
