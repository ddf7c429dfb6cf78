#include "spg/codec/bitstream.hpp"

#include <cstring>
#include <fstream>

#include "spg/codec/rvq.hpp"
#include "spg/util/errors.hpp"

namespace spg::codec {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'G', '1'};

template <typename T>
void put(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& s, size_t& pos) {
  if (pos + sizeof(T) > s.size()) throw DataError("truncated bitstream");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string pack_bitstream(const BitstreamHeader& h, const Mat<int>& indices) {
  if (uint32_t(indices.rows) != h.n_q || uint32_t(indices.cols) != h.latent_frames)
    throw ConfigError("bitstream header does not match index matrix");
  int bits = bits_per_index(int(h.K));
  std::string s;
  s.append(kMagic, 4);
  put(s, h.K);
  put(s, h.n_q);
  put(s, h.frame_rate);
  put(s, h.latent_frames);
  put(s, h.orig_samples);

  uint64_t acc = 0;
  int nbits = 0;
  for (int q = 0; q < indices.rows; ++q) {
    for (int t = 0; t < indices.cols; ++t) {
      uint32_t idx = uint32_t(indices.at(q, t));
      if (idx >= h.K) throw DataError("codeword index exceeds codebook size");
      acc |= uint64_t(idx) << nbits;
      nbits += bits;
      while (nbits >= 8) {
        s.push_back(char(acc & 0xff));
        acc >>= 8;
        nbits -= 8;
      }
    }
  }
  if (nbits > 0) s.push_back(char(acc & 0xff));
  return s;
}

BitstreamHeader unpack_bitstream(const std::string& raw, Mat<int>& indices) {
  if (raw.size() < kBitstreamHeaderBytes || std::memcmp(raw.data(), kMagic, 4) != 0)
    throw DataError("not a coded stream (bad magic)");
  size_t pos = 4;
  BitstreamHeader h;
  h.K = get<uint32_t>(raw, pos);
  h.n_q = get<uint16_t>(raw, pos);
  h.frame_rate = get<uint32_t>(raw, pos);
  h.latent_frames = get<uint32_t>(raw, pos);
  h.orig_samples = get<uint32_t>(raw, pos);
  if (h.K < 2 || h.K > (1u << 20)) throw DataError("implausible codebook size in bitstream");
  if (h.n_q < 1) throw DataError("bitstream has no quantizer stages");

  int bits = bits_per_index(int(h.K));
  uint64_t total_bits = uint64_t(h.n_q) * h.latent_frames * bits;
  if (raw.size() - pos < (total_bits + 7) / 8) throw DataError("truncated bitstream payload");

  indices.resize(int(h.n_q), int(h.latent_frames));
  uint64_t acc = 0;
  int nbits = 0;
  size_t byte = pos;
  for (int q = 0; q < indices.rows; ++q) {
    for (int t = 0; t < indices.cols; ++t) {
      while (nbits < bits) {
        acc |= uint64_t(uint8_t(raw[byte++])) << nbits;
        nbits += 8;
      }
      uint32_t idx = uint32_t(acc & ((1u << bits) - 1));
      acc >>= bits;
      nbits -= bits;
      if (idx >= h.K) throw DataError("codeword index exceeds codebook size");
      indices.at(q, t) = int(idx);
    }
  }
  return h;
}

void write_bitstream_file(const std::string& path, const std::string& raw) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write stream file: " + path);
  f.write(raw.data(), std::streamsize(raw.size()));
  if (!f) throw DataError("short write to stream file: " + path);
}

std::string read_bitstream_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open stream file: " + path);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

double realized_kbps(size_t stream_bytes, uint32_t latent_frames, uint32_t frame_rate) {
  if (latent_frames == 0) return 0.0;
  double payload_bits = double(stream_bytes - kBitstreamHeaderBytes) * 8.0;
  double seconds = double(latent_frames) / frame_rate;
  return payload_bits / seconds / 1000.0;
}

}  // namespace spg::codec
