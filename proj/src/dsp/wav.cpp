#include "spg/dsp/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "spg/util/errors.hpp"

namespace spg::dsp {

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& s, uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char((v >> 8) & 0xff));
}

uint32_t get_u32(const char* p) {
  uint32_t v = 0;
  std::memcpy(&v, p, 4);
  return v;
}

uint16_t get_u16(const char* p) {
  uint16_t v = 0;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open wav file: " + path);
  std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 44 || raw.compare(0, 4, "RIFF") != 0 || raw.compare(8, 4, "WAVE") != 0)
    throw DataError("not a RIFF/WAVE file: " + path);

  WavData out;
  int channels = 0, bits = 0;
  size_t pos = 12;
  bool have_fmt = false, have_data = false;
  while (pos + 8 <= raw.size()) {
    std::string id = raw.substr(pos, 4);
    uint32_t sz = get_u32(raw.data() + pos + 4);
    pos += 8;
    if (pos + sz > raw.size()) throw DataError("truncated wav chunk in " + path);
    if (id == "fmt ") {
      if (sz < 16) throw DataError("short fmt chunk in " + path);
      uint16_t fmt = get_u16(raw.data() + pos);
      channels = get_u16(raw.data() + pos + 2);
      out.sample_rate = int(get_u32(raw.data() + pos + 4));
      bits = get_u16(raw.data() + pos + 14);
      if (fmt != 1) throw DataError("wav is not integer PCM: " + path);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError("wav data chunk before fmt in " + path);
      if (channels != 1 || bits != 16)
        throw DataError("wav must be mono 16-bit PCM: " + path);
      size_t n = sz / 2;
      out.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        int16_t s = int16_t(get_u16(raw.data() + pos + 2 * i));
        out.samples[i] = float(s) / 32767.0f;
      }
      have_data = true;
    }
    pos += sz + (sz & 1);
  }
  if (!have_data) throw DataError("wav has no data chunk: " + path);
  return out;
}

void write_wav(const std::string& path, const float* x, size_t n, int sample_rate) {
  uint32_t data_bytes = uint32_t(n * 2);
  std::string s;
  s.reserve(44 + data_bytes);
  s += "RIFF";
  put_u32(s, 36 + data_bytes);
  s += "WAVEfmt ";
  put_u32(s, 16);
  put_u16(s, 1);  // integer PCM
  put_u16(s, 1);  // mono
  put_u32(s, uint32_t(sample_rate));
  put_u32(s, uint32_t(sample_rate * 2));
  put_u16(s, 2);
  put_u16(s, 16);
  s += "data";
  put_u32(s, data_bytes);
  for (size_t i = 0; i < n; ++i) {
    float v = std::clamp(x[i], -1.0f, 1.0f);
    auto q = int16_t(std::lrint(v * 32767.0f));
    put_u16(s, uint16_t(q));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write wav file: " + path);
  f.write(s.data(), std::streamsize(s.size()));
  if (!f) throw DataError("short write to wav file: " + path);
}

}  // namespace spg::dsp
