#pragma once

#include <cstdint>
#include <string>

#include "spg/util/mat.hpp"

namespace spg::codec {

// Coded stream layout, all little-endian:
//   magic "SPG1", K u32, n_q u16, frame_rate u32, latent_frames u32,
//   orig_samples u32, then indices in stage-major order, ceil(log2 K) bits
//   each, packed LSB-first.
// orig_samples records the pre-padding length so decode can trim exactly.
struct BitstreamHeader {
  uint32_t K = 0;
  uint16_t n_q = 0;
  uint32_t frame_rate = 0;
  uint32_t latent_frames = 0;
  uint32_t orig_samples = 0;
};

constexpr size_t kBitstreamHeaderBytes = 4 + 4 + 2 + 4 + 4 + 4;

std::string pack_bitstream(const BitstreamHeader& h, const Mat<int>& indices);
BitstreamHeader unpack_bitstream(const std::string& raw, Mat<int>& indices);

void write_bitstream_file(const std::string& path, const std::string& raw);
std::string read_bitstream_file(const std::string& path);

// Payload rate against the coded (padded) duration; the fixed header is
// excluded, byte-rounding of the payload is included.
double realized_kbps(size_t stream_bytes, uint32_t latent_frames, uint32_t frame_rate);

}  // namespace spg::codec
