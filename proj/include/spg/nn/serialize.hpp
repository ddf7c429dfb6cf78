#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "spg/nn/layers.hpp"

namespace spg::nn {

// Checkpoint container: magic, version, a JSON metadata block, then named
// float32 tensors, then an FNV-1a checksum of everything before it. All
// integers little-endian.
struct TensorBlob {
  std::string name;
  std::vector<uint32_t> dims;
  std::vector<float> data;
};

void write_blob_file(const std::string& path, const nlohmann::json& meta,
                     const std::vector<TensorBlob>& tensors);
// Throws DataError on bad magic, version, truncation or checksum mismatch.
nlohmann::json read_blob_file(const std::string& path, std::vector<TensorBlob>& tensors);

template <typename T>
std::vector<TensorBlob> params_to_blobs(const std::vector<ParamRef<T>>& params) {
  std::vector<TensorBlob> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    TensorBlob b;
    b.name = p.name;
    b.dims = {uint32_t(p.w->size())};
    b.data.resize(p.w->size());
    for (size_t i = 0; i < p.w->size(); ++i) b.data[i] = float((*p.w)[i]);
    out.push_back(std::move(b));
  }
  return out;
}

template <typename T>
void blobs_to_params(const std::vector<TensorBlob>& blobs,
                     const std::vector<ParamRef<T>>& params) {
  for (const auto& p : params) {
    const TensorBlob* found = nullptr;
    for (const auto& b : blobs)
      if (b.name == p.name) {
        found = &b;
        break;
      }
    if (!found) throw DataError("checkpoint is missing tensor " + p.name);
    if (found->data.size() != p.w->size())
      throw DataError("checkpoint tensor " + p.name + " has wrong size");
    for (size_t i = 0; i < p.w->size(); ++i) (*p.w)[i] = T(found->data[i]);
  }
}

}  // namespace spg::nn
