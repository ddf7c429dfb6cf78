#include "spg/nn/serialize.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "spg/util/errors.hpp"
#include "spg/util/hash.hpp"

namespace spg::nn {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'G', 'B'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::string& s, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  s.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& s, size_t& pos) {
  if (pos + sizeof(T) > s.size()) throw DataError("truncated checkpoint file");
  T v;
  std::memcpy(&v, s.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void write_blob_file(const std::string& path, const nlohmann::json& meta,
                     const std::vector<TensorBlob>& tensors) {
  std::string s;
  s.append(kMagic, 4);
  put(s, kVersion);
  std::string mj = meta.dump();
  put(s, uint64_t(mj.size()));
  s += mj;
  put(s, uint32_t(tensors.size()));
  for (const auto& t : tensors) {
    put(s, uint32_t(t.name.size()));
    s += t.name;
    put(s, uint32_t(t.dims.size()));
    uint64_t n = 1;
    for (uint32_t d : t.dims) {
      put(s, d);
      n *= d;
    }
    if (n != t.data.size()) throw DataError("tensor dims do not match data size: " + t.name);
    size_t off = s.size();
    s.resize(off + t.data.size() * 4);
    std::memcpy(s.data() + off, t.data.data(), t.data.size() * 4);
  }
  put(s, fnv64(s.data(), s.size()));

  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint: " + path);
    f.write(s.data(), std::streamsize(s.size()));
    if (!f) throw DataError("short write to checkpoint: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move checkpoint into place: " + path);
}

nlohmann::json read_blob_file(const std::string& path, std::vector<TensorBlob>& tensors) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (s.size() < 16 || std::memcmp(s.data(), kMagic, 4) != 0)
    throw DataError("not a checkpoint file: " + path);
  uint64_t stored = 0;
  std::memcpy(&stored, s.data() + s.size() - 8, 8);
  if (stored != fnv64(s.data(), s.size() - 8))
    throw DataError("checkpoint checksum mismatch: " + path);

  size_t pos = 4;
  uint32_t version = get<uint32_t>(s, pos);
  if (version != kVersion) throw DataError("unsupported checkpoint version in " + path);
  uint64_t mlen = get<uint64_t>(s, pos);
  if (pos + mlen > s.size()) throw DataError("truncated checkpoint file");
  nlohmann::json meta = nlohmann::json::parse(s.substr(pos, mlen));
  pos += mlen;
  uint32_t count = get<uint32_t>(s, pos);
  tensors.clear();
  tensors.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    auto& t = tensors[i];
    uint32_t nl = get<uint32_t>(s, pos);
    if (pos + nl > s.size()) throw DataError("truncated checkpoint file");
    t.name = s.substr(pos, nl);
    pos += nl;
    uint32_t nd = get<uint32_t>(s, pos);
    uint64_t n = 1;
    t.dims.resize(nd);
    for (uint32_t d = 0; d < nd; ++d) {
      t.dims[d] = get<uint32_t>(s, pos);
      n *= t.dims[d];
    }
    if (pos + n * 4 > s.size()) throw DataError("truncated checkpoint file");
    t.data.resize(n);
    std::memcpy(t.data.data(), s.data() + pos, n * 4);
    pos += n * 4;
  }
  return meta;
}

}  // namespace spg::nn
