#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace spg {

// FNV-1a 64-bit. Used for config hashes, parameter checksums and file
// digests; collision resistance beyond that is not needed here.
class Fnv64 {
 public:
  Fnv64& update(const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv64& update(std::string_view s) { return update(s.data(), s.size()); }
  template <typename T>
  Fnv64& update_pod(const T& v) {
    return update(&v, sizeof(T));
  }
  uint64_t value() const { return h_; }

 private:
  uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline uint64_t fnv64(const void* data, size_t n) { return Fnv64().update(data, n).value(); }
inline uint64_t fnv64(std::string_view s) { return fnv64(s.data(), s.size()); }

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace spg
