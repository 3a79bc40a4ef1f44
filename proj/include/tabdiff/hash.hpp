#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace tabdiff {

// 64-bit FNV-1a. Used for content fingerprints (codec, layout, input files);
// not a cryptographic hash.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(uint64_t v);

// Streaming hash of a file's bytes. Throws DataError if the file cannot be
// read.
uint64_t hash_file(const std::string& path);

}  // namespace tabdiff
