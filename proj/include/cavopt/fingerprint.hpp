#pragma once

#include <cstdint>
#include <cstring>
#include <span>

namespace cavopt {

// Order-sensitive hash of raw double bytes. Used to fingerprint coefficient
// fields and to salt solver seeds so reruns of the same input reproduce the
// same random starts bit for bit.
inline std::uint64_t hash_doubles(std::span<const double> v) {
  std::uint64_t h = 1469598103934665603ull;
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace cavopt
