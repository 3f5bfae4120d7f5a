#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>

namespace fdna {

// splitmix64: tiny, fast, and fully portable. All randomness in the project
// flows through this so artifacts are reproducible across platforms and
// standard-library versions (std:: distributions are not pinned by the
// standard).
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derive a child seed from a base seed and a stream tag. Used to give every
// epoch/batch/item/row its own independent deterministic stream.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t s = base ^ (0x9e3779b97f4a7c15ULL + (tag << 1));
  splitmix64_next(s);
  return splitmix64_next(s);
}

template <class... Tags>
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag,
                              std::uint64_t tag2, Tags... rest) {
  return mix_seed(mix_seed(base, tag), tag2, rest...);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // decorrelate trivially related seeds
    splitmix64_next(state_);
    splitmix64_next(state_);
  }

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  // uniform in [0, 1)
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), unbiased
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = n ? (UINT64_MAX - UINT64_MAX % n) : 0;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return r % n;
  }

  // standard normal via Box-Muller
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// FNV-1a 64-bit, used for content hashes and artifact checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64_doubles(const double* values, std::size_t count,
                                     std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(values, count * sizeof(double), h);
}

}  // namespace fdna
