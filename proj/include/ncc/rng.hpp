#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>

namespace ncc {

// SplitMix64 finalizer; a bijective mix of a 64-bit counter.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

// Counter-based seed for replicate `index` of a scenario: depends only on the
// three inputs, never on execution order.
constexpr std::uint64_t replicate_seed(std::uint64_t root, std::uint64_t scenario_hash,
                                       std::uint64_t index) noexcept {
  return combine_seed(combine_seed(root, scenario_hash), index);
}

// Independent sub-streams of one replicate seed.
enum class Stream : std::uint64_t { randomization = 1, noise = 2 };

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream stream) {
  return Engine(combine_seed(seed, static_cast<std::uint64_t>(stream)));
}

// FNV-1a, used to fingerprint scenario fields.
class Hasher {
 public:
  Hasher& add(std::string_view s) noexcept {
    for (unsigned char c : s) byte(c);
    byte(0xff);
    return *this;
  }
  Hasher& add(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) byte(static_cast<unsigned char>(v >> (8 * i)));
    return *this;
  }
  Hasher& add(double v) noexcept {
    std::uint64_t bits = 0;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof v);
    return add(bits);
  }
  Hasher& add(int v) noexcept { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
  std::uint64_t value() const noexcept { return mix64(state_); }

 private:
  void byte(unsigned char c) noexcept {
    state_ ^= c;
    state_ *= 0x100000001b3ULL;
  }
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace ncc
