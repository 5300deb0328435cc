#pragma once

#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

#include "stylo/util.hpp"

namespace stylo {

// Counter-based generator: every draw is a pure function of
// (seed, stream name, counter), so results never depend on draw order,
// thread scheduling or the standard library's distribution code.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view stream) : key_(mix(seed ^ fnv1a64(stream))) {}

  std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + 0x9e3779b97f4a7c15ULL * (counter + 1)); }

  std::uint64_t bits(std::uint64_t a, std::uint64_t b) const {
    return mix(bits(a) ^ (0xd1b54a32d192ed03ULL * (b + 1)));
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform(std::uint64_t counter) const { return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53; }

  double uniform(std::uint64_t a, std::uint64_t b) const { return static_cast<double>(bits(a, b) >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) by 128-bit multiply; bias < 2^-64 * bound.
  std::uint64_t below(std::uint64_t bound, std::uint64_t counter) const {
    const unsigned __int128 product =
        static_cast<unsigned __int128>(bits(counter)) * static_cast<unsigned __int128>(bound);
    return static_cast<std::uint64_t>(product >> 64);
  }

  // Fisher-Yates using draws 0..n-2 of this stream.
  template <typename T>
  void shuffle(std::vector<T>& items) const {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i, items.size() - i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace stylo
