#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace epismc {

/// SplitMix64 finaliser, used to derive stream keys.
constexpr std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Random stream keyed by a (seed, a, b, c) tuple.
///
/// The particle filter draws every random number for particle `k` in window
/// `i` from `Stream(seed, i, k, purpose)`, so output is identical regardless
/// of how particles are split across workers. The generator underneath is
/// xoshiro256++; it satisfies UniformRandomBitGenerator and can be handed to
/// any <random> distribution.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                  std::uint64_t c = 0) noexcept {
    std::uint64_t x = seed;
    std::uint64_t key = splitmix64(x);
    for (std::uint64_t part : {a, b, c}) {
      x = key ^ (part * 0xd1b54a32d192ed03ULL);
      key = splitmix64(x);
    }
    x = key;
    for (auto& word : state_) word = splitmix64(x);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t v, int k) noexcept {
    return (v << k) | (v >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

// Purpose tags for Stream's last key component.
namespace stream_tag {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kPropagate = 2;
inline constexpr std::uint64_t kResample = 3;
inline constexpr std::uint64_t kRejuvenate = 4;
inline constexpr std::uint64_t kForecast = 5;
inline constexpr std::uint64_t kChain = 6;
inline constexpr std::uint64_t kSimulate = 7;
}  // namespace stream_tag

}  // namespace epismc
