#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace mfaimd {

/// Poisson-driver channels of one user: activation (OFF -> ON with a window
/// draw), loss (multiplicative decrease), departure (ON -> OFF). `Init` feeds
/// the initial-state draw.
enum class Channel : std::uint8_t { Activation = 0, Loss = 1, Departure = 2, Init = 3 };

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct StreamId {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::uint64_t cls = 0;
  std::uint64_t user = 0;
  Channel channel = Channel::Activation;
};

/// Counter-based generator: the n-th output is a fixed function of
/// (stream key, n), so a stream never depends on which thread ran it or on
/// how many numbers other streams consumed.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  constexpr CounterRng() noexcept = default;
  constexpr explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr std::uint64_t key_for(const StreamId& id) noexcept {
    std::uint64_t h = mix64(id.seed + kGamma);
    h = mix64(h ^ ((id.replica + 1) * 0xd1b54a32d192ed03ULL));
    h = mix64(h ^ ((id.cls + 1) * 0xabc98388fb8fac03ULL));
    h = mix64(h ^ ((id.user + 1) * 0x8cb92ba72f3d8dd7ULL));
    h = mix64(h ^ ((static_cast<std::uint64_t>(id.channel) + 1) * 0x9e6c63d0676a9a99ULL));
    return h;
  }
  static constexpr CounterRng for_stream(const StreamId& id) noexcept {
    return CounterRng(key_for(id));
  }

  constexpr std::uint64_t operator()() noexcept { return mix64(key_ + (++counter_) * kGamma); }
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }
  /// Exp(1).
  double exponential() noexcept { return -std::log(uniform()); }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace mfaimd
