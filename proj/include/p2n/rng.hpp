#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace p2n {

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}
}  // namespace detail

/// Deterministic random stream keyed by (seed, stream id). The same key
/// always replays the same sequence; distinct ids are decorrelated by
/// hashing the id into the engine seed.
class RngStream {
public:
  using engine_type = std::mt19937_64;

  RngStream(std::uint64_t seed, std::string stream_id)
      : seed_(seed), id_(std::move(stream_id)),
        engine_(detail::splitmix64(seed ^ detail::splitmix64(detail::fnv1a(id_)))) {}

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& id() const noexcept { return id_; }

  /// Independent child stream, e.g. `rng.fork("noise")`.
  RngStream fork(std::string_view name) const { return RngStream(seed_, id_ + "/" + std::string(name)); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  /// Uniform integer in [lo, hi].
  long uniform_int(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(engine_); }
  long poisson(double mean) { return mean <= 0.0 ? 0 : std::poisson_distribution<long>(mean)(engine_); }

  engine_type& engine() noexcept { return engine_; }

private:
  std::uint64_t seed_;
  std::string id_;
  engine_type engine_;
};

}  // namespace p2n
