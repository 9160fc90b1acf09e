#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dmchan::nn {

/// Independent stream labels. Each consumer derives its own generator from
/// the run seed so that, e.g., adding a noise draw never shifts weight init.
enum class Stream : std::uint64_t { Init = 1, Data = 2, Noise = 3, Eval = 4, Projection = 5 };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded 64-bit Mersenne Twister with the handful of draws the library needs.
class Rng {
 public:
  static constexpr std::string_view algorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Child generator for a sub-stream; deterministic in (seed, id).
  Rng split(std::uint64_t id) const { return Rng(splitmix64(seed_ ^ splitmix64(id + 0x632be59bd9b4e019ULL))); }
  Rng stream(Stream s) const { return split(static_cast<std::uint64_t>(s) << 32); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform01(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() { return normal_(engine_); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dmchan::nn
