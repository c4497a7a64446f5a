#pragma once

// Counter-derived random substreams.  Every stochastic routine splits its work into fixed
// chunks and seeds chunk k from (seed, k), so results never depend on the worker count.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace starparadox {

inline auto splitmix64(std::uint64_t x) -> std::uint64_t {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of the substream addressed by `path` under `seed`.
inline auto substream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path)
    -> std::uint64_t {
  auto h = splitmix64(seed);
  for (auto k : path) {
    h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_{seed} {}

  // Uniform on the open interval (0, 1), 53 bits.
  auto uniform() -> double {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  auto binomial(std::int64_t n, double p) -> std::int64_t {
    if (n <= 0 || p <= 0.0) {
      return 0;
    }
    if (p >= 1.0) {
      return n;
    }
    return std::binomial_distribution<std::int64_t>{n, p}(engine_);
  }

  auto engine() -> std::mt19937_64& { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace starparadox
