#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace conbandit::rng {

inline constexpr std::uint64_t golden = 0x9e3779b97f4a7c15ull;

// splitmix64 finalizer; full-avalanche 64-bit mixer.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Per-run noise key. This is the documented hash(master_seed, run_index):
// mix64(master_seed + golden * (run_index + 1)).
inline std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run_index) {
  return mix64(master_seed + golden * (run_index + 1));
}

// Counter-based draw: one word per (key, t, arm), no sequential state, so any
// single timestep of any run can be replayed in isolation.
inline std::uint64_t draw_word(std::uint64_t key, std::uint64_t t, std::uint64_t arm) {
  return mix64(mix64(key + golden * (t + 1)) + 0xd6e8feb86659fd93ull * (arm + 1));
}

inline double to_unit(std::uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniform01(std::uint64_t key, std::uint64_t t, std::uint64_t arm) {
  return to_unit(draw_word(key, t, arm));
}

inline bool bernoulli(std::uint64_t key, std::uint64_t t, std::uint64_t arm, double p) {
  return uniform01(key, t, arm) < p;
}

// Sequential stream over the same mixer, for one-off construction draws.
struct Counter {
  std::uint64_t key = 0;
  std::uint64_t n = 0;

  explicit Counter(std::uint64_t k) : key(k) {}

  std::uint64_t next_word() { return draw_word(key, n++, 0); }
  double next_unit() { return to_unit(next_word()); }
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }
};

// Uniform in the unit ball of R^n by cube rejection. No transcendentals, so
// construction draws are bit-identical across libm implementations.
inline std::vector<double> unit_ball(Counter& rng, int n) {
  for (;;) {
    std::vector<double> x(n);
    double norm_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] = rng.next_symmetric();
      norm_sq += x[i] * x[i];
    }
    if (norm_sq <= 1.0) return x;
  }
}

// Uniform on the unit sphere of R^n: ball draw, normalized.
inline std::vector<double> unit_sphere(Counter& rng, int n) {
  for (;;) {
    std::vector<double> x = unit_ball(rng, n);
    double norm_sq = 0.0;
    for (double v : x) norm_sq += v * v;
    if (norm_sq < 1e-12) continue;
    double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : x) v *= inv;
    return x;
  }
}

}  // namespace conbandit::rng
