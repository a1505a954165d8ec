#pragma once

#include <cstdint>
#include <vector>

namespace sifr {

// Deterministic PRNG (xoshiro256**) with explicit substream derivation.
// All distribution sampling is implemented on top of the raw 64-bit output so
// that results are bit-identical across platforms, compilers, and thread
// counts. Never swap in std::<distribution>; their outputs are
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  // Independent stream for (seed, stream), e.g. one per simulated session.
  static Rng substream(std::uint64_t seed, std::uint64_t stream) noexcept;

  std::uint64_t next_u64() noexcept;

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() noexcept;

  // Box-Muller, cosine branch only: fixed two-uniform consumption per draw.
  double normal(double mean = 0.0, double stddev = 1.0) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Uniform on [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Dirichlet(1) row: normalized Exp(1) draws. Full support by construction.
  std::vector<double> dirichlet_uniform(std::size_t n) noexcept;

 private:
  std::uint64_t s_[4];
};

// 64-bit FNV-1a, used for config fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t len) noexcept;
std::uint64_t fnv1a64_mix(std::uint64_t h, std::uint64_t v) noexcept;

}  // namespace sifr
