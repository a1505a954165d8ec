#include "sifr/rng.hpp"

#include <cmath>

namespace sifr {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) noexcept {
  std::uint64_t x = seed;
  for (auto& s : s_) s = splitmix64(x);
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t stream) noexcept {
  // Mixes (seed, stream) into a fresh state; adjacent streams share nothing.
  std::uint64_t x = seed;
  std::uint64_t a = splitmix64(x);
  x ^= 0x6a09e667f3bcc909ULL + stream;
  std::uint64_t b = splitmix64(x);
  Rng r(a ^ rotl(b, 17) ^ stream);
  // Warm up past any low-entropy start.
  for (int i = 0; i < 4; ++i) r.next_u64();
  return r;
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double stddev) noexcept {
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  return mean + stddev * z;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) noexcept {
  // Multiply-shift; bias of O(n / 2^64) is irrelevant here and the mapping is
  // fully deterministic.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(m >> 64);
}

std::vector<double> Rng::dirichlet_uniform(std::size_t n) noexcept {
  std::vector<double> row(n);
  double sum = 0.0;
  for (auto& v : row) {
    v = -std::log(1.0 - uniform());
    sum += v;
  }
  for (auto& v : row) v /= sum;
  return row;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_mix(std::uint64_t h, std::uint64_t v) noexcept {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffULL;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sifr
