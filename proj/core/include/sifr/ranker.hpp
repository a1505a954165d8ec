#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sifr/rng.hpp"

namespace sifr {

// Scoring function over document features: linear, or one hidden tanh layer.
struct Ranker {
  enum class Kind { Linear, Mlp1 };

  Kind kind = Kind::Linear;
  int dim = 0;
  int hidden = 0;
  std::vector<double> params;

  // Zero-initialized linear ranker: w (dim), b.
  static Ranker linear(int dim);
  // Symmetric uniform +-1/sqrt(fan_in) init: W (hidden x dim), c, v, b.
  static Ranker mlp1(int dim, int hidden, Rng& rng);

  double score(std::span<const double> x) const;
  // grad += coef * d score / d params.
  void accumulate_score_grad(std::span<const double> x, double coef,
                             std::span<double> grad) const;
};

// Flat binary model format: magic "SIFR", version u16, kind u16, dim u32,
// hidden u32, param count u64, then little-endian f64 parameters. A plain-text
// sidecar with the training config is written next to it.
void save_ranker(const Ranker& r, const std::string& path, const std::string& sidecar);
Ranker load_ranker(const std::string& path);

}  // namespace sifr
