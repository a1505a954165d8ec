#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sifr/dataset.hpp"
#include "sifr/scm.hpp"

namespace sifr {

// ê(x, k, R_s) in (0,1]. Values below the floor are clamped up and counted.
using PropensityFn = std::function<double(const Impression&, const Document&)>;

// m̂(x, k): outcome model approximating E[L(C) | X, K, E=1].
using OutcomeFn = std::function<double(const Impression&, const Document&)>;

// L(C; theta) for one logged impression.
using LossFn = std::function<double(const Impression&, const Document&)>;

struct EstimatorOptions {
  // With oracle exposure the logged latent E gates each term. Otherwise the
  // standard convention applies: an impression counts as examined if it was
  // clicked or sits above the lowest click in its session.
  bool oracle_exposure = false;
  double propensity_floor = 1e-3;
};

struct RiskEstimate {
  double value = 0.0;
  std::vector<double> weights;
  double ess = 0.0;
  std::size_t n = 0;
  std::size_t floored = 0;  // propensities clamped up to the floor

  bool operator==(const RiskEstimate&) const = default;
};

double effective_sample_size(std::span<const double> weights);

RiskEstimate naive_risk(const Dataset& data, const ClickLog& log, const LossFn& loss);

RiskEstimate ips_risk(const Dataset& data, const ClickLog& log, const PropensityFn& prop,
                      const LossFn& loss, const EstimatorOptions& opts = {});

RiskEstimate snips_risk(const Dataset& data, const ClickLog& log, const PropensityFn& prop,
                        const LossFn& loss, const EstimatorOptions& opts = {});

RiskEstimate dr_risk(const Dataset& data, const ClickLog& log, const PropensityFn& prop,
                     const OutcomeFn& outcome, const LossFn& loss,
                     const EstimatorOptions& opts = {});

// Pointwise cross-entropy of a click prediction p = sigmoid(score), with
// probabilities clamped to [1e-6, 1 - 1e-6]. l_max() bounds it.
struct ClickCrossEntropy {
  std::function<double(const Document&)> score;
  double operator()(const Impression& imp, const Document& doc) const;
  static double l_max();
};

// Oracle propensity straight from the log.
PropensityFn oracle_propensity();
// Per-position propensity vector (e.g. from regress_em_propensity).
PropensityFn position_propensity(std::vector<double> per_position);

}  // namespace sifr
